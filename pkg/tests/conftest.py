import socket
import threading
import time

import pytest
import uvicorn

from pi_filter_bocs import mock_sampler


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run full-length experiments')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


def _free_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
        s.bind(('127.0.0.1', 0))
        return s.getsockname()[1]


# Starts a mock sampler app on localhost in a background thread; yields (url, app).
@pytest.fixture
def mock_server():
    servers = []

    def start(**app_kwargs):
        app = mock_sampler.create_app(**app_kwargs)
        port = _free_port()
        server = uvicorn.Server(uvicorn.Config(app, host='127.0.0.1', port=port, log_level='warning'))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        deadline = time.monotonic() + 10
        while not server.started:
            if time.monotonic() > deadline:
                raise RuntimeError('mock sampler did not start')
            time.sleep(0.01)
        servers.append((server, thread))
        return f'http://127.0.0.1:{port}/sample', app

    yield start

    for server, thread in servers:
        server.should_exit = True
        thread.join(timeout=10)
