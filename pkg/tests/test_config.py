import json

import pytest

from pi_filter_bocs import config
from pi_filter_bocs.config import ConfigError, RunConfig


def test_defaults_reproduce_reference_experiment():
    cfg = RunConfig()
    assert (cfg.n_initial, cfg.n_iterations, cfg.n_trials) == (20, 300, 10)
    assert cfg.solver == 'sa'
    assert cfg.sa.num_reads == 3000
    assert cfg.circuit.freq == 10e6
    assert (cfg.penalty.y_base, cfg.penalty.lam) == (-60.0, 10.0)
    problem = cfg.problem()
    assert problem.grid.nx == 10 and problem.grid.ny == 15
    assert problem.slots.inductor == ((6, 4), (6, 12))
    assert problem.penalty.lam == 10.0
    assert cfg.sa_params().num_reads == 3000
    assert cfg.surrogate_prior().n_features == 254
    assert cfg.surrogate_prior().scale_y is False
    assert config.parse_config({'surrogate': {'scale_y': True}}).surrogate_prior().scale_y is True


def test_round_trip_through_file(tmp_path):
    cfg = config.parse_config({'n_iterations': 5, 'seed': 3, 'penalty': {'lambda': 12.5},
                               'sa': {'num_reads': 10, 'beta_hot': 0.1, 'beta_cold': 5.0},
                               'slots': {'cap1': [[3, 3], [3, 13]]}})
    path = tmp_path / 'run.json'
    config.save_config(cfg, path)
    assert json.loads(path.read_text())['penalty'] == {'y_base': -60.0, 'lambda': 12.5}
    loaded = config.load_config(path)
    assert loaded == cfg
    assert loaded.to_dict() == cfg.to_dict()
    assert loaded.problem().slots.cap1 == ((3, 3), (3, 13))


@pytest.mark.parametrize('data', [
    {'unknown': 1},
    {'grid': {'nx': 1}},
    {'penalty': {'lambda': 0}},
    {'n_trials': 0},
    {'sa': {'beta_hot': 1.0}},
    {'sa': {'beta_hot': 2.0, 'beta_cold': 1.0}},
    {'solver': 'quantum'},
    {'solver': 'remote'},
    {'slots': {'output_port': [[11, 4], [11, 12]]}},
    {'circuit': {'kappa_c': -1}},
])
def test_invalid_configurations(data):
    with pytest.raises(ConfigError):
        config.parse_config(data)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        config.load_config(tmp_path / 'missing.json')
    bad = tmp_path / 'bad.json'
    bad.write_text('{"n_trials": ')
    with pytest.raises(ConfigError):
        config.load_config(bad)


def test_overrides():
    cfg = RunConfig().with_overrides(solver='remote', endpoint='http://localhost:1/sample', n_trials=2, seed=None)
    assert cfg.solver == 'remote'
    assert cfg.remote.endpoint == 'http://localhost:1/sample'
    assert cfg.n_trials == 2
    assert cfg.seed == 0
    assert cfg.remote_settings().endpoint == 'http://localhost:1/sample'
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(workers=0)
