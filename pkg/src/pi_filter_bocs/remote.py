# Client for a remote QUBO sampler (the stand-in for annealing hardware), speaking a small JSON protocol
# over plain HTTP POST:
#
#   request:  {"n": int, "linear": [float], "quadratic": [[i, j, float]], "num_reads": int}
#   response: {"samples": [{"x": "0101...", "energy": float, "occurrences": int}]}
#
# Response energies are offset-free. Every returned sample is re-evaluated locally before it is trusted.
import dataclasses
import logging
import math
import time
from typing import Dict, List, Optional

import numpy as np
import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from .solvers import SaParams, SampleRecord, SampleSet, SolverError
from .surrogate import QuboInstance


class SamplerError(SolverError):
    pass


# the endpoint could not be reached (after retries); the same request may succeed later
class SamplerConnectionError(SamplerError):
    pass


class MalformedResponseError(SamplerError):
    pass


# the sampler reported an energy that does not match its own sample: the sampler is defective
class EnergyMismatchError(SamplerError):
    pass


@dataclasses.dataclass(frozen=True)
class RemoteSettings:
    endpoint: Optional[str] = None
    timeout: float = 30.0  # seconds, per attempt
    retries: int = 3
    backoff_factor: float = 0.5  # exponential backoff: backoff_factor * 2^(attempt - 1) seconds
    energy_tol: float = 1e-6


def make_session(settings: RemoteSettings) -> requests.Session:
    retry = Retry(
        total=settings.retries,
        connect=settings.retries,
        read=settings.retries,
        status=settings.retries,
        backoff_factor=settings.backoff_factor,
        status_forcelist=(429, 500, 502, 503, 504),
        allowed_methods=frozenset({'POST'}),
        raise_on_status=False,
    )
    session = requests.Session()
    adapter = HTTPAdapter(max_retries=retry)
    session.mount('http://', adapter)
    session.mount('https://', adapter)
    return session


def parse_samples(payload: Dict, q: QuboInstance, energy_tol: float = 1e-6) -> List[SampleRecord]:
    if not isinstance(payload, dict) or not isinstance(payload.get('samples'), list):
        raise MalformedResponseError('response has no "samples" list')
    if not payload['samples']:
        raise MalformedResponseError('sampler returned no samples')

    parsed = []
    for k, sample in enumerate(payload['samples']):
        try:
            bits = sample['x']
            energy = float(sample['energy'])
            occurrences = int(sample.get('occurrences', 1))
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedResponseError(f'sample {k} is malformed: {sample!r}') from e
        if not isinstance(bits, str) or len(bits) != q.n or set(bits) - {'0', '1'}:
            raise MalformedResponseError(f'sample {k} is not a {q.n}-bit string: {bits!r}')
        if occurrences < 1 or not math.isfinite(energy):
            raise MalformedResponseError(f'sample {k} has invalid energy or occurrences: {sample!r}')

        parsed.append((tuple(int(c) for c in bits), energy, occurrences))

    states = np.array([x for x, _, _ in parsed], dtype=np.int8)
    local = q.to_bqm().energies((states, q.labels))
    records = []
    for (x, energy, occurrences), full in zip(parsed, local):
        if abs(energy + q.offset - full) > energy_tol:
            bits = ''.join(map(str, x))
            logging.warning(f'sampler energy {energy} for {bits} does not match local {full - q.offset}')
            raise EnergyMismatchError(
                f'sample {bits}: sampler energy {energy} != local energy {full - q.offset} (offset-free)')
        records.append(SampleRecord(x, energy + q.offset, occurrences))
    return records


def solve_remote(q: QuboInstance, endpoint: str, p: SaParams = SaParams(),
                 settings: Optional[RemoteSettings] = None,
                 session: Optional[requests.Session] = None) -> SampleSet:
    settings = settings or RemoteSettings(endpoint=endpoint)
    start = time.perf_counter()
    own_session = session is None
    if own_session:
        session = make_session(settings)

    try:
        response = session.post(endpoint, json=q.to_wire(p.num_reads), timeout=settings.timeout)
        if 400 <= response.status_code < 500 and response.status_code != 429:
            raise SamplerError(f'sampler rejected the request: HTTP {response.status_code} {response.text[:200]}')
        response.raise_for_status()
        payload = response.json()
    except requests.exceptions.JSONDecodeError as e:
        raise MalformedResponseError(f'sampler response is not JSON: {e}') from e
    except requests.RequestException as e:
        logging.warning(f'remote sampler at {endpoint} failed after {settings.retries} retries: {e}')
        raise SamplerConnectionError(f'cannot reach sampler at {endpoint}: {e}') from e
    finally:
        if own_session:
            session.close()

    records = parse_samples(payload, q, settings.energy_tol)
    samples = SampleSet.from_records(records, 'remote', time.perf_counter() - start)
    logging.debug(f'remote: {len(samples)} samples from {endpoint}, best energy {samples.best.energy:.6g}')
    return samples
