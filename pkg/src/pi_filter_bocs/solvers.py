# Minimizers for QuboInstance.
# - solve_sa: single-flip Metropolis simulated annealing over an ensemble of independent reads,
#   geometric inverse-temperature schedule (the ensemble is updated in lockstep with numpy).
# - solve_exhaustive: exact enumeration for n <= 24, ties broken toward the lexicographically smallest x.
# - solve: dispatch by solver name, including the remote sampler client.
import dataclasses
import functools
import logging
import math
import time
from typing import Optional, Sequence, Tuple

import dimod
import numpy as np

from .surrogate import QuboInstance

MAX_EXHAUSTIVE_N = 24
MAX_SPECTRUM_N = 20
SOLVER_NAMES = ('sa', 'exhaustive', 'remote')


class SolverError(RuntimeError):
    pass


class ProblemTooLargeError(SolverError):
    pass


@dataclasses.dataclass(frozen=True)
class SaParams:
    num_reads: int = 3000
    sweeps: int = 100
    # schedule endpoints; derived from the instance weights when left unset
    beta_hot: Optional[float] = None
    beta_cold: Optional[float] = None

    def __post_init__(self):
        if self.num_reads < 1 or self.sweeps < 1:
            raise SolverError(f'num_reads and sweeps must be positive: {self}')
        if (self.beta_hot is None) != (self.beta_cold is None):
            raise SolverError('set both beta_hot and beta_cold, or neither')
        if self.beta_hot is not None and not 0 < self.beta_hot < self.beta_cold:
            raise SolverError(f'need 0 < beta_hot < beta_cold, got {self.beta_hot}, {self.beta_cold}')


@dataclasses.dataclass(frozen=True)
class SampleRecord:
    x: Tuple[int, ...]
    energy: float
    occurrences: int = 1

    @property
    def bits(self) -> str:
        return ''.join(str(b) for b in self.x)


def _bqm_energies(q: QuboInstance, states: np.ndarray) -> np.ndarray:
    return np.asarray(q.to_bqm().energies((np.asarray(states, dtype=np.int8), q.labels)), dtype=float)


# Solver output: a dimod.SampleSet over the variables 0..n-1 with solver_tag and wall_time in its info,
# rows stored in ascending energy, ties in lexicographic x.
@dataclasses.dataclass(frozen=True)
class SampleSet:
    samples: dimod.SampleSet

    @classmethod
    def from_records(cls, records: Sequence[SampleRecord], solver_tag: str, wall_time: float = 0.0) -> 'SampleSet':
        ordered = sorted(records, key=lambda r: (r.energy, r.x))
        info = {'solver_tag': solver_tag, 'wall_time': wall_time}
        if not ordered:
            return cls(dimod.SampleSet.from_samples([], dimod.BINARY, energy=[], info=info))
        n = len(ordered[0].x)
        states = np.array([r.x for r in ordered], dtype=np.int8).reshape(len(ordered), n)
        samples = dimod.SampleSet.from_samples(
            (states, list(range(n))), dimod.BINARY,
            energy=[r.energy for r in ordered], num_occurrences=[r.occurrences for r in ordered], info=info)
        return cls(samples)

    @classmethod
    def from_states(cls, states: np.ndarray, q: QuboInstance, solver_tag: str, wall_time: float = 0.0) -> 'SampleSet':
        # collapse repeated states, re-evaluate their energies on q, sort
        unique, counts = np.unique(np.asarray(states, dtype=np.int8), axis=0, return_counts=True)
        energies = _bqm_energies(q, unique)
        records = [SampleRecord(tuple(int(b) for b in row), float(e), int(c))
                   for row, e, c in zip(unique, energies, counts)]
        return cls.from_records(records, solver_tag, wall_time)

    @property
    def solver_tag(self) -> str:
        return self.samples.info['solver_tag']

    @property
    def wall_time(self) -> float:
        return self.samples.info['wall_time']

    @functools.cached_property
    def records(self) -> Tuple[SampleRecord, ...]:
        record = self.samples.record
        if len(record) == 0:
            return ()
        columns = [self.samples.variables.index(v) for v in range(len(self.samples.variables))]
        states = record.sample[:, columns]
        return tuple(SampleRecord(tuple(int(b) for b in row), float(e), int(c))
                     for row, e, c in zip(states, record.energy, record.num_occurrences))

    def __len__(self):
        return len(self.samples)

    @property
    def best(self) -> SampleRecord:
        if not self.records:
            raise SolverError('empty sample set')
        return self.records[0]

    def check_energies(self, q: QuboInstance, tol: float = 1e-9) -> Optional[SampleRecord]:
        # first record whose stated energy disagrees with q, or None
        if not self.records:
            return None
        local = _bqm_energies(q, np.array([r.x for r in self.records]))
        for r, e in zip(self.records, local):
            if abs(e - r.energy) > tol:
                return r
        return None


def best_of(s: SampleSet) -> Tuple[int, ...]:
    return s.best.x


# Inverse temperatures that make the largest possible single-flip change likely to be accepted at the start
# (probability 1/2) and the smallest nonzero weight unlikely to be accepted at the end (probability 1/100).
def default_beta_range(q: QuboInstance) -> Tuple[float, float]:
    abs_q = np.abs(q.quadratic)
    flip_bounds = np.abs(q.linear) + abs_q.sum(axis=0) + abs_q.sum(axis=1)
    max_delta = float(flip_bounds.max()) if q.n else 0.0
    weights = np.concatenate([np.abs(q.linear), abs_q[abs_q > 0]])
    weights = weights[weights > 0]
    if max_delta == 0 or len(weights) == 0:
        return 0.1, 1.0
    return math.log(2) / max_delta, math.log(100) / float(weights.min())


def solve_sa(q: QuboInstance, p: SaParams, rng: np.random.Generator) -> SampleSet:
    start = time.perf_counter()
    if q.n < 1:
        raise SolverError('QUBO has no variables')
    if p.beta_hot is None:
        beta_hot, beta_cold = default_beta_range(q)
    else:
        beta_hot, beta_cold = p.beta_hot, p.beta_cold
    betas = np.geomspace(beta_hot, beta_cold, p.sweeps)

    symmetric = q.symmetric
    x = rng.integers(0, 2, size=(p.num_reads, q.n)).astype(float)
    for beta in betas:
        for i in range(q.n):
            field = q.linear[i] + x @ symmetric[:, i]
            delta = (1 - 2 * x[:, i]) * field
            accept = (delta <= 0) | (rng.random(p.num_reads) < np.exp(-beta * np.maximum(delta, 0)))
            x[accept, i] = 1 - x[accept, i]

    samples = SampleSet.from_states(x, q, 'sa', time.perf_counter() - start)
    logging.debug(f'SA: {p.num_reads} reads x {p.sweeps} sweeps, beta {beta_hot:.3g}->{beta_cold:.3g}, '
                  f'{len(samples)} distinct states, best energy {samples.best.energy:.6g}')
    return samples


def _all_states(k: int) -> np.ndarray:
    # every k-bit vector, row r is r written in binary with the first column as the most significant bit
    return ((np.arange(2 ** k)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(float)


def _partial_energy(states: np.ndarray, linear: np.ndarray, quadratic: np.ndarray) -> np.ndarray:
    return states @ linear + np.einsum('ki,ij,kj->k', states, quadratic, states)


# Exact minimum by enumeration. The variables are split into a high block (leading bits) and a low block;
# for each block of high states, the energies of all low states come out of one matrix product.
def solve_exhaustive(q: QuboInstance, spectrum: bool = False) -> SampleSet:
    start = time.perf_counter()
    n = q.n
    if n > MAX_EXHAUSTIVE_N:
        raise ProblemTooLargeError(f'exhaustive search is limited to n <= {MAX_EXHAUSTIVE_N}, got {n}')
    if spectrum and n > MAX_SPECTRUM_N:
        raise ProblemTooLargeError(f'a full spectrum is limited to n <= {MAX_SPECTRUM_N}, got {n}')

    n_low = min(n, 12)
    high, low = slice(0, n - n_low), slice(n - n_low, n)
    low_states = _all_states(n_low)
    low_energy = _partial_energy(low_states, q.linear[low], q.quadratic[low, low])
    high_states = _all_states(n - n_low)
    high_energy = _partial_energy(high_states, q.linear[high], q.quadratic[high, high]) + q.offset
    cross = high_states @ q.quadratic[high, low]

    block = max(1, 2 ** 22 // 2 ** n_low)
    best_index, best_energy = 0, math.inf
    all_energies = []
    for first in range(0, len(high_states), block):
        rows = slice(first, first + block)
        energies = high_energy[rows, None] + low_energy[None, :] + cross[rows] @ low_states.T
        flat = energies.ravel()
        i = int(np.argmin(flat))
        if flat[i] < best_energy:
            best_index, best_energy = first * 2 ** n_low + i, float(flat[i])
        if spectrum:
            all_energies.append(flat)

    def to_bits(index: int) -> Tuple[int, ...]:
        return tuple(int(b) for b in (index >> np.arange(n - 1, -1, -1)) & 1)

    if spectrum:
        flat = np.concatenate(all_energies)
        order = np.argsort(flat, kind='stable')
        records = [SampleRecord(to_bits(int(index)), float(flat[index])) for index in order]
        return SampleSet.from_records(records, 'exhaustive', time.perf_counter() - start)

    x = to_bits(best_index)
    energy = q.energy(np.array(x, dtype=float))
    return SampleSet.from_records([SampleRecord(x, energy)], 'exhaustive', time.perf_counter() - start)


def solve(q: QuboInstance, solver: str, rng: np.random.Generator,
          sa: SaParams = SaParams(), remote=None) -> SampleSet:
    if solver == 'sa':
        return solve_sa(q, sa, rng)
    if solver == 'exhaustive':
        return solve_exhaustive(q)
    if solver == 'remote':
        from .remote import solve_remote
        if remote is None or not remote.endpoint:
            raise SolverError('the remote solver needs an endpoint')
        return solve_remote(q, remote.endpoint, sa, settings=remote)
    raise SolverError(f'unknown solver {solver!r}; expected one of {SOLVER_NAMES}')
