# Experiment orchestration:
# - run_bocs: the surrogate loop (fit posterior -> Thompson sample -> QUBO -> solve -> evaluate -> append)
# - run_random: the random-search baseline with the same budget and the same initial designs
# - update records, aggregation across trials, the full-enumeration rank table and histogram
# - per-trial run logs with resume, and analyses of finished histories
#
# Seeding: trial t of a run with seed s draws initial designs from default_rng([s, t]) (random search keeps drawing
# from that generator); BOCS iteration i uses default_rng([s, t, 1, i]) for both the Thompson draw and the solver,
# so a resumed trial reproduces an uninterrupted one.
import dataclasses
import functools
import logging
import math
import multiprocessing
import pathlib
import time
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import objective as objective_mod
from .config import RunConfig, save_config
from .encoding import DesignVector, enumerate_canonical
from .objective import Branch, FilterProblem, Observation, PenaltyParams
from .records import HistoryRecord, RunLog, RunLogError, read_csv, write_csv
from .remote import SamplerConnectionError
from .solvers import best_of, solve
from .surrogate import fit_posterior, thompson_sample, to_qubo

ObjectiveFn = Callable[[DesignVector, int], Observation]
PathLike = Union[str, pathlib.Path]

METHODS = ('bocs', 'random')


class TrialAborted(RuntimeError):
    def __init__(self, message: str, checkpoint: Optional[pathlib.Path]):
        super().__init__(message)
        self.checkpoint = checkpoint

    # crosses process boundaries when trials run in a Pool
    def __reduce__(self):
        return TrialAborted, (str(self), self.checkpoint)


@dataclasses.dataclass
class RunHistory:
    method: str
    trial: int
    config: RunConfig
    records: List[HistoryRecord] = dataclasses.field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def observations(self) -> List[Observation]:
        return [r.observation for r in self.records]

    @property
    def ys(self) -> np.ndarray:
        return np.array([r.observation.y for r in self.records], dtype=float)

    @property
    def acquisitions(self) -> List[HistoryRecord]:
        # everything after the initial designs
        return self.records[self.config.n_initial:]

    @property
    def best(self) -> Observation:
        return min(self.observations, key=lambda obs: (obs.y, obs.seq))

    def to_records(self, timing: bool = True) -> List[dict]:
        return [r.to_dict(timing=timing) for r in self.records]


def trial_log_path(out_dir: PathLike, method: str, trial: int) -> pathlib.Path:
    return pathlib.Path(out_dir) / f'{method}_trial_{trial:02d}.jsonl'


def _trial_rng(cfg: RunConfig, trial: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, trial])


def _iteration_rng(cfg: RunConfig, trial: int, i: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, trial, 1, i])


def _default_objective(problem: FilterProblem) -> ObjectiveFn:
    def evaluate(x: DesignVector, seq: int) -> Observation:
        return objective_mod.evaluate(x, problem, seq=seq)
    return evaluate


# Keeps the in-memory history and the run log in step; on resume, picks up the records already logged.
class _TrialRecorder:
    def __init__(self, history: RunHistory, log_path: Optional[PathLike], resume: bool):
        self.history = history
        self.log = RunLog(log_path) if log_path is not None else None
        if self.log is None:
            return
        if resume:
            logged = self.log.read()
            total = history.config.n_initial + history.config.n_iterations
            if len(logged) > total:
                raise RunLogError(f'{self.log.path} holds {len(logged)} records, more than the {total} of this run')
            history.records.extend(logged)
            logging.debug(f'resuming {history.method} trial {history.trial} at seq {len(logged)} from {self.log.path}')
        self.log.reset(history.records)

    @property
    def done(self) -> int:
        return len(self.history.records)

    def check_replay(self, seq: int, x: DesignVector):
        # a resumed design must be the one this seed would have drawn
        logged = self.history.records[seq].observation.x
        if logged != x:
            raise RunLogError(f'run log disagrees with the configured seed at seq {seq}: {logged} != {x}')

    def add(self, obs: Observation, solver_energy: Optional[float] = None, duplicate: bool = False, ms: float = 0.0):
        record = HistoryRecord(obs, solver_energy, duplicate, ms)
        self.history.records.append(record)
        if self.log is not None:
            self.log.append(record)


def _evaluate_designs(designs: Sequence[DesignVector], recorder: _TrialRecorder, evaluate: ObjectiveFn):
    for seq, x in enumerate(designs):
        if seq < recorder.done:
            recorder.check_replay(seq, x)
            continue
        start = time.perf_counter()
        obs = evaluate(x, seq)
        recorder.add(obs, ms=1000 * (time.perf_counter() - start))


def run_bocs(cfg: RunConfig, trial: int = 0, objective: Optional[ObjectiveFn] = None,
             log_path: Optional[PathLike] = None, resume: bool = False) -> RunHistory:
    evaluate = objective or _default_objective(cfg.problem())
    history = RunHistory('bocs', trial, cfg)
    recorder = _TrialRecorder(history, log_path, resume)

    rng = _trial_rng(cfg, trial)
    initial = [DesignVector.random(rng) for _ in range(cfg.n_initial)]
    _evaluate_designs(initial, recorder, evaluate)

    prior = cfg.surrogate_prior()
    sa, remote = cfg.sa_params(), cfg.remote_settings()
    seen = {str(obs.x) for obs in history.observations}
    for i in range(cfg.n_iterations):
        seq = cfg.n_initial + i
        if seq < recorder.done:
            continue
        start = time.perf_counter()
        it_rng = _iteration_rng(cfg, trial, i)
        posterior = fit_posterior(history.observations, prior)
        q = to_qubo(thompson_sample(posterior, it_rng))
        try:
            samples = solve(q, cfg.solver, it_rng, sa=sa, remote=remote)
        except SamplerConnectionError as e:
            checkpoint = recorder.log.path if recorder.log is not None else None
            raise TrialAborted(f'trial {trial} stopped at iteration {i}: {e}', checkpoint) from e

        x = DesignVector(best_of(samples))
        duplicate = str(x) in seen
        seen.add(str(x))
        obs = evaluate(x, seq)
        recorder.add(obs, samples.best.energy, duplicate, 1000 * (time.perf_counter() - start))
        logging.debug(f'bocs trial {trial} iteration {i}: {x} {obs.branch.value} y={obs.y:.4f}'
                      f'{" (duplicate)" if duplicate else ""}')

    logging.info(f'bocs trial {trial}: best y {history.best.y:.4f} over {len(history)} evaluations')
    return history


def run_random(cfg: RunConfig, trial: int = 0, objective: Optional[ObjectiveFn] = None,
               log_path: Optional[PathLike] = None, resume: bool = False) -> RunHistory:
    evaluate = objective or _default_objective(cfg.problem())
    history = RunHistory('random', trial, cfg)
    recorder = _TrialRecorder(history, log_path, resume)

    rng = _trial_rng(cfg, trial)
    designs = [DesignVector.random(rng) for _ in range(cfg.n_initial + cfg.n_iterations)]
    _evaluate_designs(designs, recorder, evaluate)

    logging.info(f'random trial {trial}: best y {history.best.y:.4f} over {len(history)} evaluations')
    return history


def _run_one(method: str, cfg: RunConfig, trial: int, log_path: Optional[PathLike],
             resume: bool, objective: Optional[ObjectiveFn]) -> RunHistory:
    runner = run_bocs if method == 'bocs' else run_random
    return runner(cfg, trial=trial, objective=objective, log_path=log_path, resume=resume)


# Runs cfg.n_trials independent trials, in worker processes when cfg.workers > 1.
# Each trial writes <method>_trial_NN.jsonl under out_dir, next to a config.json snapshot.
def run_trials(cfg: RunConfig, method: str, out_dir: Optional[PathLike] = None,
               objective: Optional[ObjectiveFn] = None, resume: bool = False) -> List[RunHistory]:
    if method not in METHODS:
        raise ValueError(f'unknown method {method!r}; expected one of {METHODS}')
    if out_dir is not None:
        pathlib.Path(out_dir).mkdir(parents=True, exist_ok=True)
        save_config(cfg, pathlib.Path(out_dir) / 'config.json')

    jobs = [(method, cfg, t, trial_log_path(out_dir, method, t) if out_dir is not None else None, resume, objective)
            for t in range(cfg.n_trials)]
    if cfg.workers == 1 or cfg.n_trials == 1:
        return [_run_one(*job) for job in jobs]

    with multiprocessing.Pool(processes=min(cfg.workers, cfg.n_trials)) as pool:
        pending = [pool.apply_async(_run_one, job) for job in jobs]
        return [result.get() for result in pending]


def load_trials(out_dir: PathLike, method: str, cfg: RunConfig) -> List[RunHistory]:
    histories = []
    for path in sorted(pathlib.Path(out_dir).glob(f'{method}_trial_*.jsonl')):
        trial = int(path.stem.rsplit('_', 1)[1])
        histories.append(RunHistory(method, trial, cfg, RunLog(path).read()))
    return histories


# (index, best y so far), index counting evaluations from 1
def update_record(h: Union[RunHistory, Sequence[float]]) -> List[Tuple[int, float]]:
    ys = h.ys if isinstance(h, RunHistory) else np.asarray(h, dtype=float)
    best = np.minimum.accumulate(ys) if len(ys) else ys
    return [(i + 1, float(y)) for i, y in enumerate(best)]


# per-index (index, mean, min, max) of the update records of equal-length histories
def aggregate_trials(histories: Sequence[Union[RunHistory, Sequence[float]]]) -> List[Tuple[int, float, float, float]]:
    if not histories:
        raise ValueError('no histories to aggregate')
    series = [[y for _, y in update_record(h)] for h in histories]
    if len({len(s) for s in series}) != 1:
        raise ValueError(f'histories differ in length: {sorted({len(s) for s in series})}')
    stacked = np.array(series)
    return [(i + 1, float(mean), float(lo), float(hi))
            for i, (mean, lo, hi) in enumerate(zip(stacked.mean(axis=0), stacked.min(axis=0), stacked.max(axis=0)))]


@dataclasses.dataclass(frozen=True)
class RankRow:
    rank: int
    bits: str
    s21_db: float


@dataclasses.dataclass(frozen=True)
class RankTable:
    rows: Tuple[RankRow, ...]  # ascending s21_db, ties ordered by bits

    @classmethod
    def from_results(cls, results: Sequence[Tuple[str, float]]) -> 'RankTable':
        ordered = sorted(results, key=lambda r: (r[1], r[0]))
        values = np.array([v for _, v in ordered])
        # competition rank: 1 + number of strictly better rows
        ranks = np.searchsorted(values, values, side='left') + 1
        return cls(tuple(RankRow(int(rank), bits, float(v)) for rank, (bits, v) in zip(ranks, ordered)))

    def __len__(self):
        return len(self.rows)

    @functools.cached_property
    def values(self) -> np.ndarray:
        return np.array([row.s21_db for row in self.rows])

    @functools.cached_property
    def _rank_by_bits(self):
        return {row.bits: row.rank for row in self.rows}

    @property
    def best(self) -> RankRow:
        return self.rows[0]

    def rank(self, x: Union[DesignVector, str]) -> int:
        try:
            return self._rank_by_bits[str(x)]
        except KeyError:
            raise ValueError(f'{x} is not a canonical design') from None

    def rank_of_value(self, y: float) -> int:
        # the rank a design with value y would take in the table
        return int(np.searchsorted(self.values, y, side='left')) + 1

    def percentile(self, y: float) -> float:
        return 100.0 * int(np.searchsorted(self.values, y, side='right')) / len(self)

    def fraction_below(self, threshold: float) -> float:
        return int(np.searchsorted(self.values, threshold, side='left')) / len(self)

    def histogram(self, bin_width: float = 1.0) -> List[Tuple[float, float, int]]:
        if bin_width <= 0:
            raise ValueError(f'bin width must be positive, got {bin_width}')
        lo = math.floor(self.values[0] / bin_width) * bin_width
        n_bins = max(1, math.floor((self.values[-1] - lo) / bin_width) + 1)
        edges = lo + bin_width * np.arange(n_bins + 1)
        counts, _ = np.histogram(self.values, bins=edges)
        return [(float(left), float(right), int(c)) for left, right, c in zip(edges[:-1], edges[1:], counts)]

    def to_csv(self, path: PathLike):
        write_csv(path, ('rank', 'bits', 's21_db'), [(r.rank, r.bits, repr(r.s21_db)) for r in self.rows])

    @classmethod
    def from_csv(cls, path: PathLike) -> 'RankTable':
        return cls.from_results([(row['bits'], float(row['s21_db'])) for row in read_csv(path)])


def _s21_of(problem: FilterProblem, x: DesignVector) -> Tuple[str, float]:
    return str(x), objective_mod.evaluate(x, problem).y


# Every canonical design (one-hot elements, one route per segment) evaluated and ranked.
def enumerate_and_rank(cfg: RunConfig = RunConfig(), workers: Optional[int] = None) -> RankTable:
    workers = cfg.workers if workers is None else workers
    problem = cfg.problem()
    designs = list(enumerate_canonical())
    start = time.perf_counter()
    if workers > 1:
        with multiprocessing.Pool(processes=workers) as pool:
            results = pool.map(functools.partial(_s21_of, problem), designs, chunksize=64)
    else:
        results = [_s21_of(problem, x) for x in designs]
    table = RankTable.from_results(results)
    logging.info(f'ranked {len(table)} canonical designs in {time.perf_counter() - start:.1f}s, '
                 f'best {table.best.s21_db:.3f} dB ({table.best.bits})')
    return table


def count_feasible(h: RunHistory, start: int = 0, stop: Optional[int] = None) -> int:
    return sum(1 for obs in h.observations[start:stop] if obs.z == 0)


# Fraction of one-hot-feasible acquisitions among acquisitions[start:stop] (0-based, after the initial designs).
def feasible_rate(h: RunHistory, start: int = 0, stop: Optional[int] = None) -> float:
    window = h.acquisitions[start:stop]
    if not window:
        raise ValueError(f'no acquisitions in [{start}, {stop})')
    return sum(1 for r in window if r.observation.z == 0) / len(window)


@dataclasses.dataclass(frozen=True)
class LearningPhase:
    onset: Optional[int]  # 1-based iteration closing the first run of feasible acquisitions, None if never reached
    penalty_fraction_after: Optional[float]  # penalty-branch share of the acquisitions after onset


def learning_phase(h: RunHistory, run: int = 10) -> LearningPhase:
    streak = 0
    acquisitions = h.acquisitions
    for i, record in enumerate(acquisitions):
        streak = streak + 1 if record.observation.z == 0 else 0
        if streak == run:
            after = acquisitions[i + 1:]
            fraction = (sum(1 for r in after if r.observation.branch == Branch.PENALTY) / len(after)) if after else None
            return LearningPhase(i + 1, fraction)
    return LearningPhase(None, None)


@dataclasses.dataclass(frozen=True)
class SummaryRow:
    object: str  # best / average / worst over trials
    value_db: float
    rank: int


# Final best values across trials, with the rank each would take among the canonical designs.
def summarize_final(histories: Sequence[RunHistory], table: RankTable) -> List[SummaryRow]:
    finals = np.array([h.best.y for h in histories])
    if len(finals) == 0:
        raise ValueError('no histories to summarize')
    return [SummaryRow(name, float(v), table.rank_of_value(float(v)))
            for name, v in (('best', finals.min()), ('average', finals.mean()), ('worst', finals.max()))]


# How far the mildest penalty (one violation) sits above the worst canonical design; positive means every
# infeasible design scores worse than every canonical one.
def penalty_margin(table: RankTable, penalty: PenaltyParams) -> float:
    return objective_mod.penalty(1, penalty) - float(table.values[-1])
