import json
import pickle
import statistics

import numpy as np
import pytest

from pi_filter_bocs import harness, objective
from pi_filter_bocs.config import RunConfig, parse_config
from pi_filter_bocs.encoding import DesignVector
from pi_filter_bocs.harness import RankTable, RunHistory, TrialAborted
from pi_filter_bocs.objective import Branch, Observation, PenaltyParams
from pi_filter_bocs.records import HistoryRecord, RunLog, RunLogError

FEASIBLE = DesignVector.from_string('1010101010100100100100')
INFEASIBLE = DesignVector.from_string('0' * 22)


def _small_config(**kwargs) -> RunConfig:
    data = {'n_initial': 5, 'n_iterations': 4, 'n_trials': 2, 'seed': 11, 'sa': {'num_reads': 30, 'sweeps': 10}}
    data.update(kwargs)
    return parse_config(data)


def _synthetic(ys, feasible=None, n_initial=0) -> RunHistory:
    cfg = parse_config({'n_initial': max(n_initial, 1), 'n_iterations': 0})
    cfg = cfg.model_copy(update={'n_initial': n_initial})
    feasible = [True] * len(ys) if feasible is None else feasible
    records = []
    for seq, (y, ok) in enumerate(zip(ys, feasible)):
        obs = Observation(FEASIBLE, y, Branch.S21, 0, seq) if ok else Observation(INFEASIBLE, y, Branch.PENALTY, 5, seq)
        records.append(HistoryRecord(obs))
    return RunHistory('bocs', 0, cfg, records)


def _bits(h: RunHistory):
    return [str(obs.x) for obs in h.observations]


def test_bocs_history_shape_and_metadata():
    cfg = _small_config()
    h = harness.run_bocs(cfg)
    assert len(h) == cfg.n_initial + cfg.n_iterations
    assert [obs.seq for obs in h.observations] == list(range(len(h)))
    assert all(r.solver_energy is None for r in h.records[:cfg.n_initial])
    assert all(r.solver_energy is not None for r in h.acquisitions)
    best = [y for _, y in harness.update_record(h)]
    assert all(u >= v for u, v in zip(best, best[1:]))


def test_zero_iterations_is_the_initial_sample():
    cfg = _small_config(n_iterations=0)
    h = harness.run_bocs(cfg)
    rng = np.random.default_rng([cfg.seed, 0])
    assert [obs.x for obs in h.observations] == [DesignVector.random(rng) for _ in range(cfg.n_initial)]


def test_bocs_is_reproducible():
    cfg = _small_config()
    assert harness.run_bocs(cfg).to_records(timing=False) == harness.run_bocs(cfg).to_records(timing=False)
    exhaustive = cfg.with_overrides(solver='exhaustive', n_iterations=2)
    assert harness.run_bocs(exhaustive).to_records(timing=False) == harness.run_bocs(exhaustive).to_records(timing=False)


def test_random_search_shares_initial_designs_with_bocs():
    cfg = _small_config()
    bocs, rand = harness.run_bocs(cfg), harness.run_random(cfg)
    assert len(rand) == len(bocs)
    assert _bits(rand)[:cfg.n_initial] == _bits(bocs)[:cfg.n_initial]
    assert harness.run_random(cfg).to_records(timing=False) == rand.to_records(timing=False)
    assert all(r.solver_energy is None for r in rand.records)


def test_random_search_feasible_rate():
    cfg = parse_config({'n_initial': 20, 'n_iterations': 280, 'seed': 5})
    counts = [harness.count_feasible(harness.run_random(cfg, trial=t)) for t in range(10)]
    assert 6 <= statistics.mean(counts) <= 13


def test_objective_hook_is_used():
    calls = []

    def planted(x: DesignVector, seq: int) -> Observation:
        calls.append(seq)
        return Observation(x, float(sum(x.bits)), Branch.S21, 0, seq)

    cfg = _small_config(solver='exhaustive', n_iterations=3)
    h = harness.run_bocs(cfg, objective=planted)
    assert calls == list(range(8))
    assert all(obs.y == sum(obs.x.bits) for obs in h.observations)


def test_duplicate_flags_track_repeats():
    def ones(x: DesignVector, seq: int) -> Observation:
        return Observation(x, float(sum(x.bits)), Branch.S21, 0, seq)

    cfg = _small_config(solver='exhaustive', n_initial=30, n_iterations=6, surrogate={'noise_var': 1e-4})
    h = harness.run_bocs(cfg, objective=ones)
    seen = {str(obs.x) for obs in h.observations[:cfg.n_initial]}
    for record in h.acquisitions:
        bits = str(record.observation.x)
        assert record.duplicate == (bits in seen)
        seen.add(bits)


@pytest.mark.slow
def test_planted_quadratic_optimum_is_found():
    target = np.random.default_rng(99).integers(0, 2, size=22)

    def planted(x: DesignVector, seq: int) -> Observation:
        return Observation(x, 10.0 * float(np.sum(np.array(x.bits) != target)), Branch.S21, 0, seq)

    found = 0
    for seed in range(10):
        cfg = parse_config({'n_initial': 20, 'n_iterations': 25, 'seed': seed, 'solver': 'exhaustive'})
        h = harness.run_bocs(cfg, objective=planted)
        found += h.best.y == 0
    assert found >= 9


def test_update_record():
    assert harness.update_record([3.0, 3.0, 3.0]) == [(1, 3.0), (2, 3.0), (3, 3.0)]
    assert harness.update_record([3.0, 2.0, 1.0]) == [(1, 3.0), (2, 2.0), (3, 1.0)]
    ys = np.random.default_rng(1).standard_normal(50)
    expected, best = [], np.inf
    for y in ys:
        best = min(best, y)
        expected.append(best)
    assert [y for _, y in harness.update_record(ys)] == expected


def test_aggregate_trials():
    single = harness.aggregate_trials([[2.0, 1.0]])
    assert single == [(1, 2.0, 2.0, 2.0), (2, 1.0, 1.0, 1.0)]
    assert harness.aggregate_trials([[1.0, 1.0], [3.0, 3.0]]) == [(1, 2.0, 1.0, 3.0), (2, 2.0, 1.0, 3.0)]

    rng = np.random.default_rng(2)
    series = [rng.standard_normal(20) for _ in range(10)]
    stacked = np.minimum.accumulate(np.array(series), axis=1)
    aggregate = harness.aggregate_trials(series)
    assert np.allclose([m for _, m, _, _ in aggregate], stacked.mean(axis=0))
    assert np.allclose([lo for _, _, lo, _ in aggregate], stacked.min(axis=0))
    assert np.allclose([hi for _, _, _, hi in aggregate], stacked.max(axis=0))

    with pytest.raises(ValueError):
        harness.aggregate_trials([[1.0], [1.0, 2.0]])
    with pytest.raises(ValueError):
        harness.aggregate_trials([])


def test_rank_table_lookups():
    table = RankTable.from_results([('c', -3.0), ('a', -1.0), ('b', -3.0), ('d', 0.5)])
    assert [(r.rank, r.bits) for r in table.rows] == [(1, 'b'), (1, 'c'), (3, 'a'), (4, 'd')]
    assert table.best.bits == 'b'
    assert table.rank('a') == 3
    with pytest.raises(ValueError):
        table.rank('z')
    assert table.rank_of_value(-5.0) == 1
    assert table.rank_of_value(-1.0) == 3
    assert table.rank_of_value(-0.5) == 4
    assert table.percentile(-3.0) == 50.0
    assert table.percentile(-10.0) == 0.0
    assert table.fraction_below(0.0) == 0.75
    assert table.histogram(1.0) == [(-3.0, -2.0, 2), (-2.0, -1.0, 0), (-1.0, 0.0, 1), (0.0, 1.0, 1)]


def test_rank_table_csv_round_trip(tmp_path):
    table = RankTable.from_results([('01', -2.25), ('10', -7.125)])
    table.to_csv(tmp_path / 'rank_table.csv')
    assert RankTable.from_csv(tmp_path / 'rank_table.csv') == table


@pytest.fixture(scope='module')
def rank_table():
    return harness.enumerate_and_rank(RunConfig())


def test_enumerate_and_rank(rank_table):
    assert len(rank_table) == 2592
    assert rank_table.rank(rank_table.best.bits) == 1
    assert all(u <= v for u, v in zip(rank_table.values, rank_table.values[1:]))

    median = rank_table.rows[len(rank_table) // 2]
    assert abs(rank_table.percentile(median.s21_db) - 50.0) <= 100.0 * (
        sum(1 for r in rank_table.rows if r.s21_db == median.s21_db) + 1) / len(rank_table)
    assert sum(c for _, _, c in rank_table.histogram()) == 2592
    # every penalty (at least y_base + lambda) is worse than every canonical design
    assert harness.penalty_margin(rank_table, PenaltyParams()) > 0


def test_enumerate_matches_direct_evaluation(rank_table):
    x = DesignVector.from_string('0101101010010001100100')
    y = objective.evaluate(x).y
    assert rank_table.values[rank_table.rank(x) - 1] == y


def test_learning_phase_and_feasible_rate():
    feasible = [False] * 12 + [True] * 10 + [False] + [True] * 7
    h = _synthetic([-50.0] * len(feasible), feasible, n_initial=2)
    assert len(h.acquisitions) == 28
    assert harness.feasible_rate(h, 0, 10) == 0.0
    assert harness.feasible_rate(h, 10, 20) == 1.0
    phase = harness.learning_phase(h)
    assert phase.onset == 20
    assert phase.penalty_fraction_after == pytest.approx(1 / 8)
    assert harness.learning_phase(_synthetic([0.0] * 5, [False] * 5)).onset is None
    assert harness.count_feasible(h) == 17
    with pytest.raises(ValueError):
        harness.feasible_rate(h, 100, 200)


def test_summarize_final():
    table = RankTable.from_results([(f'{i:02d}', -float(i)) for i in range(10)])
    histories = [_synthetic([-1.0, -8.5]), _synthetic([-2.0, -4.5])]
    rows = harness.summarize_final(histories, table)
    assert [(r.object, r.value_db) for r in rows] == [('best', -8.5), ('average', -6.5), ('worst', -4.5)]
    assert [r.rank for r in rows] == [2, 4, 6]


def test_run_trials_writes_logs_and_snapshot(tmp_path):
    cfg = _small_config(n_iterations=2)
    histories = harness.run_trials(cfg, 'bocs', tmp_path)
    assert [h.trial for h in histories] == [0, 1]
    assert json.loads((tmp_path / 'config.json').read_text())['seed'] == 11
    for h in histories:
        path = harness.trial_log_path(tmp_path, 'bocs', h.trial)
        lines = path.read_text().splitlines()
        assert len(lines) == len(h)
        assert set(json.loads(lines[0])) == {'seq', 'bits', 'branch', 'z', 'y', 'solver_energy', 'duplicate', 'ms'}
    loaded = harness.load_trials(tmp_path, 'bocs', cfg)
    assert [h.to_records(timing=False) for h in loaded] == [h.to_records(timing=False) for h in histories]
    with pytest.raises(ValueError):
        harness.run_trials(cfg, 'grid-search')


def test_run_trials_in_workers_matches_serial():
    cfg = _small_config(n_iterations=2)
    serial = harness.run_trials(cfg, 'bocs')
    parallel = harness.run_trials(cfg.with_overrides(workers=2), 'bocs')
    assert [h.to_records(timing=False) for h in parallel] == [h.to_records(timing=False) for h in serial]


def test_resume_reproduces_uninterrupted_run(tmp_path):
    cfg = _small_config()
    log = tmp_path / 'bocs_trial_00.jsonl'
    full = harness.run_bocs(cfg, log_path=log)

    lines = log.read_text().splitlines()
    # interrupted after seq 6, in the middle of writing seq 7
    log.write_text('\n'.join(lines[:7]) + '\n' + lines[7][:15])
    resumed = harness.run_bocs(cfg, log_path=log, resume=True)
    assert resumed.to_records(timing=False) == full.to_records(timing=False)
    assert [r.to_dict(timing=False) for r in RunLog(log).read()] == full.to_records(timing=False)


def test_resume_rejects_foreign_log(tmp_path):
    log = tmp_path / 'random_trial_00.jsonl'
    harness.run_random(_small_config(), log_path=log)
    with pytest.raises(RunLogError):
        harness.run_random(_small_config(seed=12), log_path=log, resume=True)


def test_remote_outage_aborts_with_checkpoint(tmp_path, mock_server):
    cfg = _small_config(n_iterations=3, solver='remote',
                        remote={'endpoint': 'http://127.0.0.1:9/sample', 'retries': 0, 'timeout': 1.0})
    log = tmp_path / 'bocs_trial_00.jsonl'
    with pytest.raises(TrialAborted) as info:
        harness.run_bocs(cfg, log_path=log)
    assert info.value.checkpoint == log
    assert len(log.read_text().splitlines()) == cfg.n_initial

    url, _ = mock_server(backend='exhaustive')
    resumed = harness.run_bocs(cfg.with_overrides(endpoint=url), log_path=log, resume=True)
    reference = harness.run_bocs(cfg.with_overrides(solver='exhaustive'))
    assert _bits(resumed) == _bits(reference)


def test_trial_aborted_survives_pickling(tmp_path):
    error = pickle.loads(pickle.dumps(TrialAborted('trial 1 stopped', tmp_path / 'bocs_trial_01.jsonl')))
    assert str(error) == 'trial 1 stopped'
    assert error.checkpoint == tmp_path / 'bocs_trial_01.jsonl'
    assert pickle.loads(pickle.dumps(TrialAborted('no log', None))).checkpoint is None


def test_remote_outage_in_workers_aborts(tmp_path):
    cfg = _small_config(n_iterations=2, solver='remote', workers=2,
                        remote={'endpoint': 'http://127.0.0.1:9/sample', 'retries': 0, 'timeout': 1.0})
    with pytest.raises(TrialAborted) as info:
        harness.run_trials(cfg, 'bocs', tmp_path)
    # results are collected in trial order, so trial 0 reports first
    assert info.value.checkpoint == harness.trial_log_path(tmp_path, 'bocs', 0)
    assert len(info.value.checkpoint.read_text().splitlines()) == cfg.n_initial


@pytest.mark.slow
def test_bocs_outperforms_random_search(rank_table):
    cfg = parse_config({'n_trials': 5, 'seed': 0, 'workers': 5})
    bocs = harness.run_trials(cfg, 'bocs')
    rand = harness.run_trials(cfg, 'random')
    bocs_median = statistics.median(h.best.y for h in bocs)
    rand_median = statistics.median(h.best.y for h in rand)
    assert rank_table.rank_of_value(bocs_median) <= 0.03 * len(rank_table)
    assert bocs_median < rand_median

    # the surrogate first learns the penalty, then the filter response
    early = statistics.median(harness.feasible_rate(h, 0, 50) for h in bocs)
    late = statistics.median(harness.feasible_rate(h, 200, 300) for h in bocs)
    assert late > early
