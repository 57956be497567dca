import logging
import pathlib
from typing import Dict, List, Optional, Union

from . import harness
from .config import RunConfig, load_config
from .encoding import DesignVector, Feasible, decode
from .harness import RankTable, RunHistory
from .objective import Observation, evaluate
from .records import write_csv, write_json

PathLike = Union[str, pathlib.Path]


# BOCS trials with the configured solver; run logs go to out_dir when given
def optimize(cfg: RunConfig, out_dir: Optional[PathLike] = None, resume: bool = False) -> List[RunHistory]:
    return harness.run_trials(cfg, 'bocs', out_dir, resume=resume)


# random-search trials with the same budget and seeds as optimize
def baseline(cfg: RunConfig, out_dir: Optional[PathLike] = None, resume: bool = False) -> List[RunHistory]:
    return harness.run_trials(cfg, 'random', out_dir, resume=resume)


def rank_designs(cfg: RunConfig, out_dir: Optional[PathLike] = None, bin_width: float = 1.0) -> RankTable:
    table = harness.enumerate_and_rank(cfg)
    if out_dir is not None:
        out_dir = pathlib.Path(out_dir)
        table.to_csv(out_dir / 'rank_table.csv')
        write_csv(out_dir / 'histogram.csv', ('bin_left_db', 'bin_right_db', 'count'), table.histogram(bin_width))
    return table


# one-shot objective query for a 22-character bit string
def query(bits: str, cfg: RunConfig = RunConfig()) -> Observation:
    return evaluate(DesignVector.from_string(bits), cfg.problem())


# The evaluated design with its board layout: element placements and the conductor cells of every segment.
# geometry is None for designs that violate the one-hot constraints.
def layout(bits: str, cfg: RunConfig = RunConfig()) -> Dict:
    problem = cfg.problem()
    x = DesignVector.from_string(bits)
    obs = evaluate(x, problem)
    outcome = decode(x, problem.grid, problem.slots)
    return {
        'bits': str(x),
        'branch': obs.branch.value,
        'z': obs.z,
        'y': obs.y,
        'geometry': outcome.geometry.to_dict() if isinstance(outcome, Feasible) else None,
    }


# Turns the run logs of a finished run directory into CSV series:
# per-trial search history and update record, the per-index aggregate over trials,
# the layout of the best design found by each method as JSON,
# and (with a rank table) the best/average/worst summary.
def report(run_dir: PathLike, out_dir: Optional[PathLike] = None,
           rank_table: Optional[PathLike] = None) -> List[pathlib.Path]:
    run_dir = pathlib.Path(run_dir)
    out_dir = pathlib.Path(out_dir) if out_dir is not None else run_dir
    cfg = load_config(run_dir / 'config.json')
    table = RankTable.from_csv(rank_table) if rank_table is not None else None

    written = []
    summary_rows = []
    for method in harness.METHODS:
        histories = harness.load_trials(run_dir, method, cfg)
        if not histories:
            continue
        for h in histories:
            path = out_dir / f'history_{method}_trial_{h.trial:02d}.csv'
            write_csv(path, ('index', 'y', 'branch'),
                      [(i + 1, repr(obs.y), obs.branch.value) for i, obs in enumerate(h.observations)])
            written.append(path)
            path = out_dir / f'update_{method}_trial_{h.trial:02d}.csv'
            write_csv(path, ('index', 'best_y'), [(i, repr(y)) for i, y in harness.update_record(h)])
            written.append(path)

        best = min(histories, key=lambda h: h.best.y)
        path = out_dir / f'best_{method}.json'
        write_json(path, {'trial': best.trial, **layout(str(best.best.x), cfg)})
        written.append(path)

        if len({len(h) for h in histories}) == 1:
            path = out_dir / f'aggregate_{method}.csv'
            write_csv(path, ('index', 'mean', 'min', 'max'),
                      [(i, repr(mean), repr(lo), repr(hi)) for i, mean, lo, hi in harness.aggregate_trials(histories)])
            written.append(path)
        else:
            # an interrupted trial; aggregate once it has been resumed
            logging.warning(f'{method} trials in {run_dir} differ in length, skipping the aggregate')

        if table is not None:
            summary_rows.extend((method, row.object, repr(row.value_db), row.rank)
                                for row in harness.summarize_final(histories, table))

    if table is not None:
        path = out_dir / 'summary.csv'
        write_csv(path, ('method', 'object', 'value_db', 'rank'), summary_rows)
        written.append(path)
    return written
