# Persistence of run histories: an append-only line-delimited JSON log per trial (one evaluation per line,
# flushed after every write so an interrupted trial can be resumed) and plain CSV series for reports.
import csv
import dataclasses
import json
import logging
import pathlib
from typing import Dict, Iterable, List, Optional, Sequence, Union

from .encoding import DesignVector
from .objective import Branch, Observation

PathLike = Union[str, pathlib.Path]

LOG_FIELDS = ('seq', 'bits', 'branch', 'z', 'y', 'solver_energy', 'duplicate', 'ms')


class RunLogError(ValueError):
    pass


# One evaluated design plus what the loop knew when it was acquired.
@dataclasses.dataclass(frozen=True)
class HistoryRecord:
    observation: Observation
    solver_energy: Optional[float] = None  # None for initial and random-search designs
    duplicate: bool = False
    ms: float = 0.0  # wall time of the step

    def to_dict(self, timing: bool = True) -> Dict:
        obs = self.observation
        d = {
            'seq': obs.seq,
            'bits': str(obs.x),
            'branch': obs.branch.value,
            'z': obs.z,
            'y': obs.y,
            'solver_energy': self.solver_energy,
            'duplicate': self.duplicate,
        }
        if timing:
            d['ms'] = self.ms
        return d

    @classmethod
    def from_dict(cls, d: Dict) -> 'HistoryRecord':
        missing = set(LOG_FIELDS) - set(d) - {'ms'}
        if missing:
            raise RunLogError(f'run log entry is missing {sorted(missing)}: {d}')
        obs = Observation(
            x=DesignVector.from_string(d['bits']),
            y=float(d['y']),
            branch=Branch(d['branch']),
            z=int(d['z']),
            seq=int(d['seq']),
        )
        energy = d['solver_energy']
        return cls(obs, None if energy is None else float(energy), bool(d['duplicate']), float(d.get('ms', 0.0)))


class RunLog:
    def __init__(self, path: PathLike):
        self.path = pathlib.Path(path)

    def reset(self, records: Sequence[HistoryRecord] = ()):
        # rewrite the log with exactly these records
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, 'w') as f:
            for record in records:
                f.write(json.dumps(record.to_dict()) + '\n')

    def append(self, record: HistoryRecord):
        with open(self.path, 'a') as f:
            f.write(json.dumps(record.to_dict()) + '\n')
            f.flush()

    def read(self) -> List[HistoryRecord]:
        if not self.path.exists():
            return []
        lines = self.path.read_text().splitlines()
        records = []
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                records.append(HistoryRecord.from_dict(json.loads(line)))
            except json.JSONDecodeError as e:
                if i == len(lines) - 1:
                    # interrupted mid-write; the evaluation is simply redone
                    logging.warning(f'{self.path}: dropping truncated last line')
                    break
                raise RunLogError(f'{self.path}:{i + 1}: malformed run log line') from e
        for expected, record in enumerate(records):
            if record.observation.seq != expected:
                raise RunLogError(f'{self.path}: expected seq {expected}, found {record.observation.seq}')
        return records


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


def write_json(path: PathLike, payload: Dict):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2)
        f.write('\n')
