# The black-box function the optimizer queries.
# One-hot violations of the element bits are scored with a penalty (y_base + lambda * z) without building a layout;
# everything else is decoded (with dummy conductors for disconnected segments) and scored by the circuit model.
# Smaller y is better throughout.
import dataclasses
from enum import Enum
from typing import Iterable, List

from . import circuit_eval
from . import encoding
from .encoding import DesignVector


class Branch(Enum):
    S21 = 's21'
    PENALTY = 'penalty'


@dataclasses.dataclass(frozen=True)
class PenaltyParams:
    y_base: float = -60.0
    lam: float = 10.0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f'penalty coefficient must be positive, got {self.lam}')


@dataclasses.dataclass(frozen=True)
class Observation:
    x: DesignVector
    y: float
    branch: Branch
    z: int
    seq: int = 0  # assigned by the caller

    def __post_init__(self):
        if (self.branch == Branch.PENALTY) != (self.z > 0):
            raise ValueError(f'branch {self.branch.value} is inconsistent with z={self.z}')


# Everything the evaluator needs, bundled so it can be shipped to worker processes.
@dataclasses.dataclass(frozen=True)
class FilterProblem:
    grid: encoding.GridSpec = encoding.GridSpec()
    slots: encoding.ElementSlots = encoding.ElementSlots()
    material: circuit_eval.MaterialParams = circuit_eval.MaterialParams()
    circuit: circuit_eval.CircuitParams = circuit_eval.CircuitParams()
    penalty: PenaltyParams = PenaltyParams()

    def __post_init__(self):
        self.slots.check_grid(self.grid)


def penalty(z: int, p: PenaltyParams) -> float:
    if z < 0:
        raise ValueError(f'violation count must be nonnegative, got {z}')
    return p.y_base + p.lam * z


def evaluate(x: DesignVector, problem: FilterProblem = FilterProblem(), seq: int = 0) -> Observation:
    z = encoding.one_hot_violation(x)
    if z != 0:
        return Observation(x=x, y=penalty(z, problem.penalty), branch=Branch.PENALTY, z=z, seq=seq)

    outcome = encoding.decode(x, problem.grid, problem.slots)
    y = circuit_eval.evaluate_s21(outcome.geometry, problem.grid, problem.material, problem.circuit)
    return Observation(x=x, y=y, branch=Branch.S21, z=0, seq=seq)


def evaluate_many(xs: Iterable[DesignVector], problem: FilterProblem = FilterProblem(), start_seq: int = 0) -> List[Observation]:
    return [evaluate(x, problem, seq=start_seq + i) for i, x in enumerate(xs)]
