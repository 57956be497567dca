# Run configuration: one JSON document with a section per model component.
# Unknown keys are rejected everywhere; defaults reproduce the reference experiment
# (20 initial designs, 300 acquisitions, 10 trials, 3000 reads, 10 MHz, y_base = -60, lambda = 10).
import json
import pathlib
from typing import Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import circuit_eval, encoding, objective, solvers
from .remote import RemoteSettings
from .surrogate import QuadraticSurrogate

CellPair = Tuple[Tuple[int, int], Tuple[int, int]]


class ConfigError(ValueError):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True, frozen=True)


class GridSection(_Section):
    nx: int = Field(10, ge=2)
    ny: int = Field(15, ge=2)
    board_w: float = Field(150.0, gt=0)
    board_h: float = Field(100.0, gt=0)
    substrate_h: float = Field(1.6, gt=0)


class SlotsSection(_Section):
    input_port: CellPair = ((1, 4), (1, 12))
    cap1: CellPair = ((3, 4), (3, 12))
    inductor: CellPair = ((6, 4), (6, 12))
    cap2: CellPair = ((8, 4), (8, 12))
    output_port: CellPair = ((10, 4), (10, 12))


class MaterialSection(_Section):
    eps_r: float = Field(4.5, ge=1)
    mu_r: float = Field(1.0, ge=1)
    substrate_sigma: float = Field(1.0e-8, ge=0)


class CircuitSection(_Section):
    z0: float = Field(50.0, gt=0)
    c_shunt: float = Field(100e-9, gt=0)
    l_series: float = Field(10e-6, gt=0)
    freq: float = Field(10e6, gt=0)
    kappa_c: float = Field(1.0, ge=0)


class PenaltySection(_Section):
    y_base: float = -60.0
    lam: float = Field(10.0, gt=0, alias='lambda')


class SurrogateSection(_Section):
    prior_var: float = Field(1.0, gt=0)
    noise_var: float = Field(1.0, gt=0)
    scale_y: bool = False


class SaSection(_Section):
    num_reads: int = Field(3000, ge=1)
    sweeps: int = Field(100, ge=1)
    beta_hot: Optional[float] = Field(None, gt=0)
    beta_cold: Optional[float] = Field(None, gt=0)

    @model_validator(mode='after')
    def _check_schedule(self):
        if (self.beta_hot is None) != (self.beta_cold is None):
            raise ValueError('set both beta_hot and beta_cold, or neither')
        if self.beta_hot is not None and self.beta_hot >= self.beta_cold:
            raise ValueError('beta_hot must be below beta_cold')
        return self


class RemoteSection(_Section):
    endpoint: Optional[str] = None
    timeout: float = Field(30.0, gt=0)
    retries: int = Field(3, ge=0)
    backoff_factor: float = Field(0.5, ge=0)
    energy_tol: float = Field(1e-6, gt=0)


class RunConfig(_Section):
    n_initial: int = Field(20, ge=1)
    n_iterations: int = Field(300, ge=0)
    n_trials: int = Field(10, ge=1)
    solver: Literal['sa', 'exhaustive', 'remote'] = 'sa'
    seed: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)

    grid: GridSection = GridSection()
    slots: SlotsSection = SlotsSection()
    material: MaterialSection = MaterialSection()
    circuit: CircuitSection = CircuitSection()
    penalty: PenaltySection = PenaltySection()
    surrogate: SurrogateSection = SurrogateSection()
    sa: SaSection = SaSection()
    remote: RemoteSection = RemoteSection()

    @model_validator(mode='after')
    def _check_consistency(self):
        if self.solver == 'remote' and not self.remote.endpoint:
            raise ValueError('solver "remote" needs remote.endpoint')
        # candidate cells must lie on the grid
        self.problem()
        return self

    def problem(self) -> objective.FilterProblem:
        return objective.FilterProblem(
            grid=encoding.GridSpec(**self.grid.model_dump()),
            slots=encoding.ElementSlots(**self.slots.model_dump()),
            material=circuit_eval.MaterialParams(**self.material.model_dump()),
            circuit=circuit_eval.CircuitParams(**self.circuit.model_dump()),
            penalty=objective.PenaltyParams(y_base=self.penalty.y_base, lam=self.penalty.lam),
        )

    def sa_params(self) -> solvers.SaParams:
        return solvers.SaParams(**self.sa.model_dump())

    def remote_settings(self) -> RemoteSettings:
        return RemoteSettings(**self.remote.model_dump())

    def surrogate_prior(self) -> QuadraticSurrogate:
        return QuadraticSurrogate(n=encoding.N_BITS, **self.surrogate.model_dump())

    def with_overrides(self, **overrides) -> 'RunConfig':
        # top-level fields plus 'endpoint' for remote.endpoint; None values are ignored
        data = self.to_dict()
        endpoint = overrides.pop('endpoint', None)
        if endpoint is not None:
            data['remote']['endpoint'] = endpoint
        data.update({k: v for k, v in overrides.items() if v is not None})
        return parse_config(data)

    def to_dict(self) -> dict:
        return self.model_dump(mode='json', by_alias=True)


def parse_config(data: dict, source: str = '<dict>') -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f'invalid configuration in {source}:\n{e}') from e


def load_config(path: Union[str, pathlib.Path]) -> RunConfig:
    path = pathlib.Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f'cannot read configuration {path}: {e}') from e
    except json.JSONDecodeError as e:
        raise ConfigError(f'{path} is not valid JSON: {e}') from e
    return parse_config(data, str(path))


def save_config(cfg: RunConfig, path: Union[str, pathlib.Path]):
    pathlib.Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + '\n')
