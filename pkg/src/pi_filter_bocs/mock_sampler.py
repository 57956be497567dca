# A stand-in sampler service speaking the same JSON protocol as the remote client, backed by the local solvers.
#
# backends:
#   exhaustive - the exact optimum only
#   spectrum   - the num_reads lowest states of the full spectrum (n <= 20)
#   sa         - simulated annealing with num_reads reads
# faults (for exercising the client's contract checks):
#   corrupt_energy - the first sample reports a wrong energy
#   unsorted       - samples are returned in descending energy order
#   fail_first     - the first k requests get HTTP 503
from typing import List, Optional, Tuple

import numpy as np
import uvicorn
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import solvers
from .surrogate import QuboInstance, SurrogateError

BACKENDS = ('exhaustive', 'spectrum', 'sa')
FAULTS = ('corrupt_energy', 'unsorted')


class SampleRequest(BaseModel):
    model_config = ConfigDict(extra='forbid')

    n: int = Field(ge=1)
    linear: List[float]
    quadratic: List[Tuple[int, int, float]]
    num_reads: int = Field(ge=1)


class Sample(BaseModel):
    x: str
    energy: float
    occurrences: int = 1


class SampleResponse(BaseModel):
    samples: List[Sample]


def create_app(backend: str = 'exhaustive', fault: Optional[str] = None, fail_first: int = 0,
               sweeps: int = 100, seed: int = 0) -> FastAPI:
    if backend not in BACKENDS:
        raise ValueError(f'unknown backend {backend!r}; expected one of {BACKENDS}')
    if fault is not None and fault not in FAULTS:
        raise ValueError(f'unknown fault {fault!r}; expected one of {FAULTS}')

    app = FastAPI(title='pi-filter-bocs mock sampler')
    app.state.requests = []  # every accepted payload, as received
    app.state.calls = 0
    rng = np.random.default_rng(seed)

    @app.post('/sample', response_model=SampleResponse)
    def sample(request: SampleRequest) -> SampleResponse:
        app.state.calls += 1
        if app.state.calls <= fail_first:
            raise HTTPException(status_code=503, detail='sampler busy')

        payload = request.model_dump()
        app.state.requests.append(payload)
        try:
            q = QuboInstance.from_wire(payload)
        except (SurrogateError, ValueError) as e:
            raise HTTPException(status_code=400, detail=str(e))

        try:
            if backend == 'exhaustive':
                records = list(solvers.solve_exhaustive(q).records)
            elif backend == 'spectrum':
                records = list(solvers.solve_exhaustive(q, spectrum=True).records[:request.num_reads])
            else:
                params = solvers.SaParams(num_reads=request.num_reads, sweeps=sweeps)
                records = list(solvers.solve_sa(q, params, rng).records)
        except solvers.SolverError as e:
            raise HTTPException(status_code=400, detail=str(e))

        samples = [Sample(x=r.bits, energy=r.energy, occurrences=r.occurrences) for r in records]
        if fault == 'corrupt_energy':
            samples[0] = Sample(x=samples[0].x, energy=samples[0].energy + 1.0, occurrences=samples[0].occurrences)
        elif fault == 'unsorted':
            samples.reverse()
        return SampleResponse(samples=samples)

    @app.get('/health')
    def health():
        return {'status': 'ok', 'backend': backend}

    return app


def serve(host: str = '127.0.0.1', port: int = 8765, **kwargs):
    uvicorn.run(create_app(**kwargs), host=host, port=port, log_level='warning')
