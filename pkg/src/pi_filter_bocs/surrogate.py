# Bayesian quadratic regression over binary inputs, Thompson sampling from its posterior,
# and conversion of a sampled coefficient vector into a QUBO for the solvers.
#
# Features of an n-bit x: [1, x_1..x_n, x_i*x_j for i<j in lexicographic order],
# so there are d = 1 + n + n(n-1)/2 coefficients (254 for n = 22).
# Prior: coefficients ~ N(0, prior_var I); likelihood: y ~ N(features(x) . coef, noise_var).
# The regression runs on y centered by its sample mean (and divided by its standard deviation when scale_y is set);
# the stored mean and every Thompson draw are mapped back, so predictions and QUBO energies are in y units.
import dataclasses
import math
from typing import Dict, List, Optional, Sequence, Union

import dimod
import numpy as np
from scipy import linalg

from .encoding import DesignVector, N_BITS
from .objective import Observation


class SurrogateError(RuntimeError):
    pass


def feature_count(n: int) -> int:
    return 1 + n + n * (n - 1) // 2


def variable_count(d: int) -> int:
    # inverse of feature_count
    if d < 1:
        raise SurrogateError(f'{d} is not a quadratic feature count')
    n = (math.isqrt(8 * d - 7) - 1) // 2
    if feature_count(n) != d:
        raise SurrogateError(f'{d} is not a quadratic feature count')
    return n


def features_batch(xs: np.ndarray) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    iu, ju = np.triu_indices(xs.shape[1], k=1)
    return np.hstack([np.ones((xs.shape[0], 1)), xs, xs[:, iu] * xs[:, ju]])


def features(x: Union[DesignVector, Sequence[int], np.ndarray]) -> np.ndarray:
    bits = x.to_array() if isinstance(x, DesignVector) else np.asarray(x)
    return features_batch(bits[None, :])[0]


@dataclasses.dataclass(frozen=True, eq=False)
class QuadraticSurrogate:
    n: int = N_BITS
    prior_var: float = 1.0
    noise_var: float = 1.0
    scale_y: bool = False
    mean: Optional[np.ndarray] = None  # posterior mean in y units, shape (d,)
    precision_chol: Optional[np.ndarray] = None  # lower Cholesky factor of the posterior precision of the fit, (d, d)
    n_observations: int = 0
    y_shift: float = 0.0
    y_scale: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.prior_var <= 0 or self.noise_var <= 0 or self.y_scale <= 0:
            raise SurrogateError(f'invalid surrogate hyperparameters n={self.n}, '
                                 f'prior_var={self.prior_var}, noise_var={self.noise_var}')
        d = self.n_features
        if self.mean is None:
            object.__setattr__(self, 'mean', np.zeros(d))
        if self.precision_chol is None:
            object.__setattr__(self, 'precision_chol', np.eye(d) / math.sqrt(self.prior_var))
        if self.mean.shape != (d,) or self.precision_chol.shape != (d, d):
            raise SurrogateError(f'posterior shapes do not match {d} features')

    @property
    def n_features(self) -> int:
        return feature_count(self.n)

    def prior(self) -> 'QuadraticSurrogate':
        return QuadraticSurrogate(n=self.n, prior_var=self.prior_var, noise_var=self.noise_var, scale_y=self.scale_y)

    def marginal_variances(self) -> np.ndarray:
        inv_chol = linalg.solve_triangular(self.precision_chol, np.eye(self.n_features), lower=True)
        return self.y_scale ** 2 * np.sum(inv_chol ** 2, axis=0)

    def predict_mean(self, xs: np.ndarray) -> np.ndarray:
        return features_batch(xs) @ self.mean


def fit_arrays(xs: np.ndarray, ys: np.ndarray, s: QuadraticSurrogate) -> QuadraticSurrogate:
    xs = np.asarray(xs, dtype=float).reshape(-1, s.n)
    ys = np.asarray(ys, dtype=float).reshape(-1)
    if len(xs) == 0:
        return s.prior()

    shift = float(ys.mean())
    spread = float(ys.std())
    scale = spread if s.scale_y and spread > 0 else 1.0
    targets = (ys - shift) / scale

    phi = features_batch(xs)
    precision = np.eye(s.n_features) / s.prior_var + phi.T @ phi / s.noise_var
    try:
        chol = linalg.cholesky(precision, lower=True)
    except linalg.LinAlgError as e:
        raise SurrogateError('posterior precision is not positive definite') from e
    mean = scale * linalg.cho_solve((chol, True), phi.T @ targets / s.noise_var)
    mean[0] += shift
    return QuadraticSurrogate(n=s.n, prior_var=s.prior_var, noise_var=s.noise_var, scale_y=s.scale_y,
                              mean=mean, precision_chol=chol, n_observations=len(xs), y_shift=shift, y_scale=scale)


# Conjugate Gaussian update from all observations so far (refit from the prior, not incremental).
def fit_posterior(data: Sequence[Observation], s: QuadraticSurrogate) -> QuadraticSurrogate:
    if len(data) == 0:
        return s.prior()
    xs = np.array([obs.x.bits for obs in data], dtype=float)
    ys = np.array([obs.y for obs in data], dtype=float)
    return fit_arrays(xs, ys, s)


def thompson_sample(s: QuadraticSurrogate, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    # coef = mean + scale L^-T g has covariance scale^2 (L L^T)^-1 = posterior covariance in y units
    g = rng.standard_normal(s.n_features if size is None else (size, s.n_features))
    delta = linalg.solve_triangular(s.precision_chol, g.T, lower=True, trans='T')
    return s.mean + s.y_scale * delta.T


@dataclasses.dataclass(frozen=True, eq=False)
class QuboInstance:
    n: int
    linear: np.ndarray  # (n,)
    quadratic: np.ndarray  # (n, n), strictly upper triangular
    offset: float = 0.0

    def __post_init__(self):
        linear = np.asarray(self.linear, dtype=float)
        quadratic = np.asarray(self.quadratic, dtype=float)
        if linear.shape != (self.n,) or quadratic.shape != (self.n, self.n):
            raise SurrogateError(f'QUBO weights do not match n={self.n}')
        if np.any(np.tril(quadratic) != 0):
            raise SurrogateError('QUBO quadratic weights must be strictly upper triangular')
        if not (np.all(np.isfinite(linear)) and np.all(np.isfinite(quadratic)) and math.isfinite(self.offset)):
            raise SurrogateError('QUBO weights must be finite')
        object.__setattr__(self, 'linear', linear)
        object.__setattr__(self, 'quadratic', quadratic)
        object.__setattr__(self, 'offset', float(self.offset))

    @classmethod
    def zeros(cls, n: int) -> 'QuboInstance':
        return cls(n, np.zeros(n), np.zeros((n, n)))

    @property
    def symmetric(self) -> np.ndarray:
        # q_ij on both sides of the diagonal; the local field of x_i is linear_i + symmetric[i] . x
        return self.quadratic + self.quadratic.T

    def energy(self, xs: np.ndarray) -> Union[float, np.ndarray]:
        xs = np.asarray(xs, dtype=float)
        single = xs.ndim == 1
        xs = np.atleast_2d(xs)
        e = self.offset + xs @ self.linear + np.einsum('ki,ij,kj->k', xs, self.quadratic, xs)
        return float(e[0]) if single else e

    def shifted(self, delta: float) -> 'QuboInstance':
        return QuboInstance(self.n, self.linear, self.quadratic, self.offset + delta)

    @property
    def labels(self) -> List[int]:
        return list(range(self.n))

    def to_bqm(self) -> dimod.BinaryQuadraticModel:
        iu, ju = np.nonzero(self.quadratic)
        return dimod.BinaryQuadraticModel(
            {i: float(v) for i, v in enumerate(self.linear)},
            {(int(i), int(j)): float(self.quadratic[i, j]) for i, j in zip(iu, ju)},
            self.offset, dimod.BINARY)

    # Sampler protocol request: {"n", "linear", "quadratic": [[i, j, q_ij]], "num_reads"}.
    # The offset is not sent; sampler energies are offset-free.
    def to_wire(self, num_reads: int) -> Dict:
        iu, ju = np.nonzero(self.quadratic)
        return {
            'n': int(self.n),
            'linear': [float(v) for v in self.linear],
            'quadratic': [[int(i), int(j), float(self.quadratic[i, j])] for i, j in zip(iu, ju)],
            'num_reads': int(num_reads),
        }

    @classmethod
    def from_wire(cls, payload: Dict) -> 'QuboInstance':
        n = int(payload['n'])
        quadratic = np.zeros((n, n))
        for i, j, q in payload['quadratic']:
            i, j = int(i), int(j)
            if not 0 <= i < j < n:
                raise SurrogateError(f'quadratic term ({i}, {j}) is not strictly upper triangular for n={n}')
            quadratic[i, j] += float(q)
        return cls(n, np.array(payload['linear'], dtype=float), quadratic)


def to_qubo(coef: np.ndarray) -> QuboInstance:
    coef = np.asarray(coef, dtype=float)
    n = variable_count(len(coef))
    iu, ju = np.triu_indices(n, k=1)
    quadratic = np.zeros((n, n))
    quadratic[iu, ju] = coef[1 + n:]
    return QuboInstance(n=n, linear=coef[1:1 + n].copy(), quadratic=quadratic, offset=float(coef[0]))
