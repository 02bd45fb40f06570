"""Multivariate-normal beliefs over alternative values.

Two representations are kept side by side:

* ``BeliefState`` -- the full belief ``N(mu, Sigma)`` over ``M`` alternatives.
* ``AttributeBelief`` -- a belief ``N(theta, C)`` over ``L`` model weights. Together
  with a feature matrix ``X`` it induces ``N(X theta, X C X^T)`` on the alternatives
  while storing only ``L + L^2`` numbers.

All objects are immutable; updates return new instances.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericalDegeneracyError

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-9


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _symmetrize(a):
    return 0.5 * (a + a.T)


def _check_psd(a, what):
    """Raise if the smallest eigenvalue of symmetric ``a`` is below ``-PSD_RTOL * trace``."""
    if a.size == 0:
        return
    if not np.all(np.isfinite(a)):
        raise NumericalDegeneracyError(f"{what} has non-finite entries")
    tr = float(np.trace(a))
    lo = float(np.linalg.eigvalsh(a)[0])
    if lo < -PSD_RTOL * max(abs(tr), np.finfo(float).tiny):
        raise NumericalDegeneracyError(
            f"{what} is not positive semi-definite (min eigenvalue {lo:.3e}, trace {tr:.3e})"
        )


def _check_symmetric(a, what):
    tol = SYMMETRY_RTOL * np.maximum(1.0, np.abs(a))
    if np.any(np.abs(a - a.T) > tol):
        raise NumericalDegeneracyError(f"{what} is not symmetric")


@dataclass(frozen=True)
class BeliefState:
    """Full belief over ``M`` alternatives.

    ``lam`` holds the known measurement-noise variance of each alternative.
    """

    mu: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        mu = _frozen(self.mu)
        sigma = _frozen(self.sigma)
        lam = _frozen(np.broadcast_to(np.asarray(self.lam, dtype=float), mu.shape))
        if mu.ndim != 1 or mu.size < 1:
            raise DimensionError("mu must be a non-empty vector")
        m = mu.size
        if sigma.shape != (m, m):
            raise DimensionError(f"sigma must be {m}x{m}, got {sigma.shape}")
        if np.any(lam <= 0):
            raise ValueError("measurement noise variances must be positive")
        _check_symmetric(sigma, "sigma")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "lam", lam)

    @property
    def size(self):
        return self.mu.size

    def check(self):
        """Verify the PSD invariant (an eigendecomposition, so not done on construction)."""
        _check_psd(self.sigma, "sigma")
        return self

    def subset(self, idx):
        """Marginal belief over the alternatives in ``idx``."""
        idx = np.asarray(idx, dtype=int)
        return BeliefState(self.mu[idx], self.sigma[np.ix_(idx, idx)], self.lam[idx])


@dataclass(frozen=True)
class AttributeBelief:
    """Belief over linear-model weights; ``theta[0]`` is the intercept."""

    theta: np.ndarray
    c_matrix: np.ndarray

    def __post_init__(self):
        theta = _frozen(self.theta)
        c = _frozen(self.c_matrix)
        if theta.ndim != 1 or theta.size < 1:
            raise DimensionError("theta must be a non-empty vector")
        if c.shape != (theta.size, theta.size):
            raise DimensionError(f"c_matrix must be {theta.size}x{theta.size}, got {c.shape}")
        _check_symmetric(c, "c_matrix")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "c_matrix", c)

    @property
    def size(self):
        return self.theta.size

    def check(self):
        _check_psd(self.c_matrix, "c_matrix")
        return self

    @classmethod
    def diagonal_prior(cls, n_weights, variance=1.0, mean=0.0):
        """Independent prior on every weight, the usual starting point."""
        return cls(np.full(n_weights, float(mean)), float(variance) * np.eye(n_weights))


@dataclass(frozen=True)
class BasisSpec:
    """Monomial exponents applied to raw features (intercept excluded)."""

    degrees: tuple = (1, 2, 3, 4, 5, 6)

    def __post_init__(self):
        degrees = tuple(int(d) for d in self.degrees)
        if any(d < 1 for d in degrees):
            raise ValueError("basis degrees must all be >= 1")
        object.__setattr__(self, "degrees", degrees)

    @classmethod
    def linear(cls, n_features):
        return cls((1,) * n_features)

    @property
    def n_weights(self):
        return len(self.degrees) + 1


def apply_basis(basis, raw):
    """Map raw features to ``[1, raw_0**d_0, raw_1**d_1, ...]``.

    ``raw`` may be a single feature vector or a 2-D array with one row per alternative.
    """
    raw = np.asarray(raw, dtype=float)
    deg = np.asarray(basis.degrees, dtype=float)
    if raw.shape[-1] != deg.size:
        raise DimensionError(f"expected {deg.size} raw features, got {raw.shape[-1]}")
    powered = raw ** deg
    ones = np.ones(raw.shape[:-1] + (1,))
    return np.concatenate([ones, powered], axis=-1)


@dataclass(frozen=True)
class FeatureMatrix:
    """Design matrix with one row per alternative and an intercept column first."""

    x: np.ndarray
    basis: BasisSpec = field(default=None)

    def __post_init__(self):
        x = _frozen(self.x)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DimensionError("feature matrix must be 2-D with at least one row and column")
        if not np.all(x[:, 0] == 1.0):
            raise DimensionError("column 0 of the feature matrix must be all ones")
        object.__setattr__(self, "x", x)

    @classmethod
    def from_raw(cls, raw, basis):
        return cls(apply_basis(basis, np.atleast_2d(raw)), basis)

    @property
    def n_alternatives(self):
        return self.x.shape[0]

    @property
    def n_weights(self):
        return self.x.shape[1]

    def subset(self, idx):
        return FeatureMatrix(self.x[np.asarray(idx, dtype=int)], self.basis)


def prior_from_attributes(theta0, features, lam=1.0):
    """Project a weight belief onto the alternatives: ``N(X theta, X C X^T)``."""
    x = features.x
    if x.shape[1] != theta0.size:
        raise DimensionError(f"features have {x.shape[1]} columns, belief has {theta0.size} weights")
    mu = x @ theta0.theta
    sigma = _symmetrize(x @ theta0.c_matrix @ x.T)
    return BeliefState(mu, sigma, np.broadcast_to(lam, mu.shape))


def _check_index(x, m):
    if not 0 <= int(x) < m:
        raise IndexError(f"alternative {x} out of range for {m} alternatives")
    return int(x)


def update_full(b, x, y):
    """Condition the full belief on observing ``y`` at alternative ``x``."""
    x = _check_index(x, b.size)
    col = b.sigma[:, x]
    denom = b.lam[x] + b.sigma[x, x]
    if not denom > 0:
        raise NumericalDegeneracyError(f"lambda + Sigma_xx = {denom} is not positive")
    mu = b.mu + ((y - b.mu[x]) / denom) * col
    sigma = _symmetrize(b.sigma - np.outer(col, col) / denom)
    _check_psd(sigma, "posterior sigma")
    return BeliefState(mu, sigma, b.lam)


def sigma_tilde_full(b, x):
    """Change in the mean vector per unit standardized observation at ``x``."""
    x = _check_index(x, b.size)
    denom = b.lam[x] + b.sigma[x, x]
    if not denom > 0:
        raise NumericalDegeneracyError(f"lambda + Sigma_xx = {denom} is not positive")
    return b.sigma[:, x] / np.sqrt(denom)


def update_attribute(ab, xrow, y, lambda_x):
    """Recursive least-squares style update of the weight belief.

    ``xrow`` is the (basis-expanded) feature row of the measured alternative.
    """
    xrow = np.asarray(xrow, dtype=float)
    if xrow.shape != (ab.size,):
        raise DimensionError(f"feature row must have length {ab.size}, got {xrow.shape}")
    cx = ab.c_matrix @ xrow
    gamma = lambda_x + xrow @ cx
    if not gamma > 0:
        raise NumericalDegeneracyError(f"gamma = {gamma} is not positive")
    resid = y - ab.theta @ xrow
    theta = ab.theta + (resid / gamma) * cx
    c = _symmetrize(ab.c_matrix - np.outer(cx, cx) / gamma)
    _check_psd(c, "posterior C")
    return AttributeBelief(theta, c)


def sigma_tilde_attribute(ab, features, x, lambda_x, xc=None):
    """``sigma_tilde`` for alternative ``x`` from one covariance column ``X C X[x]^T``.

    ``xc`` is an optional precomputed ``X @ C`` (``M x L``) shared across alternatives.
    """
    x = _check_index(x, features.n_alternatives)
    if features.n_weights != ab.size:
        raise DimensionError(f"features have {features.n_weights} columns, belief has {ab.size} weights")
    if xc is None:
        xc = features.x @ ab.c_matrix
    col = xc @ features.x[x]
    denom = lambda_x + col[x]
    if not denom > 0:
        raise NumericalDegeneracyError(f"lambda + Sigma_xx = {denom} is not positive")
    return col / np.sqrt(denom)
