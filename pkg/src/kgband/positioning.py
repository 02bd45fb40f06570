"""RSS ranging, multilateration and Kalman smoothing in the plane."""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    InsufficientAnchorsError,
    NumericalDegeneracyError,
    RankDeficiencyError,
)

MAX_CONDITION = 1e12
MIN_ANCHORS = 4


class Position2D(NamedTuple):
    x: float
    y: float


def free_space_pl0(fc, d):
    """Free-space loss in dB at distance ``d`` (m) for carrier ``fc`` (MHz)."""
    if not (fc > 0 and d > 0):
        raise DomainError(f"free-space loss needs fc > 0 and d > 0 (got fc={fc}, d={d})")
    return 20.0 * math.log10(d) + 20.0 * math.log10(fc) - 27.55


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance model ``PL = PL0 + 10 n log10(d / d0) + X_G``."""

    d0: float
    n_pl: float
    fc: float
    shadow_sigma: float = 0.0
    pl0: float = None

    def __post_init__(self):
        if not self.d0 > 0:
            raise DomainError("reference distance d0 must be positive")
        if not 0 < self.n_pl <= 10:
            raise DomainError("path-loss exponent must lie in (0, 10]")
        if not self.fc > 0:
            raise DomainError("carrier frequency must be positive")
        if self.shadow_sigma < 0:
            raise DomainError("shadowing std must be non-negative")
        if self.pl0 is None:
            object.__setattr__(self, "pl0", free_space_pl0(self.fc, self.d0))


def pl_from_distance(model, d, shadow=0.0):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    pl = model.pl0 + 10.0 * model.n_pl * np.log10(d / model.d0) + shadow
    return float(pl) if pl.ndim == 0 else pl


def distance_from_pl(model, pl):
    d = model.d0 * 10.0 ** ((np.asarray(pl, dtype=float) - model.pl0) / (10.0 * model.n_pl))
    return float(d) if d.ndim == 0 else d


def _as_points(pts, what):
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DimensionError(f"{what} must be an (n, 2) array of positions")
    return pts


def build_linear_system(tx, d):
    """Subtract the first range equation from the others to get ``A p = b``."""
    tx = _as_points(tx, "transmitters")
    d = np.asarray(d, dtype=float)
    if tx.shape[0] < MIN_ANCHORS:
        raise InsufficientAnchorsError(f"need at least {MIN_ANCHORS} transmitters, got {tx.shape[0]}")
    if d.shape != (tx.shape[0],):
        raise DimensionError("one distance per transmitter is required")
    x1, y1 = tx[0]
    xs, ys = tx[1:, 0], tx[1:, 1]
    a = 2.0 * np.column_stack([x1 - xs, y1 - ys])
    b = x1**2 - xs**2 + y1**2 - ys**2 + d[1:] ** 2 - d[0] ** 2
    return a, b


def lsq_solve(a, b):
    """Least-squares solution of ``A p = b`` (SVD based)."""
    sol, _, rank, sv = np.linalg.lstsq(a, b, rcond=None)
    if rank < a.shape[1] or sv[-1] == 0 or sv[0] / sv[-1] > math.sqrt(MAX_CONDITION):
        # sv ratio squared is cond(A^T A)
        raise RankDeficiencyError("multilateration system is rank deficient (collinear or duplicate anchors?)")
    return Position2D(float(sol[0]), float(sol[1]))


def multilaterate(tx, d):
    return lsq_solve(*build_linear_system(tx, d))


def gauss_newton_tx(receiver_track, d, max_iter=100, tol=1e-9):
    """Locate one transmitter from ranges taken at known receiver positions.

    Minimizes ``sum_k (|p_k - q| - d_k)^2`` starting from the track centroid.
    Returns ``(position, iterations)``.
    """
    track = _as_points(receiver_track, "receiver track")
    d = np.asarray(d, dtype=float)
    if track.shape[0] < 3:
        raise InsufficientAnchorsError("need at least three receiver positions")
    if d.shape != (track.shape[0],):
        raise DimensionError("one distance per receiver position is required")
    if np.linalg.matrix_rank(track - track.mean(axis=0)) < 2:
        raise RankDeficiencyError("receiver positions are collinear")

    q = track.mean(axis=0)
    for it in range(1, max_iter + 1):
        diff = q - track
        rng = np.hypot(diff[:, 0], diff[:, 1])
        rng = np.maximum(rng, 1e-12)
        resid = rng - d
        jac = diff / rng[:, None]
        step = np.linalg.lstsq(jac, -resid, rcond=None)[0]
        q = q + step
        if np.linalg.norm(step) < tol:
            return Position2D(float(q[0]), float(q[1])), it
    raise ConvergenceError(f"Gauss-Newton did not converge in {max_iter} iterations")


def estimate_tx_positions(receiver_track, d_per_epoch):
    return gauss_newton_tx(receiver_track, d_per_epoch)[0]


@dataclass(frozen=True)
class EkfState:
    state: np.ndarray
    p_matrix: np.ndarray

    def __post_init__(self):
        s = np.array(self.state, dtype=float)
        p = np.array(self.p_matrix, dtype=float)
        if s.ndim != 1 or p.shape != (s.size, s.size):
            raise DimensionError("covariance must be square and match the state length")
        s.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "state", s)
        object.__setattr__(self, "p_matrix", p)

    @property
    def position(self):
        return Position2D(float(self.state[0]), float(self.state[1]))


@dataclass(frozen=True)
class EkfConfig:
    dt: float
    f_matrix: np.ndarray
    h_matrix: np.ndarray
    q_matrix: np.ndarray
    r_matrix: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        for name in ("f_matrix", "h_matrix", "q_matrix", "r_matrix"):
            a = np.array(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        n = self.f_matrix.shape[0]
        m = self.h_matrix.shape[0]
        if self.f_matrix.shape != (n, n) or self.q_matrix.shape != (n, n):
            raise DimensionError("F and Q must be square with the state dimension")
        if self.h_matrix.shape != (m, n) or self.r_matrix.shape != (m, m):
            raise DimensionError("H must be m x n and R m x m")

    @classmethod
    def constant_velocity(cls, dt=1.0, sigma_a=0.5, r=4.0):
        """Planar constant-velocity model with white-acceleration process noise."""
        f = np.eye(4)
        f[0, 2] = f[1, 3] = dt
        h = np.zeros((2, 4))
        h[0, 0] = h[1, 1] = 1.0
        g = np.array([[dt**4 / 4, dt**3 / 2], [dt**3 / 2, dt**2]])
        q = np.zeros((4, 4))
        q[np.ix_([0, 2], [0, 2])] = g
        q[np.ix_([1, 3], [1, 3])] = g
        return cls(dt, f, h, sigma_a**2 * q, r * np.eye(2))


def ekf_predict(s, cfg):
    f = cfg.f_matrix
    p = f @ s.p_matrix @ f.T + cfg.q_matrix
    return EkfState(f @ s.state, 0.5 * (p + p.T))


def ekf_update(s, z, cfg):
    h = cfg.h_matrix
    z = np.asarray(z, dtype=float)
    p = s.p_matrix
    innov_cov = h @ p @ h.T + cfg.r_matrix
    try:
        if np.linalg.cond(innov_cov) > 1.0 / np.finfo(float).eps:
            raise np.linalg.LinAlgError
        gain = np.linalg.solve(innov_cov, h @ p).T
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError("innovation covariance is singular") from exc
    state = s.state + gain @ (z - h @ s.state)
    p_new = (np.eye(p.shape[0]) - gain @ h) @ p
    return EkfState(state, 0.5 * (p_new + p_new.T))
