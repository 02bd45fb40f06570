"""Knowledge-gradient scoring and selection over correlated normal beliefs.

For a belief ``N(mu, Sigma)`` and a candidate measurement ``x`` the next mean vector is
``mu + sigma_tilde * Z`` with ``Z ~ N(0, 1)``. The KG factor of ``x`` is
``E[max_i(mu_i + sigma_tilde_i Z)] - max_i mu_i``, which depends only on the upper
envelope of the lines ``p_i + q_i z``.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erfcx, logsumexp

from .belief import AttributeBelief, BeliefState, FeatureMatrix, sigma_tilde_attribute, sigma_tilde_full
from .errors import DimensionError, NumericalDegeneracyError

PARALLEL_TOL = 1e-14
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
_SQRT_HALF_PI = np.sqrt(0.5 * np.pi)
_ASYMPTOTIC_FROM = 100.0


@dataclass(frozen=True)
class LineSet:
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).ravel()
        q = np.asarray(self.q, dtype=float).ravel()
        if p.size < 1 or p.shape != q.shape:
            raise DimensionError("p and q must be non-empty and of equal length")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ValueError("line coefficients must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class DominantSet:
    """Lines on the upper envelope.

    ``order`` sorts the input lines by ascending slope (ties: descending intercept);
    ``kept`` indexes into that sorted order and ``breakpoints[k]`` is where line
    ``kept[k]`` hands over to ``kept[k + 1]``.
    """

    order: np.ndarray
    kept: np.ndarray
    breakpoints: np.ndarray

    @property
    def lines(self):
        """Indices of the envelope lines in the caller's original numbering."""
        return self.order[self.kept]


@dataclass(frozen=True)
class KgScores:
    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if np.any(v < -1e-12):
            raise NumericalDegeneracyError("knowledge-gradient factors must be non-negative")
        object.__setattr__(self, "v", v)

    def __len__(self):
        return self.v.size


@dataclass(frozen=True)
class PolicyConfig:
    mode: str = "offline"
    budget_n: int = 10
    subset_k: Optional[int] = None
    mc_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("offline", "online"):
            raise ValueError(f"unknown policy mode {self.mode!r}")
        if self.budget_n < 1:
            raise ValueError("budget_n must be >= 1")
        if self.subset_k is not None and self.subset_k < 1:
            raise ValueError("subset_k must be >= 1")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def dominant_lines(lines):
    """Find the lines that form the upper envelope of ``max_i p_i + q_i z``."""
    p, q = lines.p, lines.q
    order = np.lexsort((-p, q))
    ps = p[order].tolist()
    qs = q[order].tolist()
    kept = []
    bps = []
    for i in range(len(ps)):
        if kept and qs[i] - qs[kept[-1]] < PARALLEL_TOL:
            # parallel to the last kept line: keep whichever sits higher
            if ps[i] <= ps[kept[-1]]:
                continue
            kept.pop()
            if bps:
                bps.pop()
        z = None
        while kept:
            j = kept[-1]
            z = (ps[j] - ps[i]) / (qs[i] - qs[j])
            if bps and z <= bps[-1]:
                kept.pop()
                bps.pop()
                continue
            break
        if kept:
            bps.append(z)
        kept.append(i)
    return DominantSet(order, np.asarray(kept, dtype=int), np.asarray(bps, dtype=float))


def log_f_neg(t):
    """``log f(-t)`` for ``t >= 0`` where ``f(z) = z Phi(z) + phi(z)``.

    ``f(-t) = phi(t) (1 - t R(t))`` with Mills ratio ``R``; the bracket cancels badly
    for large ``t`` so an asymptotic series takes over there.
    """
    t = np.abs(np.asarray(t, dtype=float))
    log_phi = -0.5 * t * t - _LOG_SQRT_2PI
    out = np.empty_like(t)
    small = t < _ASYMPTOTIC_FROM
    ts = t[small]
    out[small] = np.log1p(-ts * _SQRT_HALF_PI * erfcx(ts / np.sqrt(2.0)))
    tl = t[~small]
    if tl.size:
        u = 1.0 / (tl * tl)
        # 1 - t R(t) = u (1 - 3u + 15u^2 - 105u^3 + 945u^4 - ...)
        out[~small] = np.log(u) + np.log1p(u * (-3.0 + u * (15.0 + u * (-105.0 + u * 945.0))))
    return log_phi + out


def kg_h(lines):
    """Expected gain ``E[max_i(p_i + q_i Z)] - max_i p_i`` for standard normal ``Z``.

    The envelope sum is accumulated in the log domain and exponentiated at the end.
    """
    dom = dominant_lines(lines)
    if dom.kept.size < 2:
        return 0.0
    qk = lines.q[dom.lines]
    log_terms = np.log(np.diff(qk)) + log_f_neg(dom.breakpoints)
    return float(np.exp(logsumexp(log_terms)))


def kg_factor_all(b):
    """KG factor of every alternative under a full belief."""
    v = np.empty(b.size)
    for x in range(b.size):
        v[x] = kg_h(LineSet(b.mu, sigma_tilde_full(b, x)))
    return KgScores(v)


def kg_factor_all_attribute(ab, features, lam):
    """KG factors from the weight belief, one covariance column at a time.

    Only ``C`` (``L x L``) and ``X C`` (``M x L``) are ever held; the ``M x M``
    covariance is never formed.
    """
    if features.n_weights != ab.size:
        raise DimensionError(f"features have {features.n_weights} columns, belief has {ab.size} weights")
    m = features.n_alternatives
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (m,))
    mu = features.x @ ab.theta
    xc = features.x @ ab.c_matrix
    v = np.empty(m)
    for x in range(m):
        v[x] = kg_h(LineSet(mu, sigma_tilde_attribute(ab, features, x, lam[x], xc=xc)))
    return KgScores(v)


def select_offline(scores):
    """Index of the largest KG factor; ``np.argmax`` keeps the lowest index on ties."""
    v = scores.v if isinstance(scores, KgScores) else np.asarray(scores, dtype=float)
    if v.size == 0:
        raise ValueError("no scores to select from")
    return int(np.argmax(v))


def select_online(mu, scores, n, budget_n):
    """Online-KG decision: maximize ``mu_x + (N - n) v_x``.

    The score is transient; the belief itself is never shifted by it.
    """
    if not 0 <= n <= budget_n:
        raise ValueError(f"step {n} outside horizon [0, {budget_n}]")
    v = scores.v if isinstance(scores, KgScores) else np.asarray(scores, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != v.shape:
        raise DimensionError("mu and scores differ in length")
    return int(np.argmax(mu + (budget_n - n) * v))


def _rank_by_max_frequency(samples, mu, k):
    m = mu.size
    counts = np.bincount(np.argmax(samples, axis=1), minlength=m)
    # primary: count desc; then mu desc; then index asc
    rank = np.lexsort((np.arange(m), -mu, -counts))
    return np.sort(rank[:k])


def _cholesky_jittered(a):
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * max(float(np.trace(a)), np.finfo(float).tiny)
    try:
        return np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError("covariance not factorizable even with jitter") from exc


def subset_reduce(b, k, t, seed):
    """Pick ``k`` promising alternatives by how often each is the max of a posterior draw."""
    m = b.size
    if not 1 <= k <= m:
        raise ValueError(f"subset size {k} must lie in [1, {m}]")
    if k == m:
        return np.arange(m)
    rng = np.random.default_rng(seed)
    chol = _cholesky_jittered(b.sigma)
    z = rng.standard_normal((t, m))
    samples = b.mu + z @ chol.T
    return _rank_by_max_frequency(samples, b.mu, k)


def subset_reduce_attribute(ab, features, k, t, seed):
    """Same as :func:`subset_reduce` but draws weights, so the ``M x M`` covariance is never built."""
    m = features.n_alternatives
    if not 1 <= k <= m:
        raise ValueError(f"subset size {k} must lie in [1, {m}]")
    if k == m:
        return np.arange(m)
    rng = np.random.default_rng(seed)
    chol = _cholesky_jittered(ab.c_matrix)
    z = rng.standard_normal((t, ab.size))
    weights = ab.theta + z @ chol.T
    samples = weights @ features.x.T
    return _rank_by_max_frequency(samples, features.x @ ab.theta, k)


def kgcb_step(belief, policy, n, features=None, lam=None, epoch=0):
    """Choose the next alternative to measure.

    ``belief`` is a :class:`BeliefState`, or an :class:`AttributeBelief` together with
    ``features`` and per-alternative noise ``lam``. With ``policy.subset_k`` set, only a
    Monte-Carlo shortlist is scored. Returns ``(global index, scores)``; the scores are
    over the shortlist when one is used. The shortlist draw is seeded by
    ``(policy.seed, epoch, n)``.
    """
    attribute = isinstance(belief, AttributeBelief)
    if attribute:
        if features is None or lam is None:
            raise ValueError("attribute beliefs need features and lam")
        m = features.n_alternatives
        lam = np.broadcast_to(np.asarray(lam, dtype=float), (m,))
        mu = features.x @ belief.theta
    else:
        m = belief.size
        mu = belief.mu

    k = policy.subset_k
    if k is not None and k > m:
        raise ValueError(f"subset_k={k} exceeds the {m} alternatives")
    step_seed = [policy.seed, epoch, n]
    if k is None or k == m:
        idx = np.arange(m)
        if attribute:
            scores = kg_factor_all_attribute(belief, features, lam)
        else:
            scores = kg_factor_all(belief)
    elif attribute:
        idx = subset_reduce_attribute(belief, features, k, policy.mc_samples, step_seed)
        scores = kg_factor_all_attribute(belief, features.subset(idx), lam[idx])
    else:
        idx = subset_reduce(belief, k, policy.mc_samples, step_seed)
        scores = kg_factor_all(belief.subset(idx))

    if policy.mode == "online":
        local = select_online(mu[idx], scores, n, policy.budget_n)
    else:
        local = select_offline(scores)
    return int(idx[local]), scores
