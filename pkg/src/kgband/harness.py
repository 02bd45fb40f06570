"""End-to-end emulation: periodic band selection, ranging, multilateration and EKF tracking."""
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from .belief import AttributeBelief, BasisSpec, FeatureMatrix, update_attribute
from .errors import ConfigError, InsufficientDataError, KgbandError, RankDeficiencyError
from .kg import PolicyConfig, kgcb_step
from .positioning import (
    EkfConfig,
    EkfState,
    MAX_CONDITION,
    build_linear_system,
    ekf_predict,
    ekf_update,
    gauss_newton_tx,
)
from .spectrum import ScenarioConfig, feature_moments, generate_scenario, smooth_rss

log = logging.getLogger(__name__)

SELECTORS = ("kg", "random", "all")
MODELS = ("linear", "nonlinear")
FEATURE_NAMES = ("offset", "mean", "std", "var")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    policy: PolicyConfig = PolicyConfig()
    selector: str = "kg"
    model: str = "nonlinear"
    basis: BasisSpec = BasisSpec()
    features: Tuple[str, ...] = ("offset",) * 6
    periodicity_p: int = 10
    runs_n: int = 1
    output_dir: str = "out"
    smooth_window: int = 5
    bands_per_tx: int = 1
    noise_var: float = 4.0
    prior_var: float = 1.0
    ekf_sigma_a: float = 0.5
    ekf_r: float = 4.0
    ekf_p0_vel: float = 25.0
    estimate_tx: bool = False
    calib_sweeps: int = 20
    label: Optional[str] = None

    def __post_init__(self):
        if self.selector not in SELECTORS:
            raise ConfigError(f"selector must be one of {SELECTORS}, got {self.selector!r}")
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.periodicity_p < 1 or self.runs_n < 1:
            raise ConfigError("periodicity_p and runs_n must be >= 1")
        bad = [f for f in self.features if f not in FEATURE_NAMES]
        if bad:
            raise ConfigError(f"unknown features {bad}; choose from {FEATURE_NAMES}")
        if len(self.features) != len(self.basis.degrees):
            raise ConfigError(
                f"{len(self.features)} features but {len(self.basis.degrees)} basis degrees"
            )
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ConfigError("smooth_window must be a positive odd integer")
        if self.bands_per_tx < 1:
            raise ConfigError("bands_per_tx must be >= 1")
        smallest = min(len(g) for g in self.scenario.band_to_tx)
        if self.bands_per_tx > smallest:
            raise ConfigError(f"bands_per_tx={self.bands_per_tx} exceeds the smallest band group ({smallest})")
        if self.policy.subset_k is not None and self.policy.subset_k > self.scenario.n_bands:
            raise ConfigError("subset_k exceeds the number of bands")
        if not (self.noise_var > 0 and self.prior_var > 0):
            raise ConfigError("noise_var and prior_var must be positive")
        if self.ekf_r <= 0 or self.ekf_sigma_a < 0 or self.ekf_p0_vel < 0:
            raise ConfigError("EKF noise settings must be non-negative (ekf_r positive)")
        if self.calib_sweeps < 3:
            raise ConfigError("calib_sweeps must be >= 3")

    @property
    def effective_basis(self):
        if self.model == "linear":
            return BasisSpec.linear(len(self.features))
        return self.basis

    @property
    def name(self):
        if self.label:
            return self.label
        if self.selector != "kg":
            return self.selector
        name = f"kg-{self.model}-{self.policy.mode}"
        if self.policy.subset_k is not None:
            name += f"-k{self.policy.subset_k}"
        return name


@dataclass
class RunResult:
    run_index: int
    seed: int
    t: np.ndarray
    truth: np.ndarray
    est_trajectory: np.ndarray
    selection_sweeps: List[int]
    chosen_bands: List[np.ndarray]
    error_x: np.ndarray
    error_y: np.ndarray
    wall_time: float
    selection_time: float


@dataclass(frozen=True)
class CoordStats:
    min: float
    median: float
    max: float
    mean: float
    rmse: float

    @classmethod
    def of(cls, err):
        err = np.asarray(err, dtype=float)
        srt = np.sort(err)
        return cls(
            float(srt[0]),
            float(srt[(srt.size - 1) // 2]),
            float(srt[-1]),
            float(err.mean()),
            float(np.sqrt(np.mean(err * err))),
        )


@dataclass(frozen=True)
class SummaryStats:
    label: str
    x: CoordStats
    y: CoordStats
    mean_wall_time: float = 0.0
    mean_selection_time: float = 0.0

    @property
    def rmse_2d(self):
        return float(np.hypot(self.x.rmse, self.y.rmse))


# ---------------------------------------------------------------------------
# features and ranging


def _minmax(v):
    lo, hi = v.min(), v.max()
    if hi - lo <= 0:
        return np.zeros_like(v)
    return 2.0 * (v - lo) / (hi - lo) - 1.0


def band_features(names, window, offsets, smooth_window):
    """Raw feature matrix ``(M, len(names))`` for one selection window.

    ``offset`` is the band's place inside its transmitter group; the moment features
    come from the smoothed window and are min-max scaled to ``[-1, 1]`` so monomials
    stay bounded.
    """
    cols = {"offset": offsets}
    if any(n != "offset" for n in names):
        mom = feature_moments(smooth_rss(window, smooth_window))
        cols["mean"] = _minmax(mom.mean)
        cols["var"] = _minmax(mom.variance)
        cols["std"] = _minmax(np.sqrt(mom.variance))
    return np.column_stack([cols[n] for n in names])


def band_distances(scenario, rss):
    """Invert the path-loss model of every band; ``rss`` is ``(S, M)``."""
    pl0 = np.array([mdl.pl0 for mdl in scenario.band_models])
    pl = scenario.tx_power - rss
    return scenario.d0 * 10.0 ** ((pl - pl0) / (10.0 * scenario.n_pl))


class Multilaterator:
    """Linearized multilateration with fixed anchors, solved for many epochs at once."""

    def __init__(self, anchors):
        self.anchors = np.asarray(anchors, dtype=float)
        a, _ = build_linear_system(self.anchors, np.zeros(len(self.anchors)))
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] == 0 or (sv[0] / sv[-1]) ** 2 > MAX_CONDITION:
            raise RankDeficiencyError("anchor geometry is degenerate")
        self._pinv = np.linalg.pinv(a)
        x, y = self.anchors[:, 0], self.anchors[:, 1]
        self._const = x[0] ** 2 - x[1:] ** 2 + y[0] ** 2 - y[1:] ** 2

    def solve(self, d):
        """Positions for range rows ``d`` of shape ``(S, I)``."""
        d = np.atleast_2d(d)
        b = self._const + d[:, 1:] ** 2 - d[:, :1] ** 2
        return b @ self._pinv.T


def _tx_ranges(dist, selection):
    """Mean range per transmitter over its selected bands; ``dist`` is ``(S, M)``."""
    return np.column_stack([dist[:, bands].mean(axis=1) for bands in selection])


def _window_bounds(k, p, n_sweeps):
    w = max(p, 2)
    lo = max(0, k - w + 1)
    hi = k + 1
    if hi - lo < 2:
        # warm-up: not enough history yet, look ahead instead
        hi = min(n_sweeps, lo + w)
    return lo, hi


def observe_reward(dist, truth, solver, selection, owner, x, lo, hi):
    """Negated mean positioning error on sweeps ``lo:hi`` with band ``x`` standing in for its transmitter."""
    trial = list(selection)
    trial[owner[x]] = np.array([x])
    pos = solver.solve(_tx_ranges(dist[lo:hi], trial))
    err = np.hypot(pos[:, 0] - truth[lo:hi, 0], pos[:, 1] - truth[lo:hi, 1])
    return -float(err.mean())


def _top_bands(mu, groups, k):
    out = []
    for grp in groups:
        order = np.lexsort((grp, -mu[grp]))
        out.append(np.sort(grp[order[:k]]))
    return out


def calibrate_anchors(scenario, truth, dist, n):
    """Estimate transmitter positions from the first ``n`` sweeps with known receiver positions."""
    n = min(n, truth.shape[0])
    est = []
    for grp in scenario.band_to_tx:
        d = dist[:n, grp].mean(axis=1)
        est.append(tuple(gauss_newton_tx(truth[:n], d)[0]))
    return np.array(est)


# ---------------------------------------------------------------------------
# one run


def run_single(cfg, truth, sweeps, run_index=0):
    """Emulate one pass over pre-generated sweeps. Timing covers policy and positioning only."""
    scen = cfg.scenario
    seed = cfg.policy.seed + run_index
    policy = replace(cfg.policy, seed=seed)
    n_sweeps = len(sweeps)
    if n_sweeps < 2:
        raise InsufficientDataError("a run needs at least two sweeps")
    groups = scen.band_to_tx
    owner = scen.owner
    offsets = scen.offsets
    basis = cfg.effective_basis
    lam = np.full(scen.n_bands, cfg.noise_var)
    rng = np.random.default_rng([seed, 1])
    ekf_cfg = EkfConfig.constant_velocity(scen.dt, cfg.ekf_sigma_a, cfg.ekf_r)

    t0 = time.perf_counter()
    sel_time = 0.0
    k = 0
    try:
        dist = band_distances(scen, sweeps.rss)
        if cfg.estimate_tx:
            anchors = calibrate_anchors(scen, truth, dist, cfg.calib_sweeps)
        else:
            anchors = scen.tx_positions
        solver = Multilaterator(anchors)

        belief = AttributeBelief.diagonal_prior(basis.n_weights, cfg.prior_var)
        selection = [g[: cfg.bands_per_tx] for g in groups]
        chosen, epochs = [], []
        est = np.empty((n_sweeps, 2))
        state = None
        for k in range(n_sweeps):
            if k % cfg.periodicity_p == 0:
                ts = time.perf_counter()
                epoch = len(epochs)
                if cfg.selector == "all":
                    selection = list(groups)
                elif cfg.selector == "random":
                    selection = [np.sort(rng.choice(g, cfg.bands_per_tx, replace=False)) for g in groups]
                else:
                    lo, hi = _window_bounds(k, cfg.periodicity_p, n_sweeps)
                    raw = band_features(cfg.features, sweeps[lo:hi], offsets, cfg.smooth_window)
                    feats = FeatureMatrix.from_raw(raw, basis)
                    for n in range(policy.budget_n):
                        x, _ = kgcb_step(belief, policy, n, features=feats, lam=lam, epoch=epoch)
                        y = observe_reward(dist, truth, solver, selection, owner, x, lo, hi)
                        belief = update_attribute(belief, feats.x[x], y, lam[x])
                    selection = _top_bands(feats.x @ belief.theta, groups, cfg.bands_per_tx)
                sel_time += time.perf_counter() - ts
                epochs.append(k)
                chosen.append(np.concatenate(selection))

            fix = solver.solve(_tx_ranges(dist[k : k + 1], selection))[0]
            if state is None:
                p0 = np.diag([cfg.ekf_r, cfg.ekf_r, cfg.ekf_p0_vel, cfg.ekf_p0_vel])
                state = EkfState(np.array([fix[0], fix[1], 0.0, 0.0]), p0)
            else:
                state = ekf_update(ekf_predict(state, ekf_cfg), fix, ekf_cfg)
            est[k] = state.state[:2]
    except KgbandError as exc:
        raise exc.__class__(f"run {run_index}, sweep {k}: {exc}") from exc
    wall = time.perf_counter() - t0

    return RunResult(
        run_index=run_index,
        seed=seed,
        t=np.asarray(sweeps.t),
        truth=truth,
        est_trajectory=est,
        selection_sweeps=epochs,
        chosen_bands=chosen,
        error_x=np.abs(truth[:, 0] - est[:, 0]),
        error_y=np.abs(truth[:, 1] - est[:, 1]),
        wall_time=wall,
        selection_time=sel_time,
    )


def scenarios_for(cfg):
    """Generate the sweeps of every run (run ``k`` uses ``seed + k``)."""
    return [generate_scenario(cfg.scenario.with_seed(cfg.scenario.seed + k)) for k in range(cfg.runs_n)]


def thread_count(n_jobs):
    env = os.environ.get("KGBAND_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"KGBAND_THREADS must be an integer, got {env!r}") from exc
    return max(1, min(cap, n_jobs))


def run_experiment(cfg, scenarios=None):
    """Run ``cfg.runs_n`` independent emulations; results are ordered by run index."""
    if scenarios is None:
        scenarios = scenarios_for(cfg)
    if len(scenarios) != cfg.runs_n:
        raise ConfigError(f"expected {cfg.runs_n} scenarios, got {len(scenarios)}")
    jobs = [(cfg, truth, sweeps, k) for k, (truth, sweeps) in enumerate(scenarios)]
    workers = thread_count(len(jobs))
    if workers == 1:
        results = [run_single(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: run_single(*job), jobs))
    results.sort(key=lambda r: r.run_index)
    log.info("%s: %d runs, mean wall %.3fs", cfg.name, len(results), np.mean([r.wall_time for r in results]))
    return results


def summarize(results, label=""):
    results = list(results)
    if not results:
        raise InsufficientDataError("no runs to summarize")
    ex = np.concatenate([r.error_x for r in results])
    ey = np.concatenate([r.error_y for r in results])
    if ex.size == 0:
        raise InsufficientDataError("runs contain no error samples")
    return SummaryStats(
        label,
        CoordStats.of(ex),
        CoordStats.of(ey),
        float(np.mean([r.wall_time for r in results])),
        float(np.mean([r.selection_time for r in results])),
    )


def compare_policies(cfgs):
    """Run every variant on the same sweeps (paired comparison).

    Returns ``(stats, results)`` with one entry per config.
    """
    cfgs = list(cfgs)
    if not cfgs:
        raise ConfigError("nothing to compare")
    first = cfgs[0]
    for c in cfgs[1:]:
        if c.scenario != first.scenario or c.runs_n != first.runs_n:
            raise ConfigError("compared configs must share the scenario and seed set")
    scenarios = scenarios_for(first)
    labels = _unique_labels([c.name for c in cfgs])
    stats, results = [], []
    for label, c in zip(labels, cfgs):
        res = run_experiment(c, scenarios)
        results.append(res)
        stats.append(summarize(res, label))
    return stats, results


def _unique_labels(names):
    seen = {}
    out = []
    for n in names:
        if n in seen:
            seen[n] += 1
            out.append(f"{n}#{seen[n]}")
        else:
            seen[n] = 1
            out.append(n)
    return out
