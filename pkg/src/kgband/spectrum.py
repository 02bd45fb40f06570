"""Synthetic spectrum sweeps: trajectories, per-band RSS, smoothing and the sweep file format."""
import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InsufficientDataError, ParseError
from .positioning import PathLossModel, pl_from_distance


@dataclass(frozen=True)
class SweepRecord:
    t: float
    rss: np.ndarray


@dataclass(frozen=True)
class SweepSet:
    """A run of sweeps stored column-wise: ``t`` is ``(S,)`` and ``rss`` is ``(S, M)`` in dBm."""

    t: np.ndarray
    rss: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(-1)
        rss = np.array(self.rss, dtype=float)
        if rss.size == 0 and rss.ndim != 2:
            rss = np.empty((t.size, 0))
        if rss.ndim != 2 or rss.shape[0] != t.size:
            raise ValueError("rss must have one row per timestamp")
        if not np.all(np.isfinite(rss)):
            raise ValueError("rss values must be finite")
        t.flags.writeable = False
        rss.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "rss", rss)

    def __len__(self):
        return self.t.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            return SweepSet(self.t[i], self.rss[i])
        return SweepRecord(float(self.t[i]), self.rss[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def n_bands(self):
        return self.rss.shape[1]

    @classmethod
    def from_records(cls, records):
        records = list(records)
        if not records:
            return cls(np.empty(0), np.empty((0, 0)))
        return cls([r.t for r in records], np.vstack([r.rss for r in records]))


def cluster_bands(m, i):
    """Split band indices ``0..m-1`` into ``i`` contiguous, nearly equal groups."""
    if i < 1 or i > m:
        raise ConfigError(f"cannot cluster {m} bands into {i} transmitters")
    base, extra = divmod(m, i)
    groups = []
    start = 0
    for g in range(i):
        size = base + (1 if g < extra else 0)
        groups.append(np.arange(start, start + size))
        start += size
    return groups


def group_offsets(band_to_tx, m):
    """Position of each band inside its group, scaled to ``[-1, 1]`` (0 for singleton groups)."""
    u = np.zeros(m)
    for grp in band_to_tx:
        if len(grp) > 1:
            u[grp] = np.linspace(-1.0, 1.0, len(grp))
    return u


def _points(v, what):
    a = np.asarray(v, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2 or not np.all(np.isfinite(a)):
        raise ConfigError(f"{what} must be a list of finite (x, y) pairs")
    return a


@dataclass(frozen=True)
class ScenarioConfig:
    """Ground-truth geometry plus the radio environment.

    Each band ``m`` is transmitted by ``band_to_tx`` owner at carrier ``fc[m]`` MHz.
    Shadowing on band ``m`` has std ``shadow_sigma + quality_linear*u + quality_quad*u**2``
    (floored at 0), where ``u`` is the band's offset inside its group.
    """

    waypoints: np.ndarray
    speed: float
    dt: float
    tx_positions: np.ndarray
    band_to_tx: tuple
    fc: np.ndarray
    n_pl: float = 3.0
    d0: float = 1.0
    shadow_sigma: float = 2.0
    quality_linear: float = 0.0
    quality_quad: float = 0.0
    tx_power: float = 30.0
    seed: int = 0
    _models: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        wp = _points(self.waypoints, "waypoints")
        tx = _points(self.tx_positions, "tx_positions")
        fc = np.asarray(self.fc, dtype=float).reshape(-1)
        if wp.shape[0] < 1:
            raise ConfigError("at least one waypoint is required")
        if tx.shape[0] < 4:
            raise ConfigError("at least four transmitters are required")
        if not (self.speed > 0 and self.dt > 0):
            raise ConfigError("speed and dt must be positive")
        if self.shadow_sigma < 0:
            raise ConfigError("shadow_sigma must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        groups = tuple(np.asarray(g, dtype=int) for g in self.band_to_tx)
        if len(groups) != tx.shape[0]:
            raise ConfigError("band_to_tx needs one group per transmitter")
        m = fc.size
        flat = np.concatenate(groups) if groups else np.empty(0, dtype=int)
        if flat.size != m or not np.array_equal(np.sort(flat), np.arange(m)):
            raise ConfigError("band_to_tx must cover every band exactly once")
        if np.any(fc <= 0):
            raise ConfigError("carrier frequencies must be positive")
        try:
            models = tuple(PathLossModel(self.d0, self.n_pl, f, self.shadow_sigma) for f in fc)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for name, val in (("waypoints", wp), ("tx_positions", tx), ("fc", fc)):
            val.flags.writeable = False
            object.__setattr__(self, name, val)
        object.__setattr__(self, "band_to_tx", groups)
        object.__setattr__(self, "_models", models)

    def __eq__(self, other):
        if not isinstance(other, ScenarioConfig):
            return NotImplemented
        return (
            np.array_equal(self.waypoints, other.waypoints)
            and np.array_equal(self.tx_positions, other.tx_positions)
            and np.array_equal(self.fc, other.fc)
            and len(self.band_to_tx) == len(other.band_to_tx)
            and all(np.array_equal(a, b) for a, b in zip(self.band_to_tx, other.band_to_tx))
            and (self.speed, self.dt, self.n_pl, self.d0, self.shadow_sigma, self.quality_linear,
                 self.quality_quad, self.tx_power, self.seed)
            == (other.speed, other.dt, other.n_pl, other.d0, other.shadow_sigma, other.quality_linear,
                other.quality_quad, other.tx_power, other.seed)
        )

    __hash__ = None

    @property
    def n_bands(self):
        return self.fc.size

    @property
    def n_tx(self):
        return self.tx_positions.shape[0]

    @property
    def band_models(self):
        return self._models

    @property
    def owner(self):
        """Transmitter index of every band."""
        own = np.empty(self.n_bands, dtype=int)
        for i, grp in enumerate(self.band_to_tx):
            own[grp] = i
        return own

    @property
    def offsets(self):
        return group_offsets(self.band_to_tx, self.n_bands)

    @property
    def band_shadow_sigma(self):
        u = self.offsets
        return np.maximum(self.shadow_sigma + self.quality_linear * u + self.quality_quad * u * u, 0.0)

    def with_seed(self, seed):
        from dataclasses import replace

        return replace(self, seed=seed)


def make_scenario(n_bands=240, n_tx=4, fc_start=470.0, fc_step=0.25, **kwargs):
    """Scenario with evenly spaced carriers clustered into ``n_tx`` contiguous groups."""
    kwargs.setdefault("tx_positions", [(0.0, 0.0), (300.0, 0.0), (0.0, 300.0), (300.0, 300.0)][:n_tx])
    kwargs.setdefault("waypoints", [(50.0, 50.0), (250.0, 50.0), (250.0, 250.0), (50.0, 250.0), (50.0, 60.0)])
    kwargs.setdefault("speed", 5.0)
    kwargs.setdefault("dt", 1.0)
    fc = fc_start + fc_step * np.arange(n_bands)
    return ScenarioConfig(band_to_tx=tuple(cluster_bands(n_bands, n_tx)), fc=fc, **kwargs)


def sample_trajectory(waypoints, spacing):
    """Points along the polyline every ``spacing`` metres of arc length, starting at the first waypoint."""
    wp = np.asarray(waypoints, dtype=float)
    seg = np.diff(wp, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1]) if len(seg) else np.empty(0)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    n = int(np.floor(total / spacing + 1e-9)) + 1
    s = np.minimum(np.arange(n) * spacing, total)
    x = np.interp(s, cum, wp[:, 0])
    y = np.interp(s, cum, wp[:, 1])
    return np.column_stack([x, y])


def tx_distances(truth, tx_positions):
    """``(S, I)`` distances from every truth point to every transmitter."""
    diff = truth[:, None, :] - np.asarray(tx_positions)[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def generate_scenario(cfg):
    """Sample the truth path and one sweep of every band per time step."""
    truth = sample_trajectory(cfg.waypoints, cfg.speed * cfg.dt)
    dist = tx_distances(truth, cfg.tx_positions)
    if np.any(dist <= 0):
        raise ConfigError("trajectory passes through a transmitter")
    owner = cfg.owner
    d_band = dist[:, owner]
    pl0 = np.array([mdl.pl0 for mdl in cfg.band_models])
    rng = np.random.default_rng(cfg.seed)
    shadow = rng.standard_normal(d_band.shape) * cfg.band_shadow_sigma
    # vectorized pl_from_distance over all bands (same d0, n_pl; pl0 per band)
    pl = pl0 + 10.0 * cfg.n_pl * np.log10(d_band / cfg.d0) + shadow
    rss = cfg.tx_power - pl
    t = np.arange(truth.shape[0]) * cfg.dt
    return truth, SweepSet(t, rss)


def band_rss(cfg, band, d, shadow=0.0):
    """Noise-free (or given-shadow) RSS of one band at distance ``d``; reference for tests."""
    return cfg.tx_power - pl_from_distance(cfg.band_models[band], d, shadow)


def smooth_rss(sweeps, window=5):
    """Centered moving average per band; the window is truncated at the ends."""
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"smoothing window must be a positive odd integer, got {window}")
    n = len(sweeps)
    if window == 1 or n == 0:
        return sweeps
    half = window // 2
    csum = np.vstack([np.zeros((1, sweeps.n_bands)), np.cumsum(sweeps.rss, axis=0)])
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    avg = (csum[hi] - csum[lo]) / (hi - lo)[:, None]
    return SweepSet(sweeps.t, avg)


@dataclass(frozen=True)
class FeatureMoments:
    mean: np.ndarray
    variance: np.ndarray


def feature_moments(sweeps):
    if len(sweeps) < 2:
        raise InsufficientDataError("feature moments need at least two sweeps")
    return FeatureMoments(sweeps.rss.mean(axis=0), sweeps.rss.var(axis=0, ddof=1))


def _fmt(v):
    return format(float(v), ".17g")


def save_sweeps(path, sweeps):
    """Write ``t,band_0,...`` CSV with 17 significant digits (bit-exact round trip)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if len(sweeps) == 0:
            return
        fh.write(",".join(["t"] + [f"band_{j}" for j in range(sweeps.n_bands)]) + "\n")
        for rec in sweeps:
            fh.write(",".join([_fmt(rec.t)] + [_fmt(v) for v in rec.rss]) + "\n")


def load_sweeps(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return SweepSet(np.empty(0), np.empty((0, 0)))
        if not header or header[0] != "t":
            raise ParseError("header must start with 't'", line=1, path=path)
        m = len(header) - 1
        for j, name in enumerate(header[1:]):
            if name != f"band_{j}":
                raise ParseError(f"unexpected column name {name!r}", line=1, path=path)
        t, rows = [], []
        for row in reader:
            line = reader.line_num
            if len(row) != m + 1:
                raise ParseError(f"expected {m + 1} columns, found {len(row)}", line=line, path=path)
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(f"non-numeric value ({exc})", line=line, path=path) from None
            if not all(np.isfinite(vals)):
                raise ParseError("non-finite value", line=line, path=path)
            t.append(vals[0])
            rows.append(vals[1:])
    return SweepSet(np.array(t), np.array(rows).reshape(len(rows), m))
