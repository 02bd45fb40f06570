"""Flat ``key = value`` experiment configuration files.

Lines are ``key = value``; ``#`` starts a comment. Point lists are written as
``x y; x y; ...`` and integer/name lists as comma-separated values. Unknown keys
are an error. See ``KEYS`` for the full list with defaults.
"""
import math

import numpy as np

from .belief import BasisSpec
from .errors import ConfigError
from .harness import ExperimentConfig
from .kg import PolicyConfig
from .spectrum import cluster_bands, ScenarioConfig


def _points(s):
    pts = []
    for chunk in s.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"expected 'x y', got {chunk!r}")
        pts.append((float(parts[0]), float(parts[1])))
    return pts


def _ints(s):
    return tuple(int(v) for v in s.split(",") if v.strip())


def _names(s):
    return tuple(v.strip() for v in s.split(",") if v.strip())


def _optional_int(s):
    return None if s.strip().lower() in ("", "none", "off") else int(s)


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# key: (parser, default)
KEYS = {
    # scenario
    "n_bands": (int, 240),
    "n_tx": (int, None),
    "tx_positions": (_points, [(0.0, 0.0), (300.0, 0.0), (0.0, 300.0), (300.0, 300.0)]),
    "waypoints": (_points, [(50.0, 50.0), (250.0, 50.0), (250.0, 250.0), (50.0, 250.0), (50.0, 60.0)]),
    "speed": (float, 5.0),
    "dt": (float, 1.0),
    "fc_start": (float, 470.0),
    "fc_step": (float, 0.25),
    "n_pl": (float, 3.0),
    "d0": (float, 1.0),
    "shadow_sigma": (float, 2.0),
    "quality_linear": (float, 0.0),
    "quality_quad": (float, 4.0),
    "tx_power": (float, 30.0),
    "seed": (int, 0),
    # policy
    "selector": (str, "kg"),
    "mode": (str, "offline"),
    "budget_n": (int, 5),
    "subset_k": (_optional_int, None),
    "mc_samples": (int, 1000),
    # belief model
    "model": (str, "nonlinear"),
    "basis_degrees": (_ints, (1, 2, 3, 4, 5, 6)),
    "features": (_names, ("offset",) * 6),
    "prior_var": (float, 1.0),
    "noise_var": (float, 4.0),
    # harness
    "periodicity_p": (int, 10),
    "runs_n": (int, 5),
    "output_dir": (str, "out"),
    "smooth_window": (int, 5),
    "bands_per_tx": (int, 1),
    "ekf_sigma_a": (float, 0.5),
    "ekf_r": (float, 4.0),
    "ekf_p0_vel": (float, 25.0),
    "estimate_tx": (_bool, False),
    "calib_sweeps": (int, 20),
    "label": (str, None),
}


def parse_text(text, source="<config>"):
    """Parse config text into a dict of typed values (only keys that appear)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = KEYS[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return values


def _ring(n, center=(150.0, 150.0), radius=212.0):
    ang = 2 * math.pi * np.arange(n) / n + math.pi / 4
    return [(center[0] + radius * math.cos(a), center[1] + radius * math.sin(a)) for a in ang]


def build_config(values=None, **overrides):
    """Build an :class:`ExperimentConfig` from parsed values; keyword overrides win."""
    v = {k: d for k, (_, d) in KEYS.items()}
    v.update(values or {})
    unknown = set(overrides) - set(KEYS)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    v.update(overrides)

    tx = v["tx_positions"]
    if v["n_tx"] is not None and v["n_tx"] != len(tx):
        if "tx_positions" in (values or {}) or "tx_positions" in overrides:
            raise ConfigError(f"n_tx={v['n_tx']} but {len(tx)} tx_positions given")
        tx = _ring(v["n_tx"])
    try:
        scenario = ScenarioConfig(
            waypoints=v["waypoints"],
            speed=v["speed"],
            dt=v["dt"],
            tx_positions=tx,
            band_to_tx=tuple(cluster_bands(v["n_bands"], len(tx))),
            fc=v["fc_start"] + v["fc_step"] * np.arange(v["n_bands"]),
            n_pl=v["n_pl"],
            d0=v["d0"],
            shadow_sigma=v["shadow_sigma"],
            quality_linear=v["quality_linear"],
            quality_quad=v["quality_quad"],
            tx_power=v["tx_power"],
            seed=v["seed"],
        )
        policy = PolicyConfig(
            mode=v["mode"],
            budget_n=v["budget_n"],
            subset_k=v["subset_k"],
            mc_samples=v["mc_samples"],
            seed=v["seed"],
        )
        return ExperimentConfig(
            scenario=scenario,
            policy=policy,
            selector=v["selector"],
            model=v["model"],
            basis=BasisSpec(v["basis_degrees"]),
            features=tuple(v["features"]),
            periodicity_p=v["periodicity_p"],
            runs_n=v["runs_n"],
            output_dir=v["output_dir"],
            smooth_window=v["smooth_window"],
            bands_per_tx=v["bands_per_tx"],
            noise_var=v["noise_var"],
            prior_var=v["prior_var"],
            ekf_sigma_a=v["ekf_sigma_a"],
            ekf_r=v["ekf_r"],
            ekf_p0_vel=v["ekf_p0_vel"],
            estimate_tx=v["estimate_tx"],
            calib_sweeps=v["calib_sweeps"],
            label=v["label"],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return build_config(parse_text(text, source=str(path)), **overrides)
