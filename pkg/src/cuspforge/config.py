"""Line-oriented analysis configuration: ``key = value`` with # comments.

Recognized keys: family, a1, a2, b1, b2, d, a, b, phi_min, phi_max, y_max,
grid, tol, and the optional joint-window keys u_min, u_max, v_min, v_max
used by the region-counting subcommand.  Unset keys fall back to the
defaults of whatever module consumes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import ConfigError
from .maps import FAMILY_KINDS, MapFamily, make_family

_FLOAT_KEYS = ("a1", "a2", "b1", "b2", "d", "a", "b",
               "phi_min", "phi_max", "y_max",
               "u_min", "u_max", "v_min", "v_max", "tol")
_INT_KEYS = ("grid",)


@dataclass(frozen=True)
class AnalysisConfig:
    family: str
    a1: float | None = None
    a2: float | None = None
    b1: float | None = None
    b2: float | None = None
    d: float | None = None
    a: float | None = None
    b: float | None = None
    phi_min: float | None = None
    phi_max: float | None = None
    y_max: float | None = None
    u_min: float | None = None
    u_max: float | None = None
    v_min: float | None = None
    v_max: float | None = None
    grid: int | None = None
    tol: float | None = None


def parse_config(text: str) -> AnalysisConfig:
    """Parse config text; unknown keys and malformed lines raise ConfigError."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key == "family":
            if val not in FAMILY_KINDS:
                known = ", ".join(sorted(FAMILY_KINDS))
                raise ConfigError(f"line {lineno}: unknown family {val!r} (known: {known})")
            values[key] = val
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} needs a number, got {val!r}") from None
        elif key in _INT_KEYS:
            try:
                values[key] = int(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} needs an integer, got {val!r}") from None
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values and isinstance(values[key], float) and not math.isfinite(values[key]):
            raise ConfigError(f"line {lineno}: {key} must be finite")
    if "family" not in values:
        raise ConfigError("config must set 'family'")
    return AnalysisConfig(**values)


def emit_config(cfg: AnalysisConfig) -> str:
    """Emit config text that parses back to an identical config."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {value!r}" if isinstance(value, float)
                     else f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def load_config(path) -> AnalysisConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def family_from_config(cfg: AnalysisConfig) -> MapFamily:
    """Build the map family, checking that the required parameters are set."""
    manip = cfg.family in ("rpr2pr_exact", "rpr2pr_offset")
    if manip:
        missing = [k for k in ("a1", "a2", "b1", "b2") if getattr(cfg, k) is None]
        if missing:
            raise ConfigError(f"family {cfg.family} needs keys: {', '.join(missing)}")
        params = {k: getattr(cfg, k) for k in ("a1", "a2", "b1", "b2")}
        if cfg.family == "rpr2pr_offset":
            params["d"] = cfg.d if cfg.d is not None else 0.0
        try:
            return make_family(cfg.family, **params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    missing = [k for k in ("a", "b") if getattr(cfg, k) is None]
    if missing:
        raise ConfigError(f"family {cfg.family} needs keys: {', '.join(missing)}")
    return make_family(cfg.family, a=cfg.a, b=cfg.b)


def workspace_box(cfg: AnalysisConfig, family: MapFamily):
    """Workspace window from the config, defaulting per family."""
    (x0, x1), (y0, y1) = family.default_box()
    if cfg.phi_min is not None:
        x0 = cfg.phi_min
    if cfg.phi_max is not None:
        x1 = cfg.phi_max
    if cfg.y_max is not None:
        y0, y1 = -cfg.y_max, cfg.y_max
    if not (x1 > x0 and y1 > y0):
        raise ConfigError("workspace window is degenerate")
    return ((x0, x1), (y0, y1))


def joint_bounds(cfg: AnalysisConfig):
    """Joint window from the config, or None when not fully specified."""
    vals = (cfg.u_min, cfg.u_max, cfg.v_min, cfg.v_max)
    if all(v is None for v in vals):
        return None
    if any(v is None for v in vals):
        raise ConfigError("joint window needs all of u_min, u_max, v_min, v_max")
    if not (cfg.u_max > cfg.u_min and cfg.v_max > cfg.v_min):
        raise ConfigError("joint window is degenerate")
    return ((cfg.u_min, cfg.u_max), (cfg.v_min, cfg.v_max))
