"""Run configuration: TOML in, validated and normalized, canonically hashed.

``mass`` always means the total charge ``M_phys = integral of u``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import tomli_w

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KINDS = ("profile", "radial", "field2d", "diagnose", "moser")
DIAGNOSTICS = ("decay", "converge", "besov", "nash")
INITIAL_TYPES = ("gaussian", "self-similar", "dirac", "file")

_RADIAL_GRID = {"n": 512, "r_max": 80.0, "ratio": 1.01}
_RADIAL_TIME = {"t_end": 100.0, "dt0": 1e-3, "dt_max": 1.0, "dt_rel": 0.02, "scheme": "cn"}
_GAUSSIAN = {"type": "gaussian", "mass": 2 * math.pi * 0.1, "sigma": 1.0, "center": [0.0, 0.0]}

DEFAULTS = {
    "profile": {"profile": {"tol": 1e-10, "y_max": 200.0}},
    "radial": {
        "grid": _RADIAL_GRID,
        "time": _RADIAL_TIME,
        "initial": _GAUSSIAN,
        "schedule": [],
    },
    "field2d": {
        "grid": {"n": 256, "L": 40.0},
        "time": {"t_end": 1.0, "dt": 0.01, "order": 2},
        "initial": {**_GAUSSIAN, "mass": 2 * math.pi * 0.05},
        "schedule": [],
    },
    "diagnose": {
        "diagnose": {"what": "decay", "p": 2.0, "window": [10.0, 100.0], "fields": 200, "n": 64, "L": 32.0},
        "grid": _RADIAL_GRID,
        "time": _RADIAL_TIME,
        "initial": _GAUSSIAN,
        "schedule": [],
    },
    "moser": {"moser": {"C": 1.0, "k_max": 30}},
}


@dataclass(frozen=True)
class SimConfig:
    kind: str
    params: dict
    seed: int = 0

    def to_dict(self):
        return {"kind": self.kind, "seed": self.seed, **copy.deepcopy(self.params)}

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def to_toml(self):
        return tomli_w.dumps(_sorted(self.to_dict()))

    def section(self, name):
        return self.params.get(name, {})


def _sorted(d):
    if isinstance(d, dict):
        return {k: _sorted(d[k]) for k in sorted(d)}
    return d


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            if key == "initial" and val.get("type", out[key].get("type")) != out[key].get("type"):
                out[key] = copy.deepcopy(val)
            else:
                out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _positive(value, where, precondition):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        raise ConfigError(f"{where}={value!r}: {precondition}")
    return float(value)


def _int_at_least(value, lo, where, precondition):
    if isinstance(value, bool) or not isinstance(value, int) or value < lo:
        raise ConfigError(f"{where}={value!r}: {precondition}")
    return value


def _validate_initial(ini, kind):
    typ = ini.get("type")
    if typ not in INITIAL_TYPES:
        raise ConfigError(f"initial.type={typ!r}: must be one of {INITIAL_TYPES}")
    if typ in ("gaussian", "self-similar", "dirac"):
        ini["mass"] = _positive(ini.get("mass"), "initial.mass", "mass_to_shoot requires a finite M_phys > 0")
    if typ == "gaussian":
        ini["sigma"] = _positive(ini.get("sigma", 1.0), "initial.sigma", "Gaussian width must be positive")
        center = [float(c) for c in ini.get("center", [0.0, 0.0])]
        if len(center) != 2:
            raise ConfigError("initial.center: needs two coordinates")
        if kind != "field2d" and any(center):
            raise ConfigError(f"initial.center={center}: radial data must be centred at the origin")
        ini["center"] = center
    elif typ == "self-similar":
        ini["t0"] = _positive(ini.get("t0", 1.0), "initial.t0", "self-similar data need t0 > 0")
    elif typ == "dirac" and kind != "field2d":
        raise ConfigError("initial.type='dirac': only the 2D field solver accepts point charges")
    elif typ == "file":
        if not isinstance(ini.get("path"), str):
            raise ConfigError("initial.path: file data need a path string")


def _validate_schedule(cfg, t0, t_end):
    sched = sorted(float(s) for s in cfg.get("schedule", []))
    if sched and (sched[0] <= t0 or sched[-1] > t_end):
        raise ConfigError(f"schedule={sched}: solve requires schedule within (t0={t0}, t_end={t_end}]")
    cfg["schedule"] = sched


def _start_time(cfg):
    ini = cfg["initial"]
    return ini["t0"] if ini["type"] == "self-similar" else 0.0


def _validate_radial(cfg):
    g = cfg["grid"]
    g["n"] = _int_at_least(g.get("n"), 16, "grid.n", "RadialGrid requires N >= 16")
    g["r_max"] = _positive(g.get("r_max"), "grid.r_max", "R_max must be positive")
    ratio = g.get("ratio")
    if not isinstance(ratio, (int, float)) or not 1.0 <= ratio <= 1.2:
        raise ConfigError(f"grid.ratio={ratio!r}: RadialGrid requires a geometric ratio in [1, 1.2]")
    g["ratio"] = float(ratio)
    tm = cfg["time"]
    if tm.get("scheme") not in ("euler", "cn"):
        raise ConfigError(f"time.scheme={tm.get('scheme')!r}: step supports 'euler' or 'cn'")
    for key in ("t_end", "dt0", "dt_max"):
        tm[key] = _positive(tm.get(key), f"time.{key}", "must be positive")
    if tm.get("dt_rel") is not None:
        tm["dt_rel"] = _positive(tm["dt_rel"], "time.dt_rel", "must be positive")
    _validate_initial(cfg["initial"], "radial")
    t0 = _start_time(cfg)
    if not tm["t_end"] > t0:
        raise ConfigError(f"time.t_end={tm['t_end']}: solve requires t_end > t0={t0}")
    _validate_schedule(cfg, t0, tm["t_end"])


def _validate_field2d(cfg):
    g = cfg["grid"]
    n = _int_at_least(g.get("n"), 32, "grid.n", "the 2D solver requires n >= 32")
    if n & (n - 1):
        raise ConfigError(f"grid.n={n}: Field2D requires a power of two")
    g["L"] = _positive(g.get("L"), "grid.L", "box side must be positive")
    tm = cfg["time"]
    tm["t_end"] = _positive(tm.get("t_end"), "time.t_end", "must be positive")
    tm["dt"] = _positive(tm.get("dt"), "time.dt", "must be positive")
    if tm.get("order") not in (1, 2):
        raise ConfigError(f"time.order={tm.get('order')!r}: duhamel_solve supports order 1 or 2")
    _validate_initial(cfg["initial"], "field2d")
    t0 = _start_time(cfg)
    if not tm["t_end"] > t0:
        raise ConfigError(f"time.t_end={tm['t_end']}: duhamel_solve requires t_end > t0={t0}")
    _validate_schedule(cfg, t0, tm["t_end"])


def _validate_profile(cfg):
    p = cfg["profile"]
    has_mass, has_shoot = "mass" in p, "shoot" in p
    if has_mass == has_shoot:
        raise ConfigError("profile: give exactly one of mass or shoot")
    if has_mass:
        p["mass"] = _positive(p["mass"], "profile.mass", "mass_to_shoot requires a finite M_phys > 0")
    else:
        a = p["shoot"]
        if not isinstance(a, (int, float)) or not 0 <= a < 0.5:
            raise ConfigError(f"profile.shoot={a!r}: integrate_profile requires 0 <= a < 1/2")
        p["shoot"] = float(a)
    p["tol"] = _positive(p.get("tol"), "profile.tol", "tolerance must be positive")
    p["y_max"] = _positive(p.get("y_max"), "profile.y_max", "y_max must be positive")


def _validate_diagnose(cfg):
    d = cfg["diagnose"]
    if d.get("what") not in DIAGNOSTICS:
        raise ConfigError(f"diagnose.what={d.get('what')!r}: must be one of {DIAGNOSTICS}")
    if d["what"] in ("decay", "converge"):
        _validate_radial(cfg)
        lo, hi = (float(w) for w in d.get("window", [10.0, 100.0]))
        if not 0 < lo < hi <= cfg["time"]["t_end"]:
            raise ConfigError(f"diagnose.window=[{lo}, {hi}]: decay_fit requires a window inside (0, t_end]")
        d["window"] = [lo, hi]
        p = d.get("p", 2.0)
        if not isinstance(p, (int, float)) or p < 1:
            raise ConfigError(f"diagnose.p={p!r}: L^p norm requires p >= 1")
        d["p"] = float(p)
    elif d["what"] == "besov":
        _validate_besov(cfg)
    else:
        _int_at_least(d.get("fields"), 1, "diagnose.fields", "need at least one random field")
        _int_at_least(d.get("n"), 32, "diagnose.n", "nash fields need n >= 32")
        d["L"] = _positive(d.get("L"), "diagnose.L", "box side must be positive")


def _validate_besov(cfg):
    g = cfg.setdefault("besov", {})
    g.setdefault("n", 512)
    g.setdefault("L", 512.0)
    g.setdefault("t_min", 2.0)
    g.setdefault("t_max", 2000.0)
    g.setdefault("points", 31)
    n = _int_at_least(g["n"], 32, "besov.n", "Field2D requires n >= 32")
    if n & (n - 1):
        raise ConfigError(f"besov.n={n}: Field2D requires a power of two")
    lo = _positive(g["t_min"], "besov.t_min", "heat times must be positive")
    hi = _positive(g["t_max"], "besov.t_max", "heat times must be positive")
    if hi / lo < 1e3:
        raise ConfigError(f"besov.t_max/t_min={hi / lo:.3g}: besov_proxy requires three decades")


def _validate_moser(cfg):
    m = cfg["moser"]
    m["C"] = _positive(m.get("C"), "moser.C", "moser_constants requires C > 0")
    m["k_max"] = _int_at_least(m.get("k_max"), 1, "moser.k_max", "moser_constants requires k_max >= 1")
    if m["k_max"] > 40:
        raise ConfigError(f"moser.k_max={m['k_max']}: moser_constants requires k_max <= 40")


_VALIDATORS = {
    "profile": _validate_profile,
    "radial": _validate_radial,
    "field2d": _validate_field2d,
    "diagnose": _validate_diagnose,
    "moser": _validate_moser,
}


def make_config(data):
    """Validate a raw mapping (as parsed from TOML) and fill defaults."""
    data = dict(data)
    kind = data.pop("kind", None)
    if kind not in KINDS:
        raise ConfigError(f"kind={kind!r}: must be one of {KINDS}")
    seed = data.pop("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed={seed!r}: must be a nonnegative integer")
    params = _merge(DEFAULTS[kind], data)
    _VALIDATORS[kind](params)
    return SimConfig(kind, _sorted(params), seed)


def loads_config(text):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    return make_config(data)


def load_config(path):
    return loads_config(Path(path).read_text())
