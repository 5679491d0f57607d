"""Scenario files: strict TOML parsing with defaults resolved."""
from __future__ import annotations

from dataclasses import dataclass, field
import difflib
import math
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .clf import NonlinearGains
from .controllers import LinearGains, param_map
from .errors import ConfigError
from .friction import MODELS, make_friction
from .model import Grid, PhysicalParams

MODES = ("simulate-nonlinear", "simulate-linear", "spectrum", "gains-check", "safe-radius",
         "lyapunov-eval", "iss-check", "resolvent-check")

NL_GAIN_KEYS = ("zeta", "k", "q", "delta", "omega", "omega1", "omega2", "beta", "gamma")
LIN_GAIN_KEYS = ("K", "k3", "k4", "k5", "k1", "k2")

SCHEMA = {
    "": {"name", "mode", "output_dir", "params", "gains", "grid", "ic", "run", "signal", "check"},
    "params": {"g", "mu", "sigma", "L", "m", "H_max", "m_bar", "kappa_bar", "h_star", "friction"},
    "params.friction": {"model", "cf", "r0", "r1", "r2", "b2", "b3"},
    "gains": set(NL_GAIN_KEYS) | set(LIN_GAIN_KEYS) | {"map_from_nonlinear"},
    "grid": {"n_cells", "n_nodes"},
    "ic": {"xi0", "w0", "h_modes", "v_modes", "phi_modes", "phit_modes"},
    "run": {"t_end", "cfl_safety", "cadence", "control", "law", "dt", "slack_factor", "mass_rtol"},
    "signal": {"kind", "amplitude", "omega"},
    "check": {"r", "n_modes", "n_terms", "q_bar", "f3", "n_ic", "method"},
}

DEFAULTS = {"cfl_safety": 0.4, "cadence": 10, "kappa_bar": 0.0}


def _suggest(key: str, allowed) -> str:
    near = difflib.get_close_matches(key, sorted(allowed), n=1)
    if not near:
        near = sorted(a for a in allowed if a.startswith(key) or key.startswith(a))[:1]
    return f"; did you mean '{near[0]}'?" if near else ""


def _check_keys(table: dict, section: str):
    allowed = SCHEMA[section]
    for key in table:
        if key not in allowed:
            hint = _suggest(key, allowed)
            where = f"[{section}]" if section else "top level"
            raise ConfigError(f"unknown key '{key}' in {where}{hint}")
        sub = f"{section}.{key}" if section else key
        if isinstance(table[key], dict):
            if sub not in SCHEMA:
                raise ConfigError(f"'{sub}' must be a value, not a table")
            _check_keys(table[key], sub)


def _require(table: dict, key: str, section: str):
    if key not in table:
        raise ConfigError(f"missing required key '{key}' in [{section}]")
    return table[key]


@dataclass
class Scenario:
    name: str
    mode: str
    params: PhysicalParams
    output_dir: str | None = None
    grid: Grid | None = None
    nl_gains: NonlinearGains | None = None
    lin_gains: LinearGains | None = None
    ic: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    signal: dict = field(default_factory=dict)
    check: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _params(tbl: dict) -> PhysicalParams:
    fr = dict(tbl.get("friction", {"model": "zero"}))
    model = fr.pop("model", "zero")
    if model not in MODELS:
        hint = _suggest(str(model), MODELS)
        raise ConfigError(f"unknown friction model '{model}'{hint}")
    try:
        friction = make_friction(model, **fr)
    except TypeError as exc:
        raise ConfigError(f"friction model '{model}': {exc}") from None
    kw = {k: float(_require(tbl, k, "params")) for k in ("g", "mu", "sigma", "L", "m", "H_max")}
    for k in ("m_bar", "kappa_bar", "h_star"):
        if k in tbl:
            kw[k] = float(tbl[k])
    kw.setdefault("kappa_bar", DEFAULTS["kappa_bar"])
    return PhysicalParams(friction=friction, **kw)


def _gains(tbl: dict, params: PhysicalParams):
    nl = lin = None
    nl_kw = {k: float(tbl[k]) for k in NL_GAIN_KEYS if k in tbl}
    if nl_kw:
        for k in ("zeta", "k", "q", "delta"):
            _require(nl_kw, k, "gains")
        nl = NonlinearGains(**nl_kw)
    lin_kw = {k: float(tbl[k]) for k in LIN_GAIN_KEYS if k in tbl}
    if tbl.get("map_from_nonlinear", False):
        if nl is None:
            raise ConfigError("map_from_nonlinear needs the nonlinear gains zeta, k, q, delta")
        mapped = param_map(nl, params)
        lin_kw = {**{k: getattr(mapped, k) for k in ("K", "k3", "k4", "k5")}, **lin_kw}
    if lin_kw:
        lin = LinearGains(**lin_kw)
    return nl, lin


def _modes(val, key):
    try:
        return [(int(n), float(a)) for n, a in val]
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be a list of [mode, amplitude] pairs") from None


def parse_scenario_dict(data: dict) -> Scenario:
    _check_keys(data, "")
    mode = _require(data, "mode", "top level")
    if mode not in MODES:
        hint = _suggest(str(mode), MODES)
        raise ConfigError(f"unknown mode '{mode}'{hint}")
    params = _params(_require(data, "params", "top level"))
    sc = Scenario(name=str(data.get("name", "scenario")), mode=mode, params=params,
                  output_dir=data.get("output_dir"), raw=data)
    if "gains" in data:
        sc.nl_gains, sc.lin_gains = _gains(data["gains"], params)
    if "grid" in data:
        g = data["grid"]
        if "n_cells" in g and "n_nodes" in g:
            raise ConfigError("give either n_cells or n_nodes in [grid], not both")
        if "n_nodes" in g:
            sc.grid = Grid.from_nodes(params.L, int(g["n_nodes"]))
        else:
            sc.grid = Grid(params.L, int(_require(g, "n_cells", "grid")))
    ic = dict(data.get("ic", {}))
    for key in ("h_modes", "v_modes", "phi_modes", "phit_modes"):
        ic[key] = _modes(ic.get(key, []), key)
    ic["xi0"] = float(ic.get("xi0", 0.0))
    ic["w0"] = float(ic.get("w0", 0.0))
    sc.ic = ic
    run = dict(data.get("run", {}))
    run.setdefault("cfl_safety", DEFAULTS["cfl_safety"])
    run.setdefault("cadence", DEFAULTS["cadence"])
    run.setdefault("control", "closed_loop")
    run.setdefault("law", "state_feedback")
    run.setdefault("slack_factor", 10.0)
    run.setdefault("mass_rtol", 1e-10)
    sc.run = run
    sig = dict(data.get("signal", {}))
    sig.setdefault("kind", "zero")
    sig.setdefault("amplitude", 0.0)
    sig.setdefault("omega", 1.0)
    if sig["kind"] not in ("zero", "step", "sine"):
        raise ConfigError(f"signal kind must be zero, step or sine, got '{sig['kind']}'")
    sc.signal = sig
    sc.check = dict(data.get("check", {}))
    _validate_mode(sc)
    return sc


def _validate_mode(sc: Scenario):
    m = sc.mode
    if m in ("simulate-nonlinear", "simulate-linear", "spectrum", "lyapunov-eval", "iss-check"):
        if sc.grid is None:
            raise ConfigError(f"mode '{m}' needs a [grid] table")
    if m in ("simulate-nonlinear", "simulate-linear", "iss-check"):
        t_end = _require(sc.run, "t_end", "run")
        if not float(t_end) > 0:
            raise ConfigError("run.t_end must be positive")
    if m == "simulate-nonlinear" and sc.run["control"] == "closed_loop" and sc.nl_gains is None:
        raise ConfigError("closed-loop nonlinear runs need [gains] zeta, k, q, delta")
    if m == "simulate-linear" and sc.run["law"] in ("state_feedback", "pd") and sc.lin_gains is None:
        raise ConfigError("linear feedback runs need linear [gains] (or map_from_nonlinear = true)")
    if m in ("gains-check", "safe-radius") and sc.nl_gains is None and sc.lin_gains is None:
        raise ConfigError(f"mode '{m}' needs a [gains] table")
    if m == "safe-radius" and sc.nl_gains is None:
        raise ConfigError("safe-radius needs the nonlinear gains")
    if m == "gains-check" and sc.nl_gains is not None and "r" not in sc.check:
        raise ConfigError("missing required key 'r' in [check]")
    if m == "lyapunov-eval" and sc.nl_gains is None and sc.lin_gains is None:
        raise ConfigError("lyapunov-eval needs a [gains] table")


def parse_scenario(path) -> Scenario:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    return parse_scenario_dict(data)


def signal_function(sig: dict):
    kind, amp, om = sig["kind"], float(sig["amplitude"]), float(sig["omega"])
    if kind == "zero":
        return lambda t: 0.0
    if kind == "step":
        return lambda t: amp
    return lambda t: amp * math.sin(om * t)
