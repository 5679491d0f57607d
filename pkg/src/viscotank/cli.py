"""Command-line front end: ``viscotank run|check-gains|spectrum <scenario.toml>``."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .clf import (
    clf_V, clf_V_tilde, energy_E, energy_W, linear_clf_W_tilde, p_bounds, safe_radius_R,
)
from .controllers import (
    check_linear_gain_inequality, check_mapped_gain_inequality, check_nonlinear_gains,
)
from .errors import BlowUpError, ConfigError, DomainError, TankError
from .linear import (
    LINEAR_CSV_HEADER, LinearRunConfig, assemble_operator, iss_check, mode_state,
    resolvent_residual, run_linear, spectrum_discrete,
)
from .model import state_norm_X
from .nonlinear import (
    NONLINEAR_CSV_HEADER, MonitorConfig, NonlinearRunConfig, perturbed_state, run_closed_loop, write_csv,
)
from .scenario import Scenario, parse_scenario, signal_function

SCHEMA_VERSION = 1

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_BLOWUP, EXIT_CERTIFICATE = 0, 2, 3, 4, 5


# ---------------------------------------------------------------------------
# JSON with 17 significant digits

def _encode(obj) -> str:
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return "%.17g" % x if math.isfinite(x) else "null"
    if isinstance(obj, complex):
        return _encode({"re": obj.real, "im": obj.imag})
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj) -> str:
    return _encode(obj) + "\n"


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps({"schema_version": SCHEMA_VERSION, **obj}))


# ---------------------------------------------------------------------------
# mode handlers; each returns (exit code, report dict)

def _nl_initial(sc: Scenario):
    ic = sc.ic
    return perturbed_state(sc.params, sc.grid, ic["xi0"], ic["w0"], ic["h_modes"], ic["v_modes"])


def _lin_initial(sc: Scenario):
    ic = sc.ic
    return mode_state(sc.params, sc.grid, ic["phi_modes"], ic["phit_modes"], ic["xi0"], ic["w0"])


def _run_exit(res) -> int:
    if res.blowup:
        return EXIT_BLOWUP
    return EXIT_VIOLATION if res.violations else EXIT_OK


def simulate_nonlinear(sc: Scenario, out: str):
    run = sc.run
    control = run["control"]
    cfg = NonlinearRunConfig(
        sc.params, sc.grid, _nl_initial(sc), float(run["t_end"]), gains=sc.nl_gains,
        cfl_safety=float(run["cfl_safety"]), control=control,
        force=signal_function(sc.signal) if control == "prescribed" else None,
        cadence=int(run["cadence"]), dt=run.get("dt"),
        monitors=MonitorConfig(mass_rtol=float(run["mass_rtol"]), slack_factor=float(run["slack_factor"])),
    )
    res = run_closed_loop(cfg)
    write_csv(os.path.join(out, "timeseries.csv"), res.records, NONLINEAR_CSV_HEADER)
    report = {"mode": sc.mode, "name": sc.name, **res.summary()}
    if sc.nl_gains is not None:
        report["R"] = safe_radius_R(sc.nl_gains, sc.params).R
        report["V0"] = res.records[0].V
    return _run_exit(res), report


def simulate_linear(sc: Scenario, out: str):
    run = sc.run
    law = run["law"]
    cfg = LinearRunConfig(
        sc.params, sc.grid, _lin_initial(sc), float(run["t_end"]), law=law, gains=sc.lin_gains,
        force=signal_function(sc.signal) if law == "prescribed" else None,
        cfl_safety=float(run["cfl_safety"]), dt=run.get("dt"), cadence=int(run["cadence"]),
    )
    res = run_linear(cfg)
    write_csv(os.path.join(out, "timeseries.csv"), res.records, LINEAR_CSV_HEADER)
    return _run_exit(res), {"mode": sc.mode, "name": sc.name, **res.summary()}


def spectrum(sc: Scenario, out: str):
    n_modes = int(sc.check.get("n_modes", 5))
    method = sc.check.get("method", "structured")
    res = spectrum_discrete(assemble_operator(sc.params, sc.grid), n_modes, method=method)
    report = {"mode": "spectrum", "name": sc.name, "n_nodes": sc.grid.n_nodes, "method": method,
              **res.to_dict()}
    write_json(os.path.join(out, "spectrum.json"), report)
    return EXIT_OK, report


def gains_check(sc: Scenario, out: str):
    certs = []
    if sc.nl_gains is not None:
        certs.append(check_nonlinear_gains(sc.nl_gains, sc.params, float(sc.check["r"])))
        certs.append(check_mapped_gain_inequality(sc.nl_gains, sc.params))
    if sc.lin_gains is not None and sc.lin_gains.K is not None:
        certs.append(check_linear_gain_inequality(sc.lin_gains, sc.params))
    report = {"mode": "gains-check", "name": sc.name, "passed": all(c.passed for c in certs),
              "certificates": [c.to_dict() for c in certs]}
    write_json(os.path.join(out, "certificate.json"), report)
    return (EXIT_OK if report["passed"] else EXIT_CERTIFICATE), report


def safe_radius(sc: Scenario, out: str):
    safe = safe_radius_R(sc.nl_gains, sc.params)
    report = {"mode": "safe-radius", "name": sc.name, "R": safe.R, "Q": safe.Q,
              "zeta1": safe.zeta1, "zeta2": safe.zeta2}
    if "r" in sc.check:
        r = float(sc.check["r"])
        report["r"] = r
        report["p1"], report["p2"] = p_bounds(r, sc.nl_gains, sc.params)
    write_json(os.path.join(out, "safe_radius.json"), report)
    return EXIT_OK, report


def lyapunov_eval(sc: Scenario, out: str):
    report = {"mode": "lyapunov-eval", "name": sc.name}
    p, g = sc.params, sc.grid
    if sc.nl_gains is not None:
        s = _nl_initial(sc)
        report.update(V=clf_V(s, sc.nl_gains, p, g), E=energy_E(s, p, g), W=energy_W(s, p, g),
                      norm_X=state_norm_X(s, p, g), R=safe_radius_R(sc.nl_gains, p).R)
        if sc.nl_gains.has_v_tilde_extras():
            report["Vtilde"] = clf_V_tilde(s, sc.nl_gains, p, g)
    if sc.lin_gains is not None and sc.lin_gains.K is not None:
        report["Wtilde"] = linear_clf_W_tilde(_lin_initial(sc), sc.lin_gains, p, g)
    write_json(os.path.join(out, "lyapunov.json"), report)
    return EXIT_OK, report


def iss(sc: Scenario, out: str, seed: int):
    rng = np.random.default_rng(seed)
    n_ic = max(5, int(sc.check.get("n_ic", 5)))
    amp = float(sc.signal["amplitude"]) or 0.01
    ics = []
    for _ in range(n_ic):
        phi = [(1, 0.01)] + [(n, 0.01 * rng.standard_normal()) for n in (2, 3, 4)]
        pt = [(n, 0.01 * rng.standard_normal()) for n in (1, 2)]
        ics.append(mode_state(sc.params, sc.grid, phi, pt))
    om = float(sc.signal["omega"])
    signals = [lambda t: 0.0, lambda t: amp, lambda t: amp * math.sin(om * t)]
    res = iss_check(sc.params, sc.grid, ics, signals, float(sc.run["t_end"]),
                    cfl_safety=float(sc.run["cfl_safety"]))
    report = {"mode": "iss-check", "name": sc.name, "seed": seed, **res.to_dict()}
    write_json(os.path.join(out, "iss.json"), report)
    return (EXIT_OK if res.passed else EXIT_CERTIFICATE), report


RHS_LIBRARY = {
    "exp_cos": lambda L: (lambda x: np.exp(np.cos(2.0 * math.pi * np.asarray(x) / L))),
    "cos1": lambda L: (lambda x: np.cos(math.pi * np.asarray(x) / L)),
    "const": lambda L: (lambda x: np.ones_like(np.asarray(x, dtype=float))),
}


def resolvent_check(sc: Scenario, out: str):
    name = sc.check.get("f3", "exp_cos")
    if name not in RHS_LIBRARY:
        raise ConfigError(f"unknown right-hand side '{name}', expected one of {sorted(RHS_LIBRARY)}")
    n_terms = int(sc.check.get("n_terms", 256))
    q_bar = float(sc.check.get("q_bar", 0.0))
    resid = resolvent_residual(RHS_LIBRARY[name](sc.params.L), q_bar, sc.params, n_terms)
    report = {"mode": "resolvent-check", "name": sc.name, "f3": name, "n_terms": n_terms,
              "q_bar": q_bar, "residual": resid}
    write_json(os.path.join(out, "resolvent.json"), report)
    return EXIT_OK, report


def dispatch(sc: Scenario, out: str, seed: int = 0):
    os.makedirs(out, exist_ok=True)
    handlers = {
        "simulate-nonlinear": simulate_nonlinear, "simulate-linear": simulate_linear,
        "spectrum": spectrum, "gains-check": gains_check, "safe-radius": safe_radius,
        "lyapunov-eval": lyapunov_eval, "resolvent-check": resolvent_check,
    }
    if sc.mode == "iss-check":
        code, report = iss(sc, out, seed)
    else:
        code, report = handlers[sc.mode](sc, out)
    if sc.mode in ("simulate-nonlinear", "simulate-linear"):
        write_json(os.path.join(out, "summary.json"), {**report, "exit_code": code})
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(human_report(report, code))
    return code, report


def human_report(report: dict, code: int) -> str:
    lines = [f"scenario {report.get('name')} ({report.get('mode')}): exit {code}"]
    for key, val in report.items():
        if key in ("name", "mode"):
            continue
        if isinstance(val, (float, int, str, bool)):
            lines.append(f"  {key} = {val}")
    for v in report.get("violations", []):
        lines.append(f"  violation {v['kind']} at t={v['t']:.6g}: {v['value']:.6g} (limit {v['limit']:.6g})")
    for c in report.get("certificates", []):
        status = "pass" if c["passed"] else "FAIL " + ", ".join(c["violated"])
        lines.append(f"  certificate {c['law']}: {status}")
    return "\n".join(lines) + "\n"


def _diagnose(exc: Exception, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="viscotank", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run the scenario's mode"), ("check-gains", "evaluate gain certificates"),
                        ("spectrum", "discrete versus analytic eigenvalues")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("scenario")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized families")
    args = ap.parse_args(argv)
    try:
        sc = parse_scenario(args.scenario)
        if args.command == "check-gains":
            sc.mode = "gains-check"
            if sc.nl_gains is None and sc.lin_gains is None:
                raise ConfigError("check-gains needs a [gains] table")
            if sc.nl_gains is not None and "r" not in sc.check:
                raise ConfigError("missing required key 'r' in [check]")
        elif args.command == "spectrum":
            sc.mode = "spectrum"
            if sc.grid is None:
                raise ConfigError("spectrum needs a [grid] table")
        out = args.out or sc.output_dir or os.path.join("out", sc.name)
        code, report = dispatch(sc, out, args.seed)
    except (ConfigError, DomainError) as exc:
        return _diagnose(exc, EXIT_CONFIG)
    except BlowUpError as exc:
        return _diagnose(exc, EXIT_BLOWUP)
    except TankError as exc:
        return _diagnose(exc, EXIT_CONFIG)
    sys.stdout.write(human_report(report, code))
    return code


if __name__ == "__main__":
    sys.exit(main())
