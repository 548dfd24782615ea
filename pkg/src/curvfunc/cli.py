"""``curvfunc <command> --config <path> [--out <dir>] [--seed <int>]``.

Every run is described by one JSON document.  The only environment override
is ``CURVFUNC_OUT`` for the output directory (``--out`` wins over it, and it
wins over the config's ``"out"``).  Exit codes: 0 success, 1 numerical or
convergence failure, 2 configuration error.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GridError, MetricError, PreconditionError, SolverError
from .fields import normalize_volume
from .flows import (DtPolicy, gradient_flow_run, level_set_hessian_check, perturbed_yamabe_run,
                    yamabe_flow_run)
from .functionals import functional_report
from .grid import build_torus_grid
from .models import from_descriptor
from .trace_equation import (embed_ode_profile, ode_integrate, ode_period_quadrature, pde_newton)
from .verify import DEFAULT_TOLERANCES, SUITES, VerifySetup, run_suites

COMMANDS = ("curvature", "verify", "flow", "trace-eq", "hessian")
FLOW_KINDS = ("gradient", "yamabe", "perturbed-yamabe")

TOLERANCES = {
    "residual": 1e-5,
    "oracle": 1e-4,
    "S_drift": 1e-5,
    "volume_drift": 1e-6,
    "orthogonality": 1e-9,
    "solver": 1e-10,
    "period": 1e-6,
    "energy_drift": 1e-8,
    "pde": 1e-8,
    "hessian": 1e-8,
}


class NumericalFailure(Exception):
    """A run finished but failed one of its judged checks."""


@dataclass
class RunConfig:
    command: str
    model: dict = None
    seed: int = 0
    out: str = "out"
    order: object = None
    resolution: int = None
    norm: str = "L2"
    tolerances: dict = field(default_factory=dict)
    section: dict = field(default_factory=dict)

    def tol(self, key):
        return self.tolerances.get(key, TOLERANCES.get(key, DEFAULT_TOLERANCES.get(key)))

    def model_descriptor(self):
        if self.model is None:
            raise ConfigError(f"command {self.command!r} needs a 'model' descriptor")
        d = dict(self.model)
        if self.order is not None:
            d["order"] = self.order
        if self.resolution is not None:
            d["resolution"] = self.resolution
        return d


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def load_config(path, command, seed=None, out=None):
    """Parse and validate the JSON run config for ``command``."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from None
    _require(isinstance(raw, dict), "config must be a JSON object")
    _require(command in COMMANDS, f"unknown command {command!r}")
    if "command" in raw:
        _require(raw["command"] == command,
                 f"config is for command {raw['command']!r}, not {command!r}")
    tols = raw.get("tolerances", {})
    _require(isinstance(tols, dict), "'tolerances' must be an object")
    for k, v in tols.items():
        _require(isinstance(v, (int, float)) and v > 0, f"tolerance {k!r} must be > 0")
    key = command.replace("-", "_")
    cfg = RunConfig(
        command=command,
        model=raw.get("model"),
        seed=int(seed if seed is not None else raw.get("seed", 0)),
        out=out or os.environ.get("CURVFUNC_OUT") or raw.get("out", "out"),
        order=raw.get("order"),
        resolution=raw.get("resolution"),
        norm=raw.get("norm", "L2"),
        tolerances=dict(tols),
        section=dict(raw.get(key, {})),
    )
    _require(cfg.norm in ("L2", "Linf"), "norm must be 'L2' or 'Linf'")
    try:
        os.makedirs(cfg.out, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {cfg.out!r} is not writable: {exc}") from None
    _require(os.access(cfg.out, os.W_OK), f"output directory {cfg.out!r} is not writable")
    return cfg


def _judged(value, tol, passed=None):
    value = float(value)
    if passed is None:
        passed = value <= tol
    return {"value": value, "tolerance": float(tol), "passed": bool(passed)}


def _write_json(cfg, name, obj):
    path = os.path.join(cfg.out, name)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return path


def _model(cfg):
    return from_descriptor(cfg.model_descriptor(), seed=cfg.seed)


# ----------------------------------------------------------------------
# commands


def run_curvature(cfg):
    model = _model(cfg)
    rep = functional_report(model.metric, cfg.norm)
    d = rep.to_dict()
    rtol = cfg.tol("residual")
    # residuals are judged; the functionals are judged against the oracle when one exists
    out = {"model": {"family": model.family, "params": model.params},
           "grid": model.chart.describe(), "norm": cfg.norm, "lemma3": d.pop("lemma3")}
    d.pop("norm")
    quantities = {}
    o = model.oracle
    # which residuals the oracle says vanish: constant s kills the trace residual,
    # Einstein or scalar flat kills (cm) and (te); unknown models are reported only
    if o.einstein is None:
        expect = dict.fromkeys(("critical_residual", "trace_residual", "einstein_residual",
                                "te_residual"))
    else:
        crit = bool(o.einstein or o.scalar_flat)
        expect = {"critical_residual": crit, "trace_residual": True,
                  "einstein_residual": bool(o.einstein), "te_residual": crit}
    for k, zero in expect.items():
        v = float(d.pop(k))
        passed = None if zero is None else bool((v <= rtol) == zero)
        quantities[k] = {"value": v, "tolerance": rtol, "expected_zero": zero, "passed": passed}
    otol = cfg.tol("oracle")
    if o.scalar_curvature is not None:
        s0 = float(o.scalar_curvature)
        n = model.metric.n
        vol = d["volume"]
        refs = {"S": s0 * s0 * vol, "H": s0 * vol, "pi_s": s0, "min_s": s0, "max_s": s0,
                "pi_s2": s0 * s0, "lambda_g": (n - 4) / (2 * n) * s0 * s0}
        if o.volume is not None:
            refs["volume"] = float(o.volume)
        for k, ref in refs.items():
            err = abs(d[k] - ref) / max(abs(ref), 1.0)
            quantities[k] = {"value": float(d[k]), "reference": ref, "relative_error": err,
                             "tolerance": otol, "passed": bool(err <= otol)}
    for k, v in d.items():
        if k not in quantities:
            quantities[k] = {"value": float(v), "tolerance": None, "passed": None}
    out["quantities"] = quantities
    _write_json(cfg, "report.json", out)
    return 0


def run_verify(cfg):
    sec = cfg.section
    suites = sec.get("suites", list(SUITES))
    _require(isinstance(suites, list) and len(suites) > 0, "verify needs a nonempty 'suites' list")
    bad = [s for s in suites if s not in SUITES]
    _require(not bad, f"unknown suites {bad}; choose from {list(SUITES)}")
    setup = dict(sec.get("setup", {}))
    setup.setdefault("seed", cfg.seed if cfg.seed else 42)
    if sec.get("debug_laplacian_sign", False):
        setup["sign_convention"] = "analyst"
    try:
        st = VerifySetup(**setup)
    except TypeError as exc:
        raise ConfigError(f"bad verify setup: {exc}") from None
    tols = {k: v for k, v in cfg.tolerances.items() if k in DEFAULT_TOLERANCES}
    checks = run_suites(suites, st, tols)
    ok = all(c.passed for c in checks)
    summary = {s: all(c.passed for c in checks if c.suite == s) for s in suites}
    _write_json(cfg, "verify.json", {"setup": st.__dict__, "suites": summary,
                                     "checks": [c.to_dict() for c in checks],
                                     "all_passed": ok})
    return 0 if ok else 1


def run_flow(cfg):
    sec = cfg.section
    kind = sec.get("kind")
    _require(kind in FLOW_KINDS, f"flow kind must be one of {list(FLOW_KINDS)}")
    steps = sec.get("steps")
    _require(isinstance(steps, int) and steps >= 0, "flow needs an integer 'steps' >= 0")
    try:
        policy = DtPolicy.coerce(sec.get("dt", 1e-3))
    except TypeError as exc:
        raise ConfigError(f"bad dt policy: {exc}") from None
    _require(policy.dt > 0 and policy.min_dt > 0, "dt and min_dt must be > 0")
    model = _model(cfg)
    g0 = normalize_volume(model.metric)
    if kind == "gradient":
        trace = gradient_flow_run(g0, steps, policy, sec.get("stop_tol"), cfg.seed)
    elif kind == "yamabe":
        trace = yamabe_flow_run(g0, steps, policy, cfg.tol("solver"), cfg.seed)
    else:
        trace = perturbed_yamabe_run(g0, steps, policy, cfg.tol("solver"), cfg.seed)
    trace.to_csv(os.path.join(cfg.out, "trace.csv"))
    S, vol = trace.column("S"), trace.column("Vol")
    checks = {}
    if kind == "gradient":
        inc = float(np.max(np.diff(S), initial=0.0))
        checks["S_increase"] = _judged(inc, 0.0)
    else:
        drift = float(np.max(np.abs(S - S[0])) / max(S[0], 1.0))
        checks["S_drift"] = _judged(drift, cfg.tol("S_drift"),
                                    True if kind == "yamabe" else None)
        checks["volume_drift"] = _judged(np.max(np.abs(vol - 1.0)), cfg.tol("volume_drift"))
        checks["volume_renormalization_total"] = _judged(
            trace.meta["volume_renormalization_total"], cfg.tol("volume_drift"))
        if kind == "perturbed-yamabe":
            checks["orthogonality_defect"] = _judged(trace.meta["max_orthogonality_defect"],
                                                     cfg.tol("orthogonality"))
        else:
            checks["S_drift"]["passed"] = None   # the plain Yamabe flow does not conserve S
    final = functional_report(trace.final_state.metric, cfg.norm).to_dict()
    for k in ("critical_residual", "trace_residual"):
        final[k] = {"value": final[k], "tolerance": cfg.tol("residual"),
                    "passed": bool(final[k] <= cfg.tol("residual"))}
    meta = {k: v for k, v in trace.meta.items()
            if k not in ("max_orthogonality_defect", "volume_renormalization_total")}
    _write_json(cfg, "final_report.json", {
        "meta": meta, "rows": len(trace), "t_final": trace.final_state.t,
        "checks": checks, "final": final})
    if trace.meta["status"] == "breakdown":
        return 1
    return 0 if all(c["passed"] is not False for c in checks.values()) else 1


def run_trace_eq(cfg):
    sec = cfg.section
    c = float(sec.get("c", 1.0))
    _require(c > 0, "c must be > 0")
    u0s = sec.get("u0", [0.25, 0.5, 0.75])
    _require(isinstance(u0s, list) and u0s, "'u0' must be a nonempty list")
    n_periods = int(sec.get("periods", 100))
    ptol, etol = cfg.tol("period"), cfg.tol("energy_drift")
    orbits, ok = [], True
    first_periodic = None
    for i, u0 in enumerate(u0s):
        u0 = float(u0)
        K = -c * c * u0 + u0**3 / 3.0
        try:
            T_ref = ode_period_quadrature(c, K)
        except ValueError:
            T_ref = None
        if abs(u0 - c) == 0.0:
            T_ref = None
        t_max = n_periods * (T_ref if T_ref else 2 * np.pi / np.sqrt(c))
        orb = ode_integrate(c, u0, 0.0, t_max)
        orb.to_csv(os.path.join(cfg.out, f"orbit_{i}.csv"))
        entry = {"u0": u0, "energy": orb.energy, "bounded": orb.bounded,
                 "period": orb.period, "constant": orb.constant,
                 "energy_drift": _judged(orb.energy_drift, etol)}
        if orb.period is not None and T_ref is not None:
            err = abs(orb.period - T_ref) / T_ref
            entry["quadrature_period"] = T_ref
            entry["period_relative_error"] = _judged(err, ptol)
            ok &= err <= ptol
            if first_periodic is None:
                first_periodic = orb
        ok &= orb.energy_drift <= etol
        orbits.append(entry)
    periods = [o["period"] for o in orbits if o["period"] is not None]
    ode = {"c": c, "periods_simulated": n_periods, "orbits": orbits,
           "periods_monotone_in_amplitude": bool(np.all(np.diff(periods) < 0))
           if len(periods) > 1 else None}
    _write_json(cfg, "ode.json", ode)

    pde_sec = sec.get("pde")
    if pde_sec is not None:
        _require(first_periodic is not None, "the PDE run needs a periodic orbit in 'u0'")
        T = first_periodic.period
        chart = build_torus_grid(2, int(pde_sec.get("resolution", 32)), (T, T),
                                 pde_sec.get("order", 4))
        init = pde_sec.get("init", "profile")
        _require(init in ("profile", "constant"), "pde init must be 'profile' or 'constant'")
        if init == "profile":
            u_init = embed_ode_profile(first_periodic, chart, 0)
        else:
            from .fields import ScalarField
            u_init = ScalarField(chart, np.full((1, 1), c))
        res = pde_newton(chart, c, u_init, cfg.tol("pde"), int(pde_sec.get("max_newton", 30)))
        u = np.broadcast_to(res.u.values, chart.shape)
        x, y = chart.coordinates()
        xx, yy = np.broadcast_arrays(x, y, u)[:2]
        lines = ["x,y,u"] + [f"{a!r},{b!r},{v!r}" for a, b, v in
                             zip(xx.ravel().tolist(), yy.ravel().tolist(), u.ravel().tolist())]
        with open(os.path.join(cfg.out, "pde_solution.csv"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        _write_json(cfg, "pde.json", {
            "c": c, "init": init, "grid": chart.describe(), "newton_iterations": res.iterations,
            "history": res.history, "residual": _judged(res.residual, cfg.tol("pde")),
            "nonconstant": bool(np.ptp(u) > 1e-6), "u_min": float(u.min()),
            "u_max": float(u.max())})
    return 0 if ok else 1


def run_hessian(cfg):
    from .curvature import scalar_curvature
    from .fields import ScalarField, integrate, project_constants
    from .flows import perturbation_solve
    model = _model(cfg)
    g = normalize_volume(model.metric)
    value = level_set_hessian_check(g, None, cfg.tol("solver"))
    # independent pure-trace evaluation of the same quadratic form
    n = g.n
    if n == 4:
        ref = 0.0
    else:
        s = ScalarField(g.chart, np.broadcast_to(scalar_curvature(g).values, g.chart.shape))
        sol = perturbation_solve(g, cfg.tol("solver"))
        phi = project_constants(s, g) - s.values - sol.v.values
        tr = ScalarField(g.chart, n * phi)
        pi_s2 = integrate(s * s, g) / g.volume
        ref = (n - 4) / (2 * n) * pi_s2 * (n - 2) / (2 * n) * integrate(tr * tr, g)
    err = abs(value - ref) / max(abs(ref), 1.0)
    _write_json(cfg, "hessian.json", {
        "model": {"family": model.family, "params": model.params}, "value": value,
        "pure_trace_reference": ref, "relative_defect": _judged(err, cfg.tol("hessian"))})
    return 0 if err <= cfg.tol("hessian") else 1


_RUN = {"curvature": run_curvature, "verify": run_verify, "flow": run_flow,
        "trace-eq": run_trace_eq, "hessian": run_hessian}


def main(argv=None):
    p = argparse.ArgumentParser(prog="curvfunc", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    args = p.parse_args(argv)
    try:
        cfg = load_config(args.config, args.command, args.seed, args.out)
        return _RUN[args.command](cfg)
    except (ConfigError, PreconditionError, GridError) as exc:
        print(f"curvfunc: configuration error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, MetricError, NumericalFailure, FloatingPointError) as exc:
        print(f"curvfunc: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
