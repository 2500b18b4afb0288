"""Command-line front end: ``polyheat <experiment> [--config FILE] [--key value ...] --out DIR``.

Every run writes ``results.csv``, ``summary.json`` and ``manifest.json`` to
the output directory. Exit status: 0 all assertions pass, 1 some assertion
failed, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
import traceback
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, _io
from . import approx_identity as ai
from . import clamped_spectrum as cs
from . import cylinder as cyl
from . import fullspace as fs
from .errors import NumericalError, PolyheatError, ValidationError
from .spectral_core import FractionalPower, Polynomial

EXIT_OK, EXIT_ASSERT, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# parameter parsing


def _positive(name, v):
    if not v > 0:
        raise ValidationError(f"{name} must be positive, got {v}")
    return v


def _count(name, v):
    if v < 1:
        raise ValidationError(f"{name} must be >= 1, got {v}")
    return v


def _factor(name, v):
    if not v > 1:
        raise ValidationError(f"{name} must exceed 1, got {v}")
    return v


def _interval(name, text):
    try:
        a, b = (float(s) for s in str(text).split(","))
    except ValueError:
        raise ValidationError(f"{name} must be 'a,b', got {text!r}") from None
    if not a < b:
        raise ValidationError(f"{name} needs a < b, got {text!r}")
    return (a, b)


def _floats(name, text):
    try:
        vals = [float(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ValidationError(f"{name} must be a comma-separated list of numbers") from None
    if not vals:
        raise ValidationError(f"{name} must not be empty")
    return vals


@dataclass(frozen=True)
class Param:
    kind: type
    default: object
    check: Callable | None = None


COMMON_SCHEDULE = {
    "t0": Param(float, 1.0, _positive),
    "factor": Param(float, 2.0, _factor),
    "count": Param(int, 11, _count),
}

EXPERIMENTS = {
    "fullspace-converge": {
        "alpha": Param(float, 2.0, _positive), "coeffs": Param(str, ""), "dim": Param(int, 1),
        "datum": Param(str, "gaussian"), "width": Param(float, 1.0, _positive),
        "K": Param(str, "-2,2", _interval), "R0": Param(float, 32.0, _positive),
        "h": Param(float, 0.125, _positive), "tol": Param(float, 5e-2, _positive),
        **COMMON_SCHEDULE,
    },
    "fullspace-positivity": {
        "alpha": Param(float, 2.0, _positive), "coeffs": Param(str, ""), "dim": Param(int, 1),
        "datum": Param(str, "bump"), "width": Param(float, 0.1, _positive),
        "amplitude": Param(float, 5.0, _positive),
        "K": Param(str, "4,5", _interval), "R0": Param(float, 32.0, _positive),
        "h": Param(float, 0.125, _positive),
        "t0": Param(float, 0.01, _positive), "factor": Param(float, 2.0, _factor),
        "count": Param(int, 20, _count),
    },
    "beam-modes": {"n_max": Param(int, 10, _count), "residual_tol": Param(float, 1e-10, _positive)},
    "bounds-sweep": {
        "omega_max": Param(float, 4.0, _positive), "omega_step": Param(float, 0.5, _positive),
        "n_max": Param(int, 5, _count), "points": Param(int, 400),
    },
    "weyl-series": {"n_max": Param(int, 20, _count), "k": Param(float, 1.0)},
    "approx-id": {
        "family": Param(str, "mu1"), "alpha": Param(float, 2.0, _positive),
        "deltas": Param(str, "1", _floats), "points": Param(int, 400),
        "t0": Param(float, 0.01, _positive), "factor": Param(float, 2.0, _factor),
        "count": Param(int, 11, _count), "final_tol": Param(float, 1e-2, _positive),
    },
    "ratio-lemma": {"t_max": Param(float, 1e8, _positive), "count": Param(int, 33, _count)},
    "cylinder-converge": {
        "datum": Param(str, "gaussian-bump"), "R": Param(float, 20.0, _positive),
        "Mx": Param(int, 256), "My": Param(int, 200), "n_modes": Param(int, 12, _count),
        "I": Param(str, "-1,1", _interval), "K": Param(str, "0.2,0.8", _interval),
        "tol": Param(float, 5e-2, _positive),
        "t0": Param(float, 1e-3, _positive), "factor": Param(float, 2.0, _factor),
        "count": Param(int, 12, _count),
    },
    "cylinder-sign": {
        "datum": Param(str, "sign-changing"), "R": Param(float, 20.0, _positive),
        "Mx": Param(int, 256), "My": Param(int, 200), "n_modes": Param(int, 12, _count),
        "I": Param(str, "-1,1", _interval), "K": Param(str, "0.2,0.8", _interval),
        "t0": Param(float, 1e-3, _positive), "factor": Param(float, 2.0, _factor),
        "count": Param(int, 12, _count),
    },
    "remainder": {
        "k": Param(float, 1.0), "ell": Param(float, 2.0), "n_max": Param(int, 50, _count),
        "R": Param(float, 20.0, _positive), "Mx": Param(int, 256), "My": Param(int, 200),
        "n_modes": Param(int, 12, _count),
        "t0": Param(float, 0.01, _positive), "factor": Param(float, 2.0, _factor),
        "count": Param(int, 8, _count),
    },
}


def _norm_key(key: str) -> str:
    return key.lstrip("-").replace("-", "_")


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[_norm_key(k.strip())] = v.strip()
    return out


def resolve_params(experiment: str, raw: dict) -> dict:
    schema = EXPERIMENTS[experiment]
    lookup = {k.lower(): k for k in schema}
    params = {}
    for key, value in raw.items():
        name = lookup.get(key.lower())
        if name is None:
            raise ValidationError(f"unknown parameter '{key}' for {experiment}")
        params[name] = value
    out = {}
    for name, p in schema.items():
        value = params.get(name, p.default)
        if p.kind is not str:
            try:
                num = float(value)
            except (TypeError, ValueError):
                raise ValidationError(f"parameter '{name}' must be numeric, got {value!r}") from None
            if p.kind is int:
                if num != int(num):
                    raise ValidationError(f"parameter '{name}' must be an integer, got {value!r}")
                num = int(num)
            if isinstance(num, float) and not math.isfinite(num):
                raise ValidationError(f"parameter '{name}' must be finite")
            value = num
        out[name] = p.check(name, value) if p.check else value
    return out


def _schedule(p):
    return fs.geometric_schedule(p["t0"], p["factor"], p["count"])


def _symbol(p):
    if p["coeffs"]:
        coeffs = {}
        for term in p["coeffs"].split(";"):
            try:
                idx, c = term.split(":")
                coeffs[tuple(int(i) for i in idx.split(","))] = float(c)
            except ValueError:
                raise ValidationError(f"coeffs term {term!r} must look like '4,0:1'") from None
        return Polynomial(coeffs)
    return FractionalPower(p["alpha"])


# ---------------------------------------------------------------------------
# experiments; each returns (header, rows, summary, assertions)


def _fullspace_datum(p, dim):
    kind = p["datum"]
    if kind == "gaussian":
        return fs.InitialDatum.unit_mass_gaussian(p["width"], dim)
    if kind == "bump":
        r = p["width"]
        return fs.InitialDatum.bump_indicator(0.0, r, p.get("amplitude", 1 / (2 * r) ** dim), dim)
    if kind == "odd":
        return fs.InitialDatum.signed_mix([(0.5, 1.0, 1.0), (-0.5, 1.0, -1.0)], dim)
    path = Path(kind)
    if path.suffix == ".csv":
        return fs.InitialDatum.from_csv(path)
    raise ValidationError(f"unknown datum '{kind}' (gaussian, bump, odd or a .csv path)")


def _window(p, dim):
    return fs.CompactWindow((p["K"],) * dim)


def run_fullspace_converge(p, out):
    spec = _symbol(p)
    dim = spec.dim if isinstance(spec, Polynomial) else p["dim"]
    u0 = _fullspace_datum(p, dim)
    policy = fs.GridPolicy(p["R0"], p["h"], dim)
    res = fs.convergence_experiment(u0, spec, _window(p, dim), _schedule(p), policy)
    rows = [(r.t, r.c_t, r.sup_deviation, r.min_value) for r in res]
    dev = np.array([r.sup_deviation for r in res])
    half = len(dev) // 2
    summary = {"mass": res[0].mass, "final_sup_deviation": dev[-1],
               "grids": [{"t": r.t, "R": r.grid.extent, "M": r.grid.points} for r in res]}
    checks = {"tail_decreasing": bool(np.all(np.diff(dev[half:]) < 0)),
              "final_below_tol": bool(dev[-1] <= p["tol"])}
    return ["t", "c_t", "sup_deviation", "min_on_K"], rows, summary, checks


def run_fullspace_positivity(p, out):
    spec = _symbol(p)
    dim = spec.dim if isinstance(spec, Polynomial) else p["dim"]
    u0 = _fullspace_datum(p, dim)
    policy = fs.GridPolicy(p["R0"], p["h"], dim)
    K = _window(p, dim)
    ts = _schedule(p)
    pos = fs.time_to_positivity(u0, spec, K, ts, policy)
    M = fs.normalization_M(spec, dim)
    rows = []
    for t, mn in zip(ts, pos.min_values):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prof = fs.rescaled_profile(u0, spec, t, K, policy.grid_for(spec, t), M)
        rows.append((t, prof.c_t, prof.sup_deviation, mn))
    summary = {"T_estimate": pos.T_estimate, "min_values": pos.min_values}
    checks = {"early_negative": bool(min(pos.min_values) < 0), "T_estimate_found": pos.T_estimate is not None}
    return ["t", "c_t", "sup_deviation", "min_on_K"], rows, summary, checks


def run_beam_modes(p, out):
    modes = cs.beam_wavenumbers(p["n_max"])
    rows = [(m.n, m.k, m.alpha, m.residual, m.in_interval()) for m in modes]
    summary = {"k": [m.k for m in modes]}
    checks = {"residual_ok": all(m.residual <= p["residual_tol"] for m in modes),
              "k_in_J_n": all(m.in_interval() for m in modes)}
    return ["n", "k_n", "alpha_n", "residual", "in_J_n"], rows, summary, checks


def run_bounds_sweep(p, out):
    w = np.arange(0.0, p["omega_max"] + 0.5 * p["omega_step"], p["omega_step"])
    omegas = np.concatenate([-w[:0:-1], w])
    rep = cs.verify_lemma_mu(omegas, p["n_max"], p["points"])
    summary = {"violations": rep.violations, "max_slack": float(rep.slack.max())}
    checks = {"zero_violations": rep.ok}
    return ["omega", "n", "mu_n", "lower_bound", "upper_bound"], list(rep.rows()), summary, checks


def run_weyl_series(p, out):
    ws = cs.weyl_series(p["n_max"], p["k"])
    alpha = [m.alpha for m in cs.beam_wavenumbers(p["n_max"])]
    rows = [(n + 1, a, term, s) for n, (a, term, s) in enumerate(zip(alpha, ws.terms, ws.partial_sums))]
    summary = {"partial_sum": ws.partial_sums[-1], "tail_bound": ws.tail_bound,
               "upper_estimate": ws.upper_estimate, "remark_rhs": ws.remark_rhs,
               "remark_bound_holds": ws.remark_bound_holds}
    checks = {"terms_decreasing": bool(np.all(np.diff(ws.terms) < 0)),
              "remark_bound_holds": bool(ws.remark_bound_holds)}
    return ["n", "alpha_n", "term", "partial_sum"], rows, summary, checks


def run_approx_id(p, out):
    ts = _schedule(p)
    deltas = p["deltas"]
    if p["family"] == "mu1":
        mu1 = ai.discrete_mu1(p["points"])
        fam = ai.mu1_family(mu1)
        alpha1 = mu1.alpha1
    elif p["family"] == "power":
        fam = ai.power_family(p["alpha"], 1)
        alpha1 = None
    else:
        raise ValidationError("family must be 'mu1' or 'power'")
    rep = ai.check_approx_identity(fam, deltas, ts, p["final_tol"])
    header = ["t"] + [f"tail_mass_{d:g}" for d in deltas] + ["ratio", "slope_estimate"]
    checks = {"nonnegative": rep.nonneg_ok, "unit_mass": rep.norm_ok, "tail_decreasing": rep.decay_ok,
              "final_tail_below_tol": rep.final_ok}
    summary = {"failures": rep.failures}
    ratio = [math.nan] * len(ts)
    slope = math.nan
    if alpha1 is not None:
        decays = [ai.tail_decay(fam, alpha1, d, ts) for d in deltas]
        ratio = list(decays[0].envelope)
        slope = decays[0].slope
        summary.update({"slopes": {d: td.slope for d, td in zip(deltas, decays)},
                        "envelope_slopes": {d: td.envelope_slope for d, td in zip(deltas, decays)},
                        "alpha1_discrete": alpha1})
        checks["slope_quarter"] = all(abs(td.slope + 0.25) <= 0.05 for td in decays)
        checks["below_envelope"] = all(td.envelope_ok for td in decays)
        checks["envelope_slope_quarter"] = all(abs(td.envelope_slope + 0.25) <= 0.05 for td in decays)
    else:
        slope = ai.loglog_slope(ts, rep.tail_masses[deltas[0]]) if all(
            v > 0 for v in rep.tail_masses[deltas[0]]) else -math.inf
    rows = [(t, *[rep.tail_masses[d][i] for d in deltas], ratio[i], slope) for i, t in enumerate(ts)]
    return header, rows, summary, checks


def run_ratio_lemma(p, out):
    ts = ai.default_ratio_schedule(p["count"], p["t_max"])
    results = [ai.f_over_g_ratio(inst, ts) for inst in ai.builtin_ratio_instances()]
    rows = []
    for i, r in enumerate(results):
        for j, t in enumerate(r.t_schedule):
            rows.append((i, r.instance.alpha, r.instance.n, t, r.f_closed[j], r.f_quadrature[j], r.g[j],
                         r.ratio[j], r.slope))
    summary = {"instances": [{"label": r.instance.label(), "slope": r.slope,
                              "bound_exponent": r.instance.bound_exponent,
                              "max_rel_diff": r.max_rel_diff} for r in results]}
    checks = {"closed_form_matches_quadrature": all(r.closed_form_ok for r in results),
              "slopes_within_bound": all(r.slope_ok for r in results)}
    return (["instance", "alpha", "n", "t", "f_closed", "f_quadrature", "g", "ratio", "slope_estimate"],
            rows, summary, checks)


def _cylinder_datum(p):
    kw = dict(extent=p["R"], points_x=p["Mx"], points_y=p["My"])
    kind = p.get("datum", "gaussian-bump")
    if kind == "gaussian-bump":
        return cyl.CylinderDatum.gaussian_bump(**kw)
    if kind == "sign-changing":
        return cyl.CylinderDatum.sign_changing(**kw)
    if kind == "negative":
        return cyl.CylinderDatum.gaussian_bump(scale=-1.0, **kw)
    if Path(kind).suffix == ".csv":
        return cyl.CylinderDatum.from_csv(kind, **kw)
    raise ValidationError(f"unknown datum '{kind}' (gaussian-bump, sign-changing, negative or a .csv path)")


def _solver(p):
    if p["n_modes"] > p["My"]:
        raise ValidationError(f"n_modes = {p['n_modes']} exceeds My = {p['My']}")
    return cyl.CylinderSolver(_cylinder_datum(p), p["n_modes"])


def run_cylinder_converge(p, out):
    solver = _solver(p)
    rep = cyl.asymptotic_profile(solver, _schedule(p), p["I"], p["K"])
    rows = [(t, d, f, fld.ct.log_ct) for t, d, f, fld in zip(rep.t_schedule, rep.sup_deviation, rep.flatness,
                                                             rep.fields)]
    last = rep.fields[-1]
    slices = [(last.t, x, y, last.scaled_u[i, j] * math.exp(-last.t * last.ct.shift), last.ct_u[i, j])
              for i, x in enumerate(last.x) for j, y in enumerate(last.y)]
    _io.write_csv(Path(out) / "slices.csv", ["t", "x", "y", "u", "ct_u"], slices)
    thresh = p["tol"] * rep.target_max
    summary = {"projection": rep.projection, "threshold": thresh, "final_sup_dev": rep.sup_deviation[-1]}
    checks = {"tail_decreasing": rep.tail_decreasing(), "final_below_tol": bool(rep.sup_deviation[-1] <= thresh),
              "flatness_decreasing": rep.flatness_decreasing()}
    return ["t", "sup_dev", "x_flatness", "log_ct"], rows, summary, checks


def run_cylinder_sign(p, out):
    solver = _solver(p)
    rep = cyl.sign_pattern(solver, _schedule(p), p["I"], p["K"])
    rows = [(t, bool(np.all(m)), float(np.mean(m)), mn) for t, m, mn in zip(rep.t_schedule, rep.sign_maps,
                                                                           rep.min_scaled)]
    summary = {"projection": rep.projection, "T_estimate": rep.T_estimate}
    checks = {"T_estimate_found": rep.T_estimate is not None, "final_all_match": rep.final_all_match}
    return ["t", "all_match", "match_fraction", "min_scaled_u"], rows, summary, checks


def run_remainder(p, out):
    p = dict(p, datum="gaussian-bump")
    solver = _solver(p)
    rep = cyl.remainder_diagnostic(solver, _schedule(p), p["k"], p["ell"], p["n_max"])
    rows = [(t, lv, math.exp(lv)) for t, lv in zip(rep.t_schedule, rep.log_values)]
    summary = {"fitted_order": rep.fitted_order, "cauchy_increment": rep.cauchy_increment,
               "series_sum": rep.series_partial_sums[-1], "spectral_gap": rep.spectral_gap}
    checks = {"decreasing": rep.decreasing, "order_ok": rep.order_ok, "cauchy_ok": rep.cauchy_ok}
    return ["t", "log_ct_remainder", "ct_remainder"], rows, summary, checks


RUNNERS = {
    "fullspace-converge": run_fullspace_converge,
    "fullspace-positivity": run_fullspace_positivity,
    "beam-modes": run_beam_modes,
    "bounds-sweep": run_bounds_sweep,
    "weyl-series": run_weyl_series,
    "approx-id": run_approx_id,
    "ratio-lemma": run_ratio_lemma,
    "cylinder-converge": run_cylinder_converge,
    "cylinder-sign": run_cylinder_sign,
    "remainder": run_remainder,
}


# ---------------------------------------------------------------------------
# entry point


def _parse_args(argv):
    parser = argparse.ArgumentParser(prog="polyheat", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("experiment", choices=sorted(RUNNERS))
    parser.add_argument("--config", help="flat key = value file")
    parser.add_argument("--out", required=True, help="output directory")
    args, rest = parser.parse_known_args(argv)
    overrides = {}
    i = 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--"):
            raise ValidationError(f"unexpected argument {tok!r}")
        if "=" in tok:
            k, v = tok.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(rest):
                raise ValidationError(f"missing value for {tok}")
            k, v = tok, rest[i + 1]
            i += 2
        overrides[_norm_key(k)] = v
    return args, overrides


def run(experiment: str, raw_params: dict, out) -> int:
    """Run one experiment; always writes manifest.json."""
    out = Path(out)
    start = time.perf_counter()
    manifest = {"experiment": experiment, "version": __version__, "config": dict(raw_params),
                "assertions": {}, "status": "error"}
    code = EXIT_NUMERICAL
    try:
        params = resolve_params(experiment, raw_params)
        manifest["resolved"] = params
        out.mkdir(parents=True, exist_ok=True)
        header, rows, summary, checks = RUNNERS[experiment](params, out)
        _io.write_csv(out / "results.csv", header, rows)
        _io.write_json(out / "summary.json", {"experiment": experiment, "parameters": params, **summary})
        manifest["assertions"] = checks
        code = EXIT_OK if all(checks.values()) else EXIT_ASSERT
        manifest["status"] = "pass" if code == EXIT_OK else "fail"
    except ValidationError as exc:
        code = EXIT_VALIDATION
        manifest["message"] = str(exc)
        print(f"polyheat: invalid configuration: {exc}", file=sys.stderr)
    except (NumericalError, PolyheatError, ArithmeticError, np.linalg.LinAlgError) as exc:
        code = EXIT_NUMERICAL
        manifest["message"] = f"{type(exc).__name__}: {exc}"
        print(f"polyheat: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
    except Exception as exc:  # still leave a manifest behind
        code = EXIT_NUMERICAL
        manifest["message"] = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        print(f"polyheat: unexpected failure: {manifest['message']}", file=sys.stderr)
    finally:
        manifest["exit_code"] = code
        manifest["wall_time_s"] = time.perf_counter() - start
        _io.write_json(out / "manifest.json", manifest)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args, overrides = _parse_args(argv)
    except ValidationError as exc:
        print(f"polyheat: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    raw = {}
    if args.config:
        try:
            raw.update(read_config_file(args.config))
        except ValidationError as exc:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            _io.write_json(Path(args.out) / "manifest.json",
                           {"experiment": args.experiment, "version": __version__, "status": "error",
                            "message": str(exc), "exit_code": EXIT_VALIDATION, "assertions": {}})
            print(f"polyheat: invalid configuration: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
    raw.update(overrides)
    code = run(args.experiment, raw, args.out)
    print(f"polyheat {args.experiment}: exit {code} -> {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
