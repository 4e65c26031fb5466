"""Batch front end: run identity suites and UCP experiments from a JSON
config, emitting a JSON report and one CSV residual table per suite.

Exit codes: 0 all residuals within tolerance, 1 residual failure,
2 config parse error, 3 precondition violation.

The config is a single JSON document; the only environment override is
OUTPUT_DIR.  All randomness derives from the seed through named SplitMix64
streams, so identical config + seed reproduces identical report values.
Wall-clock timing lives in the report's ``timing`` blocks (and, only when
``timing_in_tables`` is set, in the CSV seconds column) because timings are
the one thing reruns cannot reproduce byte-for-byte.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
import time
import numpy as np

from . import normalops as no
from . import polyfield as pf
from . import spherequad as sq
from . import symtensor as st
from . import xray as xr
from .polynomial import random_homogeneous
from .rng import SplitMix64

KNOWN_SUITES = (
    "identities.algebra", "identities.ibp", "identities.john",
    "identities.prop-ray", "identities.mrt", "decompose",
    "ucp.ray", "ucp.mrt", "ucp.trt",
)

#: Default tolerances by numerical path.
TOL_EXACT = 1e-10
TOL_QUAD = 1e-6
TOL_GRID = 1e-3


class ConfigError(Exception):
    def __init__(self, message, exit_code):
        super().__init__(message)
        self.exit_code = exit_code


def load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", 2)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}", 2)


def validate_config(doc):
    """Schema and precondition checks with actionable messages."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object", 2)
    if doc.get("schema") != 1:
        raise ConfigError("config field 'schema' must equal 1", 2)
    suites = doc.get("suites")
    if not isinstance(suites, list) or not suites:
        raise ConfigError("config field 'suites' must be a nonempty list", 2)
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("config field 'seed' must be a nonnegative integer", 2)
    for pos, entry in enumerate(suites):
        if not isinstance(entry, dict) or "suite" not in entry:
            raise ConfigError(
                f"suites[{pos}] must be an object with a 'suite' field", 2)
        name = entry["suite"]
        if name not in KNOWN_SUITES:
            raise ConfigError(
                f"suites[{pos}].suite: unknown suite {name!r}; known: "
                + ", ".join(KNOWN_SUITES), 2)
        _validate_suite_params(pos, entry)
    return doc


def _validate_suite_params(pos, entry):
    name = entry["suite"]
    where = f"suites[{pos}] ({name})"

    def bad(msg):
        raise ConfigError(f"{where}: {msg}", 3)

    n = entry.get("n", 2)
    m = entry.get("m", 1)
    if not isinstance(n, int) or not isinstance(m, int):
        bad("'n' and 'm' must be integers")
    if name.startswith("ucp."):
        if name == "ucp.trt":
            if n < 3:
                bad("transverse scenario needs n >= 3")
        elif not 1 <= m <= 3:
            bad("need 1 <= m <= 3")
        if name == "ucp.mrt":
            k = entry.get("k", 1)
            if not 0 <= k < m:
                bad(f"need 0 <= k < m, got k={k}, m={m}")
    if name == "identities.john":
        for case in entry.get("cases", [{"n": 2, "m": 1}, {"n": 2, "m": 2}]):
            if case.get("m", 1) < 1:
                bad("iterated John relation needs m >= 1")
    if name == "identities.prop-ray":
        for mm in entry.get("m_values", [1, 2]):
            if not 1 <= mm <= 2:
                bad("prop-ray suite covers m in {1, 2}")
    if name == "identities.mrt":
        for mm, kk in entry.get("prop_cases", [[1, 1], [2, 1]]):
            if not 0 <= kk <= mm:
                bad(f"need 0 <= k <= m in prop_cases, got ({mm}, {kk})")
        for mm, kk in entry.get("lemma_cases", [[1, 1], [2, 1], [2, 2]]):
            if not 0 <= kk <= mm:
                bad(f"need 0 <= k <= m in lemma_cases, got ({mm}, {kk})")
    if name == "decompose":
        if entry.get("N", 128) < 16:
            bad("grid too coarse: need N >= 16")
        for mm in entry.get("m_values", [1, 2]):
            if mm < 1:
                bad("decomposition needs m >= 1")


def _row(name, value, tolerance, parameters=None, mode="below", seconds=0.0):
    ok = value <= tolerance if mode == "below" else value > tolerance
    return {"name": name, "parameters": parameters or {},
            "value": float(value), "tolerance": float(tolerance),
            "pass": bool(ok), "seconds": seconds}


# ---------------------------------------------------------------------------
# suite runners
# ---------------------------------------------------------------------------

def _run_algebra(params, rng):
    trials = params.get("trials", 50)
    max_n = params.get("max_n", 3)
    max_m = params.get("max_m", 3)
    combos = [(n, m) for n in range(2, max_n + 1) for m in range(1, max_m + 1)]
    worst = {"symmetrize_idempotent": 0.0, "ij_duality": 0.0,
             "pair_skew_symmetry": 0.0, "W_of_potential_zero": 0.0,
             "R_of_potential_zero": 0.0}
    for t in range(trials):
        n, m = combos[t % len(combos)]
        child = rng.split(f"algebra-{t}")

        dense = st.DenseTensor.from_function(
            n, m, lambda idx: child.rational(-5, 5))
        sym = st.symmetrize(dense)
        again = st.symmetrize(sym.to_dense())
        if not all(sym.get(i) == again.get(i)
                   for i in st.canonical_indices(n, m)):
            worst["symmetrize_idempotent"] = 1.0

        u = _random_sym(n, 1, child)
        fte = _random_sym(n, m, child)
        g = _random_sym(n, m + 1, child)
        if st.inner(st.i_mul(u, fte), g) != st.inner(fte, st.j_contract(u, g)):
            worst["ij_duality"] = 1.0

        field = pf.random_bump_field(n, m, child, power=m + 1, degree=2,
                                     label="skew")
        rimg = pf.operator_R(field)
        flat = rimg.key_to_index(next(iter(rimg.canonical_keys())))
        swapped = flat[1], flat[0], *flat[2:]
        direct = pf.operator_R_component(field, tuple(swapped[:2 * m]),
                                         flat[2 * m:])
        if not (direct + rimg.component_core(flat)).is_zero():
            worst["pair_skew_symmetry"] = 1.0

        v = pf.random_bump_field(n, m - 1, child, power=m + 2, degree=2,
                                 label="pot")
        pot = pf.inner_derivative(v)
        if not pf.saint_venant_W(pot).is_zero():
            worst["W_of_potential_zero"] = 1.0
        if not pf.operator_R(pot).is_zero():
            worst["R_of_potential_zero"] = 1.0

    rows = [_row(name, val, TOL_EXACT,
                 {"trials": trials, "max_n": max_n, "max_m": max_m})
            for name, val in worst.items()]

    # W <-> R equivalences including the generalized (m=2, k=1) pair
    rt_worst = 0.0
    for t in range(params.get("roundtrip_trials", 20)):
        n, m = combos[t % len(combos)]
        child = rng.split(f"roundtrip-{t}")
        field = pf.random_bump_field(n, m, child, power=m + 1, degree=2,
                                     label="rt")
        rimg = pf.operator_R(field)
        wimg = pf.saint_venant_W(field)
        if not (pf.r_to_w(rimg, m) - wimg).is_zero():
            rt_worst = 1.0
        if not (pf.w_to_r(wimg, m) - rimg).is_zero():
            rt_worst = 1.0
    rows.append(_row("rw_roundtrips_exact", rt_worst, TOL_EXACT,
                     {"trials": params.get("roundtrip_trials", 20)}))

    gen_worst = 0.0
    default_ok = True
    solved = None
    for t in range(params.get("roundtrip_trials", 20)):
        child = rng.split(f"genrt-{t}")
        field = pf.random_bump_field(2, 2, child, power=2, degree=2, label="g")
        rk = pf.generalized_R(field, 1)
        wk = pf.generalized_W(field, 1)
        if not (pf.generalized_r_to_w(rk, 2, 1) - wk).is_zero():
            gen_worst = 1.0
        if not (pf.generalized_w_to_r(wk, 2, 1) - rk).is_zero():
            default_ok = False
            if solved is None:
                solved = pf.solve_w_to_r_constant(2, 2, 1, child.split("solve"))
            if solved is None or \
                    not (pf.generalized_w_to_r(wk, 2, 1, constant=solved) - rk).is_zero():
                gen_worst = 1.0
    extra = {"m": 2, "k": 1, "default_constant_ok": default_ok}
    if solved is not None:
        extra["solved_constant"] = f"{solved.numerator}/{solved.denominator}"
    rows.append(_row("generalized_rw_roundtrips_exact", gen_worst, TOL_EXACT,
                     extra))
    return rows


def _random_sym(n, m, rng):
    out = st.SymTensor(n, m)
    for idx in st.canonical_indices(n, m):
        out[idx] = rng.rational(-5, 5)
    return out


def _run_ibp(params, rng):
    rows = []
    n_values = params.get("n_values", [2, 3])
    s_values = params.get("s_values", [1, 2, 3, 4])
    trials = params.get("trials_per_case", 20)
    for n in n_values:
        for s in s_values:
            worst = 0.0
            for t in range(trials):
                child = rng.split(f"ibp-{n}-{s}-{t}")
                pow2r = child.randint(0, 2)
                g = sq.HomogeneousRational(
                    random_homogeneous(n, s - 1 + 2 * pow2r, child), pow2r)
                for idx in itertools.product(range(n), repeat=s):
                    res = sq.verify_ibp(g, idx)
                    worst = max(worst, abs(float(res)))
            rows.append(_row("ibp_residual", worst, TOL_EXACT,
                             {"n": n, "s": s, "trials": trials}))
    spot = max(abs(float(sq.c_constant(0, 1, n)) - (n - 1)) for n in n_values)
    spot = max(spot, abs(float(sq.c_constant(1, 2, 3)) + 2.0))
    for n in n_values:
        for mdeg in s_values:
            want = np.prod([n - 1 + 2 * p for p in range(mdeg)])
            spot = max(spot, abs(float(sq.c_constant(0, mdeg, n)) - want))
    rows.append(_row("c_constant_spot_checks", spot, TOL_EXACT, {}))
    return rows


def _run_john(params, rng):
    rows = []
    cases = params.get("cases", [{"n": 2, "m": 1, "tolerance": 1e-9},
                                 {"n": 2, "m": 2, "tolerance": 1e-8}])
    for case in cases:
        n, m = case.get("n", 2), case["m"]
        tol = case.get("tolerance", 1e-9 if m == 1 else 1e-8)
        count = case.get("lines", 20)
        child = rng.split(f"john-{n}-{m}")
        f = pf.random_bump_field(n, m, child, power=2 * m + 2, degree=2,
                                 label="f")
        worst = 0.0
        for t in range(count):
            lc = child.split(f"line-{t}")
            line = xr.Line(lc.point_in_ball(n, 1.5), lc.direction(n))
            worst = max(worst, xr.verify_john_relation(f, line))
        rows.append(_row("john_relation_residual", worst, tol,
                         {"n": n, "m": m, "lines": count}))
        # potential fields: both sides vanish
        v = pf.random_bump_field(n, m - 1, child, power=3 * m + 2, degree=2,
                                 label="v")
        pot = pf.inner_derivative(v)
        line = xr.Line(child.point_in_ball(n, 1.2), child.direction(n))
        rows.append(_row("john_relation_potential",
                         xr.verify_john_relation(pot, line), tol,
                         {"n": n, "m": m}))
    return rows


def _convergence_rows(label, f, k, degrees, points, tol, kind):
    """Residual rows plus monotonicity rows shared by prop-ray/mrt suites."""
    rows = []
    per_point = []
    exprs = no.momentum_key_rhs_exprs(f, k) if kind == "mrt" else None
    for x in points:
        res_by_deg = []
        for deg in degrees:
            rule = sq.build_rule(f.n, deg)
            if kind == "ray":
                res = no.verify_ray_key_identity(f, x, rule)
                val = max(abs(v) for v in res.values())
            elif kind == "mrt":
                res = no.verify_momentum_key_identity(f, x, k, rule, rhs_exprs=exprs)
                val = max(abs(v) for v in res.values())
            else:
                val = no.verify_momentum_moment_identity(f, x, k, rule).max_abs()
            res_by_deg.append(val)
        per_point.append(res_by_deg)
    # one row per (degree, sample point); the stated tolerance is pinned at
    # the final (highest) degree, coarser degrees are trend diagnostics
    for j, deg in enumerate(degrees):
        bound = tol if j == len(degrees) - 1 else max(tol, 1e-2)
        for i, p in enumerate(per_point):
            rows.append(_row(f"{label}_residual", p[j], bound,
                             {"degree": deg, "point": i}))
    slack = max(max(p[j + 1] - p[j] for j in range(len(degrees) - 1))
                for p in per_point)
    rows.append(_row(f"{label}_residual_monotone_slack", slack, 1e-12,
                     {"degrees": list(degrees)}))
    return rows


def _quadrature_convergence_row(label, f, x, degrees, ref_degree=320):
    """Genuine quadrature convergence of the checked quantity itself.

    The value is the worst violation of (a) overall decrease across the
    sweep and (b) per-step non-increase with 10% plateau slack (kink
    positions aligning with nodes can stall one step).
    """
    rf = pf.operator_R(f)
    key = next(iter(rf.canonical_keys()))
    comp = rf.component(rf.key_to_index(key))
    scalar = pf.PolyBumpField(f.n, 0, rf.rho, rf.power, {(): comp.core})
    ref = no.n0_scalar(scalar, x, sq.build_rule(f.n, ref_degree))
    errs = [abs(no.n0_scalar(scalar, x, sq.build_rule(f.n, d)) - ref)
            for d in degrees]
    violation = max(errs[-1] - errs[0],
                    max(errs[j + 1] - 1.1 * errs[j]
                        for j in range(len(errs) - 1)))
    return _row(f"{label}_quadrature_error_decrease", violation, 0.0,
                {"degrees": list(degrees), "errors": [float(e) for e in errs]})


def _run_prop_ray(params, rng):
    rows = []
    degrees = params.get("degrees", [20, 40, 60])
    for m in params.get("m_values", [1, 2]):
        child = rng.split(f"prop-ray-{m}")
        f = pf.random_bump_field(2, m, child, power=2 * m + 2, degree=2,
                                 label="f")
        pts = [np.asarray(child.point_in_ball(2, 0.8))
               for _ in range(params.get("interior_points", 3))]
        pts.append(np.asarray([1.25, 0.45]))
        rows += _convergence_rows(f"prop_ray_m{m}", f, 0, degrees, pts,
                                  params.get("tolerance", 1e-5), "ray")
        rows.append(_quadrature_convergence_row(
            f"prop_ray_m{m}", f, np.asarray([1.25, 0.45]), degrees))
    return rows


def _run_mrt(params, rng):
    rows = []
    degrees = params.get("degrees", [20, 40, 60])
    tol = params.get("tolerance", 1e-5)
    for m, k in params.get("lemma_cases", [[1, 1], [2, 1], [2, 2]]):
        child = rng.split(f"lemma-{m}-{k}")
        f = pf.random_bump_field(2, m, child, power=2 * m + 2, degree=2,
                                 label="f")
        pts = [np.asarray(child.point_in_ball(2, 0.8)),
               np.asarray([1.15, 0.55])]
        rows += _convergence_rows(f"lemma_mrt_m{m}_k{k}", f, k, degrees, pts,
                                  tol, "lemma")
    for m, k in params.get("prop_cases", [[1, 1], [2, 1]]):
        child = rng.split(f"prop-mrt-{m}-{k}")
        f = pf.random_bump_field(2, m, child, power=2 * m + 2, degree=2,
                                 label="f")
        pts = [np.asarray(child.point_in_ball(2, 0.8)),
               np.asarray([1.15, 0.55])]
        rows += _convergence_rows(f"prop_mrt_m{m}_k{k}", f, k, degrees, pts,
                                  tol, "mrt")
    return rows


def _run_decompose(params, rng):
    rows = []
    N = params.get("N", 128)
    L = params.get("L", 4.0)
    for m in params.get("m_values", [1, 2]):
        child = rng.split(f"decompose-{m}")
        f = pf.random_bump_field(2, m, child, power=6, degree=2, label="f")
        g = no.GridTensorField.sample(f, N, L)
        sf, v = no.solenoidal_decompose(g)
        norm = g.norm_l2()
        p = {"m": m, "N": N, "L": L}
        rows.append(_row("delta_sf_relative", no.delta_field(sf).norm_l2() / norm,
                         params.get("solenoidal_tolerance", 1e-9), p))
        rec = (sf + no.d_field(v) - g).norm_l2() / norm
        rows.append(_row("reconstruction_relative", rec,
                         params.get("reconstruction_tolerance", 1e-10), p))
        nf = no.normal_symbol(g)
        nsf = no.normal_symbol(sf)
        rows.append(_row("normal_f_vs_sf_relative",
                         (nf - nsf).norm_l2() / max(nf.norm_l2(), 1e-300),
                         params.get("normal_tolerance", TOL_QUAD), p))
        v0 = pf.random_bump_field(2, m - 1, child, power=7, degree=2,
                                  label="v0")
        gp = no.GridTensorField.sample(pf.inner_derivative(v0), N, L)
        sfp, _ = no.solenoidal_decompose(gp)
        rows.append(_row("potential_sf_relative",
                         sfp.norm_l2() / gp.norm_l2(), TOL_QUAD, p))
        if m == 1:
            sfo, _ = no.helmholtz_decompose_oracle(g)
            rows.append(_row("helmholtz_oracle_relative",
                             (sf - sfo).norm_l2() / norm, 1e-10, p))
    if params.get("normal_consistency", True):
        rule = sq.build_rule(2, params.get("rule_degree", 40))
        for m, k in params.get("normal_cases", [[0, 0], [1, 0], [1, 1]]):
            child = rng.split(f"normconv-{m}-{k}")
            f = pf.random_bump_field(2, m, child, power=4, degree=2, label="f")
            rel = _normal_consistency_rel(f, k, N, L, rule)
            rows.append(_row("normal_conv_vs_angular_relative", rel, TOL_GRID,
                             {"m": m, "k": k, "N": N}))
            if params.get("refine", True) and m == 0 and k == 0:
                rel2 = _normal_consistency_rel(f, k, 2 * N, L, rule)
                rows.append(_row("normal_conv_refinement_improves",
                                 rel2 - rel, 0.0, {"m": m, "k": k, "N": 2 * N}))
    return rows


def _normal_consistency_rel(f, k, N, L, rule):
    g = no.GridTensorField.sample(f, N, L)
    conv = no.normal_convolution(g, k=k)
    coords = g.axis_coords()
    pts = np.stack(np.meshgrid(coords, coords, indexing="ij"),
                   axis=-1).reshape(-1, 2)
    ang = no.normal_momentum_on_points(f, pts, k, rule)
    angf = no.GridTensorField(2, f.m, N, L, ang.T.reshape(conv.comps.shape))
    return (conv - angf).norm_l2() / max(angf.norm_l2(), 1e-300)


def _run_ucp(name, params, rng, outdir):
    scenario = name.split(".", 1)[1]
    config = dict(params)
    config.pop("suite", None)
    if outdir and scenario in ("ray", "mrt"):
        config.setdefault("lines_csv",
                          os.path.join(outdir, f"ucp_{scenario}_lines.csv"))
    report = no.ucp_experiment(scenario, config, rng)
    rows = [dict(check, parameters={}, seconds=0.0)
            for check in report["residuals"]]
    return rows


SUITE_RUNNERS = {
    "identities.algebra": _run_algebra,
    "identities.ibp": _run_ibp,
    "identities.john": _run_john,
    "identities.prop-ray": _run_prop_ray,
    "identities.mrt": _run_mrt,
    "decompose": _run_decompose,
}


def run_suite(entry, rng, outdir):
    """Execute one configured suite; returns its report block."""
    name = entry["suite"]
    t0 = time.time()
    if name.startswith("ucp."):
        rows = _run_ucp(name, entry, rng, outdir)
    else:
        rows = SUITE_RUNNERS[name](entry, rng)
    return {
        "scenario": name,
        "config": {k: v for k, v in entry.items() if k != "suite"},
        "residuals": rows,
        "timing": {"total_seconds": time.time() - t0},
    }


def emit_tables(report, outdir, timing_in_tables=False):
    """One CSV per suite: check_name, parameters, residual, tolerance, pass,
    seconds.  The seconds column is left empty unless requested, keeping
    reruns byte-identical."""
    paths = []
    for block in report["suites"]:
        fname = block["scenario"].replace(".", "_") + ".csv"
        path = os.path.join(outdir, fname)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["check_name", "parameters", "residual",
                             "tolerance", "pass", "seconds"])
            for row in block["residuals"]:
                params = json.dumps(row.get("parameters", {}), sort_keys=True)
                secs = repr(row.get("seconds", 0.0)) if timing_in_tables else ""
                writer.writerow([row["name"], params, repr(row["value"]),
                                 repr(row["tolerance"]), row["pass"], secs])
        paths.append(path)
    return paths


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="tentomo",
        description="tensor-transform identity suites and UCP experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run configured suites")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--suite", default=None,
                       help="run only the named suite")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("--config", required=True)
    args = parser.parse_args(argv)

    try:
        doc = validate_config(load_config(args.config))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code

    if args.command == "validate":
        print(f"config ok: {len(doc['suites'])} suite(s): "
              + ", ".join(e["suite"] for e in doc["suites"]))
        return 0

    suites = doc["suites"]
    if args.suite is not None:
        suites = [e for e in suites if e["suite"] == args.suite]
        if not suites:
            print(f"error: no configured suite named {args.suite!r}",
                  file=sys.stderr)
            return 2
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    outdir = args.out or os.environ.get("OUTPUT_DIR") \
        or doc.get("output_dir") or "tentomo_out"
    os.makedirs(outdir, exist_ok=True)

    report = {"schema": 1, "seed": seed, "suites": []}
    failed = False
    for pos, entry in enumerate(suites):
        rng = SplitMix64(seed).split(f"suite-{entry['suite']}")
        try:
            block = run_suite(entry, rng, outdir)
        except (pf.BudgetError, ValueError) as exc:
            print(f"error: {entry['suite']}: {exc}", file=sys.stderr)
            return 3
        report["suites"].append(block)
        for row in block["residuals"]:
            status = "PASS" if row["pass"] else "FAIL"
            failed = failed or not row["pass"]
            print(f"[{entry['suite']}] {status} {row['name']} "
                  f"value={row['value']:.6e} tol={row['tolerance']:.1e} "
                  f"{json.dumps(row.get('parameters', {}), sort_keys=True)}")

    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    emit_tables(report, outdir,
                timing_in_tables=doc.get("timing_in_tables", False))
    print(f"report written to {outdir}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
