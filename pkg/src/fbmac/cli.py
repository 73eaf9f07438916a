"""Command-line front end: parse, dispatch, emit CSV/JSON.

Payloads are deterministic for a fixed resolved configuration (seed
included): no timestamps are embedded, numbers serialize with 6 decimals in
CSV and full precision in JSON, and every emitted file carries the resolved
configuration so a run can be reproduced from its output.  Wall time goes to
stderr only.

Exit codes: 0 success, 2 usage error, 1 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import default_seed
from .core import DomainError, PowerPair, db_to_linear, nats_to_bits
from .gaussquad import BracketError
from .regions import (
    GallagerParams,
    RegionBoundary,
    conjectured_sum_outer_boundary,
    cover_wyner_pentagon,
    gallager_boundary,
    gallager_ray,
    iid_gaussian_boundary,
    joint_outage_boundary,
    outage_splitting_boundary,
    p2p_second_order_rate,
    pentagon_ray,
    second_order_ray,
    splitting_ray,
    su_outer_box,
    sumshell_hypothetical_boundary,
    tdma_boundary,
    tdma_ray,
)
from .shellmc import (
    bessel_ratio_bound_check,
    clt_function_check,
    confusion_scaling_check,
    rn_bound_mac_check,
    rn_bound_p2p_check,
    sum_inner_product_samples,
)
from .simlink import (
    CodebookSpec,
    default_thresholds,
    mac_achievability_bound,
    p2p_achievability_bound,
    shell_rn_constants,
    simulate_mac,
    simulate_p2p,
)

_FIG1_FILES = (
    ("joint", "joint.csv"),
    ("splitting", "splitting.csv"),
    ("iid", "iid.csv"),
    ("gallager", "gallager.csv"),
    ("tdma", "tdma.csv"),
    ("su-outer", "su_outer.csv"),
    ("sumshell", "sumshell.csv"),
    ("conjectured-sum-outer", "conjectured_sum_outer.csv"),
    ("pentagon", "pentagon.csv"),
)


def emit_region(rb: RegionBoundary, fmt: str, config: dict) -> bytes:
    """Serialize a boundary; byte-identical for identical (boundary, config)."""
    if fmt == "csv":
        lines = [
            f"# fbmac {__version__}",
            "# config: " + json.dumps(config, sort_keys=True),
            f"r1_{rb.units},r2_{rb.units}",
        ]
        lines += [f"{r1:.6f},{r2:.6f}" for r1, r2 in rb.points]
        return ("\n".join(lines) + "\n").encode()
    if fmt == "json":
        payload = {
            "tool": "fbmac",
            "version": __version__,
            "config": config,
            "kind": rb.kind,
            "params": rb.params,
            "units": rb.units,
            "empty": rb.empty,
            "points": [[float(a), float(b)] for a, b in rb.points],
        }
        return (json.dumps(payload, sort_keys=True) + "\n").encode()
    raise DomainError(f"unknown format {fmt!r}")


def _emit_json(obj: dict, out) -> None:
    _write_bytes((json.dumps(obj, sort_keys=True) + "\n").encode(), out)


def _write_bytes(data: bytes, out) -> None:
    if out in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(out).write_bytes(data)


def compute_region(kind: str, n: int, eps: float, pp: PowerPair, args) -> RegionBoundary:
    points = args.points
    samples = args.samples
    seed = args.seed
    if kind == "joint":
        return joint_outage_boundary(n, eps, pp, points, samples, seed)
    if kind == "splitting":
        return outage_splitting_boundary(n, eps, pp, args.lambda_grid, points)
    if kind == "iid":
        return iid_gaussian_boundary(n, eps, pp, args.delta_rule, points, samples, seed)
    if kind == "gallager":
        return gallager_boundary(GallagerParams(args.gallager_a, n, eps), pp, points)
    if kind == "tdma":
        return tdma_boundary(n, eps, pp)
    if kind == "su-outer":
        return su_outer_box(n, eps, pp)
    if kind == "sumshell":
        return sumshell_hypothetical_boundary(n, eps, pp, points, samples, seed)
    if kind == "conjectured-sum-outer":
        return conjectured_sum_outer_boundary(n, eps, pp)
    if kind == "pentagon":
        return cover_wyner_pentagon(pp)
    raise DomainError(f"unknown region kind {kind!r}")


def _nesting_checks(n, eps, pp, samples, seed) -> dict:
    """Containment checks at 8 angles plus the symmetric-ray rate ordering.

    The TDMA ordering is a symmetric-ray statement only: near the axes time
    sharing hands one user the whole block and legitimately beats the joint
    ensembles there.
    """
    thetas = [(i + 0.5) / 8 * math.pi / 2 for i in range(8)]
    gp = GallagerParams(1.0, n, eps)
    b1 = p2p_second_order_rate(n, eps, pp.p1)
    b2 = p2p_second_order_rate(n, eps, pp.p2)
    tol = 2e-3
    checks = []
    ok = True
    for i, th in enumerate(thetas):
        r_joint = second_order_ray(n, eps, pp, th, "shell", samples, (seed, 101, i))
        r_iid = second_order_ray(n, eps, pp, th, "iid", samples, (seed, 102, i))
        r_ss = second_order_ray(n, eps, pp, th, "sumshell", samples, (seed, 103, i))
        r_split = splitting_ray(n, eps, pp, th)
        r_gal = gallager_ray(gp, pp, th)
        r_box = pentagon_ray(th, b1, b2, math.inf)
        row = {
            "theta": th,
            "iid_le_joint": bool(r_iid <= r_joint + tol),
            "splitting_le_joint": bool(r_split <= r_joint + tol),
            "joint_lt_sumshell": bool(r_joint < r_ss + tol),
            "gallager_le_joint": bool(r_gal <= r_joint + tol),
            "achievable_in_su_box": bool(max(r_joint, r_split, r_iid) <= r_box + tol),
        }
        ok = ok and all(v for k, v in row.items() if k != "theta")
        checks.append(row)
    th = math.pi / 4.0
    sym = {
        "theta": th,
        "tdma": tdma_ray(n, eps, pp, th),
        "iid": second_order_ray(n, eps, pp, th, "iid", samples, (seed, 104)),
        "splitting": splitting_ray(n, eps, pp, th),
        "joint": second_order_ray(n, eps, pp, th, "shell", samples, (seed, 105)),
        "sumshell": second_order_ray(n, eps, pp, th, "sumshell", samples, (seed, 106)),
    }
    sym["ordering_ok"] = bool(
        sym["tdma"] < sym["iid"] + tol
        and sym["iid"] < sym["splitting"] + tol
        and sym["splitting"] <= sym["joint"] + tol
        and sym["joint"] < sym["sumshell"] + tol
    )
    ok = ok and sym["ordering_ok"]
    return {"ok": ok, "rays": checks, "symmetric": sym}


def figure1_bundle(n: int, eps: float, pp: PowerPair, out_dir, points=256, samples=1 << 12, seed=0) -> dict:
    """Emit the eight comparison curves plus the pentagon and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = {
        "command": "figure1",
        "n": n,
        "eps": eps,
        "p1": pp.p1,
        "p2": pp.p2,
        "points": points,
        "samples": samples,
        "seed": seed,
        "units": "bits",
    }
    ns = argparse.Namespace(
        points=points, samples=samples, seed=seed, lambda_grid=64, delta_rule="zero", gallager_a=1.0
    )
    files = []
    for kind, fname in _FIG1_FILES:
        rb = compute_region(kind, n, eps, pp, ns).in_units("bits")
        data = emit_region(rb, "csv", {**config, "kind": kind, "file": fname})
        (out / fname).write_bytes(data)
        files.append({"name": fname, "kind": kind, "rows": int(rb.points.shape[0])})
    manifest = {
        "tool": "fbmac",
        "version": __version__,
        "config": config,
        "files": files,
        "nesting": _nesting_checks(n, eps, pp, samples, seed),
    }
    (out / "manifest.json").write_bytes((json.dumps(manifest, sort_keys=True, indent=1) + "\n").encode())
    return manifest


def _add_common(p):
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--p1-db", type=float, required=True, dest="p1_db")
    p.add_argument("--p2-db", type=float, required=True, dest="p2_db")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fbmac", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    rp = sub.add_parser("region", help="emit one rate-region boundary")
    rp.add_argument("--kind", required=True, choices=[k for k, _ in _FIG1_FILES])
    _add_common(rp)
    rp.add_argument("--points", type=int, default=256)
    rp.add_argument("--samples", type=int, default=1 << 12)
    rp.add_argument("--units", choices=["nats", "bits"], default="nats")
    rp.add_argument("--format", choices=["csv", "json"], default="csv")
    rp.add_argument("--delta-rule", default="zero", dest="delta_rule")
    rp.add_argument("--gallager-a", type=float, default=1.0, dest="gallager_a")
    rp.add_argument("--lambda-grid", type=int, default=64, dest="lambda_grid")

    pp_ = sub.add_parser("p2p", help="print the point-to-point second-order rate")
    pp_.add_argument("--n", type=int, required=True)
    pp_.add_argument("--eps", type=float, required=True)
    pp_.add_argument("--p-db", type=float, required=True, dest="p_db")
    pp_.add_argument("--units", choices=["nats", "bits"], default="nats")

    sp = sub.add_parser("simulate", help="random-coding link simulation")
    sp.add_argument("mode", choices=["p2p", "mac"])
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--p1-db", type=float, required=True, dest="p1_db")
    sp.add_argument("--p2-db", type=float, default=None, dest="p2_db")
    sp.add_argument("--m1", type=int, required=True)
    sp.add_argument("--m2", type=int, default=1)
    sp.add_argument("--trials", type=int, required=True)
    sp.add_argument("--k1", type=float, default=1.0)
    sp.add_argument("--k2", type=float, default=1.0)
    sp.add_argument("--k3", type=float, default=None)

    vp = sub.add_parser("verify", help="numeric verification verdicts")
    vsub = vp.add_subparsers(dest="target", required=True)

    v_rn1 = vsub.add_parser("rn-p2p")
    v_rn1.add_argument("--p", type=float, required=True)
    v_rn1.add_argument("--out", default=None)

    v_rn2 = vsub.add_parser("rn-mac")
    v_rn2.add_argument("--p1", type=float, required=True)
    v_rn2.add_argument("--p2", type=float, required=True)
    v_rn2.add_argument("--out", default=None)

    v_bes = vsub.add_parser("bessel")
    v_bes.add_argument("--k", type=float, default=None)
    v_bes.add_argument("--z", type=float, default=None)
    v_bes.add_argument("--grid", type=int, default=0, help="check an NxN (k, z) grid")
    v_bes.add_argument("--seed", type=int, default=None)
    v_bes.add_argument("--out", default=None)

    v_clt = vsub.add_parser("clt")
    v_clt.add_argument("--case", choices=["p2p", "mac-joint"], default="p2p")
    v_clt.add_argument("--n", type=int, required=True)
    v_clt.add_argument("--trials", type=int, default=100_000)
    v_clt.add_argument("--p", type=float, default=1.0)
    v_clt.add_argument("--p1", type=float, default=1.0)
    v_clt.add_argument("--p2", type=float, default=1.0)
    v_clt.add_argument("--seed", type=int, default=None)
    v_clt.add_argument("--out", default=None)

    v_ip = vsub.add_parser("inner-product")
    v_ip.add_argument("--n", type=int, default=100)
    v_ip.add_argument("--p1", type=float, default=1.0)
    v_ip.add_argument("--p2", type=float, default=1.0)
    v_ip.add_argument("--pairs", type=int, default=100_000)
    v_ip.add_argument("--seed", type=int, default=None)
    v_ip.add_argument("--out", default=None)

    v_cs = vsub.add_parser("confusion-scaling")
    v_cs.add_argument("--p", type=float, default=1.0)
    v_cs.add_argument("--n-list", type=int, nargs="+", default=[400, 1600], dest="n_list")
    v_cs.add_argument("--trials", type=int, default=1 << 17)
    v_cs.add_argument("--seed", type=int, default=None)
    v_cs.add_argument("--out", default=None)

    v_b = vsub.add_parser("bounds")
    v_b.add_argument("--mode", choices=["p2p", "mac-joint", "mac-splitting"], required=True)
    v_b.add_argument("--n", type=int, required=True)
    v_b.add_argument("--m1", type=int, required=True)
    v_b.add_argument("--m2", type=int, default=1)
    v_b.add_argument("--p1-db", type=float, required=True, dest="p1_db")
    v_b.add_argument("--p2-db", type=float, default=None, dest="p2_db")
    v_b.add_argument("--sim-trials", type=int, default=20_000, dest="sim_trials")
    v_b.add_argument("--bound-trials", type=int, default=200_000, dest="bound_trials")
    v_b.add_argument("--seed", type=int, default=None)
    v_b.add_argument("--out", default=None)

    fp = sub.add_parser("figure1", help="emit the full comparison bundle")
    fp.add_argument("--n", type=int, default=500)
    fp.add_argument("--eps", type=float, default=1e-3)
    fp.add_argument("--p1-db", type=float, default=0.0, dest="p1_db")
    fp.add_argument("--p2-db", type=float, default=0.0, dest="p2_db")
    fp.add_argument("--points", type=int, default=256)
    fp.add_argument("--samples", type=int, default=1 << 12)
    fp.add_argument("--seed", type=int, default=None)
    fp.add_argument("--out-dir", required=True, dest="out_dir")

    return ap


def _resolved_seed(args) -> int:
    return default_seed() if getattr(args, "seed", None) is None else args.seed


def _cmd_region(args) -> int:
    pp = PowerPair(db_to_linear(args.p1_db), db_to_linear(args.p2_db))
    args.seed = _resolved_seed(args)
    rb = compute_region(args.kind, args.n, args.eps, pp, args).in_units(args.units)
    config = {
        "command": "region",
        "kind": args.kind,
        "n": args.n,
        "eps": args.eps,
        "p1_db": args.p1_db,
        "p2_db": args.p2_db,
        "points": args.points,
        "samples": args.samples,
        "seed": args.seed,
        "units": args.units,
        "format": args.format,
        "delta_rule": args.delta_rule,
        "gallager_a": args.gallager_a,
        "lambda_grid": args.lambda_grid,
    }
    _write_bytes(emit_region(rb, args.format, config), args.out)
    return 0


def _cmd_p2p(args) -> int:
    rate = p2p_second_order_rate(args.n, args.eps, db_to_linear(args.p_db))
    if args.units == "bits":
        rate = nats_to_bits(rate)
    print(f"{rate:.6f}")
    return 0


def _cmd_simulate(args) -> int:
    seed = _resolved_seed(args)
    if args.mode == "p2p":
        spec = CodebookSpec(n=args.n, m1=args.m1, p1=db_to_linear(args.p1_db), seed=seed)
        th = default_thresholds(spec, args.k1, args.k1, args.k1)
        res = simulate_p2p(spec, th, args.trials)
    else:
        if args.p2_db is None:
            raise DomainError("--p2-db is required for mac simulation")
        spec = CodebookSpec(
            n=args.n,
            m1=args.m1,
            m2=args.m2,
            p1=db_to_linear(args.p1_db),
            p2=db_to_linear(args.p2_db),
            seed=seed,
        )
        k3 = args.k3
        if k3 is None:
            k3 = shell_rn_constants(PowerPair(spec.p1, spec.p2))[2]
        th = default_thresholds(spec, args.k1, args.k2, k3)
        res = simulate_mac(spec, th, args.trials)
    _emit_json(
        {
            "command": "simulate",
            "mode": args.mode,
            "config": {
                "n": args.n,
                "m1": args.m1,
                "m2": args.m2 if args.mode == "mac" else 1,
                "trials": args.trials,
                "seed": seed,
            },
            "trials": res.trials,
            "errors": res.errors,
            "eps_hat": res.eps_hat,
            "ci95": [res.ci95_low, res.ci95_high],
            "thresholds": [th.log_gamma1, th.log_gamma2, th.log_gamma3],
        },
        args.out,
    )
    return 0


def _cmd_verify(args) -> int:
    seed = _resolved_seed(args)
    if args.target == "rn-p2p":
        rep = rn_bound_p2p_check(args.p)
        verdict = {
            "target": "rn-p2p",
            "p": args.p,
            "max": rep.max_value,
            "argmax": rep.argmax,
            "expected_argmax": 1.0 + args.p,
            "constants": rep.constants,
            "pass": bool(rep.max_value <= 1e-9 and abs(rep.argmax - (1.0 + args.p)) <= 1e-6 * (1.0 + args.p)),
        }
    elif args.target == "rn-mac":
        pp = PowerPair(args.p1, args.p2)
        rep = rn_bound_mac_check(pp)
        target = args.p1 + args.p2
        verdict = {
            "target": "rn-mac",
            "p1": args.p1,
            "p2": args.p2,
            "max": rep.max_value,
            "argmax": rep.argmax,
            "expected_argmax": target,
            "constants": rep.constants,
            "pass": bool(rep.max_value <= 1e-9 and abs(rep.argmax - target) <= 1e-6 * target),
        }
    elif args.target == "bessel":
        if args.grid:
            rng = np.random.Generator(np.random.Philox(seed))
            ks = rng.uniform(0.0, 300.0, args.grid)
            zs = rng.uniform(1e-6, 600.0, args.grid)
            results = [bessel_ratio_bound_check(k, z).holds for k in ks for z in zs]
            verdict = {"target": "bessel", "grid": args.grid, "pass": bool(all(results))}
        else:
            if args.k is None or args.z is None:
                raise DomainError("need --k and --z (or --grid)")
            rep = bessel_ratio_bound_check(args.k, args.z)
            verdict = {
                "target": "bessel",
                "k": args.k,
                "z": args.z,
                "log_lhs": rep.log_lhs,
                "log_rhs": rep.log_rhs,
                "pass": bool(rep.holds),
            }
    elif args.target == "clt":
        pp = PowerPair(args.p1, args.p2)
        rep = clt_function_check(args.case, args.n, args.trials, seed, p=args.p, pp=pp)
        verdict = {
            "target": "clt",
            "case": args.case,
            "n": args.n,
            "trials": args.trials,
            "ks_distance": rep.ks_distance,
            "cov_rel_err": rep.cov_rel_err,
            "pass": bool(rep.ks_distance <= max(0.01, 3.0 / math.sqrt(args.n))),
        }
    elif args.target == "inner-product":
        pp = PowerPair(args.p1, args.p2)
        t = sum_inner_product_samples(args.n, pp, args.pairs, seed)
        inner = (t - pp.p1 - pp.p2) * args.n / 2.0
        ratio = float(inner.var(ddof=1) / (args.n * pp.p1 * pp.p2))
        verdict = {
            "target": "inner-product",
            "n": args.n,
            "pairs": args.pairs,
            "variance_ratio": ratio,
            "pass": bool(abs(ratio - 1.0) <= 0.05),
        }
    elif args.target == "confusion-scaling":
        pts = confusion_scaling_check(args.n_list, args.p, seed, args.trials)
        payload = [{"n": q.n, "value": q.value, "std_err": q.std_err} for q in pts]
        ratio = pts[0].value / pts[-1].value if pts[-1].value > 0 else math.inf
        expected = math.sqrt(pts[-1].n / pts[0].n)
        verdict = {
            "target": "confusion-scaling",
            "points": payload,
            "ratio_first_last": ratio,
            "expected_sqrt_ratio": expected,
            "pass": bool(0.7 * expected <= ratio <= 1.45 * expected),
        }
    elif args.target == "bounds":
        verdict = _verify_bounds(args, seed)
    else:  # pragma: no cover
        raise DomainError(f"unknown verify target {args.target!r}")
    _emit_json(verdict, getattr(args, "out", None))
    return 0


def _verify_bounds(args, seed: int) -> dict:
    p1 = db_to_linear(args.p1_db)
    if args.mode == "p2p":
        spec = CodebookSpec(n=args.n, m1=args.m1, p1=p1, seed=seed)
        th = default_thresholds(spec, 1.0, 1.0, 1.0)
        sim = simulate_p2p(spec, th, args.sim_trials)
        rhs = p2p_achievability_bound(spec, th, args.bound_trials)
    else:
        if args.p2_db is None:
            raise DomainError("--p2-db is required for mac bounds")
        p2 = db_to_linear(args.p2_db)
        spec = CodebookSpec(n=args.n, m1=args.m1, m2=args.m2, p1=p1, p2=p2, seed=seed)
        k1, k2, k3 = shell_rn_constants(PowerPair(p1, p2))
        th = default_thresholds(spec, k1, k2, k3)
        sim = simulate_mac(spec, th, args.sim_trials)
        mode = "joint" if args.mode == "mac-joint" else "splitting"
        rhs = mac_achievability_bound(spec, th, args.bound_trials, mode=mode)
    sim_se = math.sqrt(max(sim.eps_hat * (1 - sim.eps_hat), 1e-300) / sim.trials)
    margin = 2.0 * math.hypot(sim_se, rhs.std_err)
    return {
        "target": "bounds",
        "mode": args.mode,
        "eps_hat": sim.eps_hat,
        "bound": rhs.value,
        "outage": rhs.outage,
        "confusion": rhs.confusion,
        "margin": margin,
        "pass": bool(sim.eps_hat <= rhs.value + margin),
    }


def _cmd_figure1(args) -> int:
    pp = PowerPair(db_to_linear(args.p1_db), db_to_linear(args.p2_db))
    seed = _resolved_seed(args)
    manifest = figure1_bundle(args.n, args.eps, pp, args.out_dir, args.points, args.samples, seed)
    print(json.dumps({"out_dir": args.out_dir, "files": len(manifest["files"])}), file=sys.stderr)
    return 0


_DISPATCH = {
    "region": _cmd_region,
    "p2p": _cmd_p2p,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "figure1": _cmd_figure1,
}


def run(argv=None) -> int:
    """Parse, dispatch, and return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return int(exc.code or 0)
    start = time.monotonic()
    try:
        code = _DISPATCH[args.command](args)
    except DomainError as exc:
        print(f"fbmac: invalid arguments: {exc}", file=sys.stderr)
        return 2
    except (BracketError, ValueError, ArithmeticError, OSError) as exc:
        print(f"fbmac: {exc}", file=sys.stderr)
        return 1
    print(f"fbmac: done in {time.monotonic() - start:.2f}s", file=sys.stderr)
    return code


main = run  # console-script entry point


if __name__ == "__main__":
    raise SystemExit(run())
