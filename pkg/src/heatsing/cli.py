"""Command-line interface: reproducible experiments with machine-readable output.

Exit codes: 0 decided/pass, 1 runtime failure, 2 usage or parse error,
3 inconclusive.  Every JSON output embeds its run manifest; CSV files are
accompanied by the JSON written next to them.  Outputs contain no wall-clock
timestamp unless SOURCE_DATE_EPOCH is set or --timestamp is given, so repeated
runs of deterministic commands are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import DomainError, ParseError, SolverError, VerdictContradiction
from .kernel import (PoleConfig, Side, SpaceTimePoint, appell_point,
                     heat_residual_fd, log_appell_multiplier, log_h,
                     log_h_tilde, point)
from .profiles import profile_from_text, validate_profile
from .classify import ClassifyOptions, VerdictKind, classify
from .pde import RadialGrid, estimate_h_measure
from .bridge import McConfig, class_trend, simulate_crossings
from .barrier import (BarrierConfig, asymptotic_ratio_check, eval_w_over_h,
                      leading_term)

_OUT_ENV = "HEATSING_OUT"


def _sanitize(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _manifest(args, command: str) -> dict:
    options = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    stamp = None
    if getattr(args, "timestamp", False) or os.environ.get("SOURCE_DATE_EPOCH"):
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        stamp = (datetime.fromtimestamp(int(epoch), tz=timezone.utc)
                 if epoch else datetime.now(tz=timezone.utc)).isoformat()
    return {"command": command, "options": _sanitize(options),
            "profile": getattr(args, "profile", None),
            "seed": getattr(args, "seed", None),
            "version": __version__, "timestamp": stamp}


def _emit(args, payload: dict, csv_rows=None, csv_header=None, csv_name=None):
    text = json.dumps(_sanitize(payload), indent=2, sort_keys=True, allow_nan=False)
    print(text)
    out_dir = args.out or os.environ.get(_OUT_ENV)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        base = payload["manifest"]["command"]
        with open(os.path.join(out_dir, f"{base}.json"), "w", newline="\n") as fh:
            fh.write(text + "\n")
        if csv_rows is not None:
            with open(os.path.join(out_dir, csv_name or f"{base}.csv"),
                      "w", newline="\n") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(csv_header)
                writer.writerows(csv_rows)


def _parse_floats(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _side(args) -> Side:
    return Side.PLUS if args.side == "plus" else Side.MINUS


def cmd_classify(args) -> int:
    profile = profile_from_text(args.profile, args.dim, _side(args))
    options = ClassifyOptions(k_max=args.kmax, window=args.window,
                              tau_d=args.tau_d, tau_c=args.tau_c,
                              delta=args.delta, form=args.form)
    verdict = classify(profile, args.dim, options)
    validation = validate_profile(profile)
    payload = {
        "manifest": _manifest(args, "classify"),
        "verdict": {
            "kind": verdict.kind.value,
            "removability": verdict.removability,
            "rationale": verdict.rationale,
            "numeric_kind": verdict.numeric_kind.value,
            "thresholds": verdict.thresholds,
            "stats": verdict.stats,
            "window": list(verdict.window),
        },
        "profile_findings": [
            {"name": f.name, "passed": f.passed, "severity": f.severity,
             "detail": f.detail} for f in validation.findings],
    }
    rows = None
    header = None
    if args.trace:
        trace = verdict.trace
        tail = 0.0
        rows = []
        sums = verdict.partial_sums
        tails = np.cumsum(sums[::-1])[::-1]
        for k, sk in enumerate(sums):
            s_k = trace.s0 + k * trace.shell_width
            t_k = math.exp(-s_k) if profile.side is Side.PLUS else -math.exp(s_k)
            rows.append([k, repr(t_k), repr(s_k), repr(float(sk)),
                         repr(float(tails[k]))])
        header = ["k", "t_k", "s_k", "S_k", "tail_sum"]
    _emit(args, payload, rows, header, "classify_shells.csv")
    return 0 if verdict.kind is not VerdictKind.INCONCLUSIVE else 3


def cmd_solve(args) -> int:
    profile = profile_from_text(args.profile, args.dim, Side.PLUS)
    if args.n_schedule:
        schedule = [int(v) for v in _parse_floats(args.n_schedule)]
    else:
        schedule = []
        n = 256
        while n <= args.n_max:
            schedule.append(n)
            n *= 4
    grid = RadialGrid(m=args.grid, q=args.q, t_end=args.t_end)
    probes = _parse_floats(args.probe_times) if args.probe_times else [4e-3]
    est = estimate_h_measure(profile, args.dim, schedule, probes, grid)
    payload = {
        "manifest": _manifest(args, "solve"),
        "measure_estimate": {
            "verdict": est.verdict,
            "n_schedule": list(est.n_schedule),
            "probe_times": list(est.probe_times),
            "probe_values": est.probe_values,
            "extrapolated": {repr(k): v for k, v in est.extrapolated.items()},
            "rules": est.rules,
            "thresholds": est.thresholds,
        },
    }
    if "log_c_prime" in profile.meta:
        from .pde import level_set_oracle
        oracle = {}
        worst = 0.0
        for tp in est.probe_times:
            exact = float(level_set_oracle(profile, 0.0, tp))
            got = est.extrapolated[tp]
            rel = abs(got - exact) / abs(exact)
            worst = max(worst, rel)
            oracle[repr(tp)] = {"closed_form": exact, "extrapolated": got,
                                "rel_error": rel}
        payload["oracle"] = {"values": oracle, "max_rel_error": worst,
                             "within_tolerance": worst <= 0.03}
    rows = [[n, repr(tp), repr(float(est.probe_values[i, j]))]
            for i, n in enumerate(est.n_schedule)
            for j, tp in enumerate(est.probe_times)]
    _emit(args, payload, rows, ["n", "t_j", "v_n_center"], "solve_probes.csv")
    return 0 if est.verdict in ("null", "positive") else 3


def cmd_bridge(args) -> int:
    side = _side(args)
    profile = profile_from_text(args.profile, args.dim, side)
    gamma = tuple(_parse_floats(args.gamma)) if args.gamma else (0.0,) * args.dim
    pole = PoleConfig(args.dim, gamma, side)
    if args.start_time is not None:
        tau = args.start_time
    else:
        tau = 0.02 if side is Side.PLUS else -max(50.0, 2.0 * math.exp(profile.s_min))
    start = tuple(_parse_floats(args.start)) if args.start else (
        gamma if side is Side.PLUS else tuple(-2.0 * tau * g for g in gamma))
    cfg = McConfig(pole=pole, start_x=start, start_t=tau,
                   theta_grid=args.theta, levels=args.levels,
                   paths=args.paths, seed=args.seed)
    stats = simulate_crossings(profile, cfg)
    trend = class_trend(stats)
    payload = {
        "manifest": _manifest(args, "bridge"),
        "trend": {
            "label": trend.label,
            "rationale": trend.rationale,
            "from_integral_test": trend.from_integral_test,
            "block_probs": list(trend.block_probs),
            "tail_probs": list(trend.tail_probs),
            "slope": trend.slope,
            "cumulative_fraction": stats.cumulative_fraction,
        },
        "windows": [vars(w) for w in stats.windows],
        "truncated": stats.truncated,
    }
    rows = [[j + 1, repr(float(stats.levels[j])), repr(float(stats.envelope[j])),
             int(stats.counts[j]), int(stats.first_crossing_counts[j])]
            for j in range(len(stats.levels))]
    _emit(args, payload, rows,
          ["j", "t_j", "l_t_j", "crossing_count", "first_crossing_count"],
          "bridge_levels.csv")
    return 0 if trend.label in ("lower", "upper") else 3


def cmd_barrier(args) -> int:
    profile = profile_from_text(args.profile, args.dim, Side.PLUS)
    ts = _parse_floats(args.t_schedule) if args.t_schedule else [args.t]
    ns = _parse_floats(args.n_schedule) if args.n_schedule else [args.n]
    if len(ns) == 1 and len(ts) > 1:
        ns = ns * len(ts)
    report = asymptotic_ratio_check(profile, args.dim, ts, ns, split_k=args.k)
    rows = []
    if report["applicable"]:
        ok = report["in_band"] and report["off_center_in_band"]
        for c in report["checks"]:
            rows.append([repr(c.t), repr(c.n), repr(c.w_over_h),
                         repr(c.leading_full), repr(c.ratio)])
        detail = {"checks": [vars(c) for c in report["checks"]],
                  "in_band": report["in_band"],
                  "off_center_in_band": report["off_center_in_band"],
                  "moves_toward_one": report["moves_toward_one"],
                  "band": list(report["band"])}
    else:
        # convergent profile: check the one-half bound instead
        cfg = BarrierConfig(profile, args.dim, ns[0], split_k=args.k)
        vals = [eval_w_over_h(t, 0.0, cfg)[0] for t in ts]
        ok = all(abs(v) <= 0.5 for v in vals)
        rows = [[repr(t), repr(ns[0]), repr(v), "", ""] for t, v in zip(ts, vals)]
        detail = {"reason": report["reason"],
                  "half_bound_values": vals, "half_bound_ok": ok}
    payload = {"manifest": _manifest(args, "barrier"),
               "applicable": report["applicable"], "pass": ok, "report": detail}
    _emit(args, payload, rows,
          ["t", "n", "w_over_h", "leading_term", "ratio"], "barrier_ratios.csv")
    return 0 if ok else 1


def cmd_appell_check(args) -> int:
    dim = args.dim
    gamma = tuple(_parse_floats(args.gamma)) if args.gamma else (0.0,) * dim
    plus = PoleConfig(dim, gamma, Side.PLUS)
    minus = PoleConfig(dim, gamma, Side.MINUS)
    rng = np.random.Generator(np.random.Philox(key=args.seed))

    max_identity = 0.0
    max_roundtrip = 0.0
    for _ in range(args.points):
        x = rng.uniform(-2.0, 2.0, dim)
        t = rng.uniform(0.05, 2.0)
        zp = point(x, t)
        zm = appell_point(zp, "forward")
        back = appell_point(zm, "inverse")
        max_roundtrip = max(max_roundtrip,
                            float(np.max(np.abs(back.x_array - zp.x_array))),
                            abs(back.t - zp.t))
        # (A h)(zm) = h~(zm): compare in log space for relative error
        lhs = log_appell_multiplier(zm, dim, "forward") + log_h(zp, plus)
        rhs = log_h_tilde(zm, minus)
        max_identity = max(max_identity, abs(lhs - rhs) / max(1.0, abs(rhs)))
        # (A^{-1} h~)(zp) = h(zp)
        lhs2 = log_appell_multiplier(zp, dim, "inverse") + log_h_tilde(zm, minus)
        rhs2 = log_h(zp, plus)
        max_identity = max(max_identity, abs(lhs2 - rhs2) / max(1.0, abs(rhs2)))

    # operator identity on a smooth non-parabolic field
    def u_field(y, s):
        return math.sin(y[0]) * math.exp(-0.3 * s) + 0.2 * y[0] * y[0] * s

    def au_field(y, s):
        z = point(y, s)
        mapped = appell_point(z, "inverse")
        return math.exp(log_appell_multiplier(z, dim, "forward")) * u_field(
            mapped.x_array, mapped.t)

    z = point([0.4] * dim, -0.7)
    mapped = appell_point(z, "inverse")
    lhs_op = heat_residual_fd(au_field, z, 1e-3, 1e-4)
    inner = heat_residual_fd(u_field, mapped, 1e-3, 1e-4)
    factor = (math.pi ** (0.5 * dim) / 4.0) * (-z.t) ** (-0.5 * dim - 2.0) * math.exp(
        -float(np.dot(z.x_array, z.x_array)) / (4.0 * z.t))
    op_residual = abs(lhs_op - factor * inner) / max(1.0, abs(lhs_op))

    ok = max_identity < 1e-10 and max_roundtrip < 1e-12 and op_residual < 1e-4
    payload = {"manifest": _manifest(args, "appell-check"),
               "max_transform_residual": max_identity,
               "max_roundtrip_error": max_roundtrip,
               "operator_identity_residual": op_residual,
               "pass": ok}
    _emit(args, payload)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatsing",
        description="Removability laboratory for the heat equation's fundamental singularity")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--dim", type=int, default=1, help="space dimension N")
        p.add_argument("--side", choices=["plus", "minus"], default="plus")
        p.add_argument("--gamma", help="pole location, comma-separated floats")
        p.add_argument("--threads", type=int, default=0,
                       help="thread cap hint, recorded in the manifest")
        p.add_argument("--out", help=f"output directory (default ${_OUT_ENV})")
        p.add_argument("--timestamp", action="store_true",
                       help="include a wall-clock timestamp in the manifest")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("classify", help="integral-test removability verdict")
    p.add_argument("--profile", required=True)
    common(p)
    p.add_argument("--kmax", type=int, default=512)
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--tau-d", dest="tau_d", type=float, default=1.0)
    p.add_argument("--tau-c", dest="tau_c", type=float, default=1e-3)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--form", choices=["rho", "l"], default="rho")
    p.add_argument("--trace", action="store_true", help="write the shell CSV")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("solve", help="truncated problems and h-measure estimate")
    p.add_argument("--profile", required=True)
    common(p)
    p.add_argument("--n-max", dest="n_max", type=int, default=4 ** 8)
    p.add_argument("--n-schedule", dest="n_schedule", help="explicit n list")
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--q", type=float, default=1.05)
    p.add_argument("--t-end", dest="t_end", type=float, default=None)
    p.add_argument("--probe-times", dest="probe_times")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bridge", help="conditioned-process crossing statistics")
    p.add_argument("--profile", required=True)
    common(p, seed=True)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--levels", type=int, default=40)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--start", help="start point, comma-separated floats")
    p.add_argument("--start-time", dest="start_time", type=float, default=None)
    p.set_defaults(func=cmd_bridge)

    p = sub.add_parser("barrier", help="barrier quadratures and ratio checks")
    p.add_argument("--profile", required=True)
    common(p)
    p.add_argument("--t", type=float, default=1e-6)
    p.add_argument("--n", type=float, default=1e10)
    p.add_argument("--t-schedule", dest="t_schedule")
    p.add_argument("--n-schedule", dest="n_schedule")
    p.add_argument("--k", type=float, default=0.01)
    p.set_defaults(func=cmd_barrier)

    p = sub.add_parser("appell-check", help="full transform identity suite")
    common(p, seed=True)
    p.add_argument("--points", type=int, default=100)
    p.set_defaults(func=cmd_appell_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, DomainError) as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}),
              file=sys.stderr)
        return 2
    except (SolverError, VerdictContradiction) as exc:
        print(json.dumps({"error": str(exc), "kind": type(exc).__name__}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
