"""Command-line interface: ``qstopwatch <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .clock import clock_report, default_protocol
from .dynamics import eigendecompose, ground_state
from .harness.config import load_config, parse_override
from .harness.io import dump_json, emit, emit_point, jsonable
from .harness.sweep import CHECKS, run_point, run_sweep
from .operators import build_hamiltonian
from .scrambling import otoc_series

log = logging.getLogger("qstopwatch")


def _config(args):
    overrides = dict(parse_override(s) for s in args.set or [])
    for key, attr in (("seed", "seed"), ("workers", "workers"), ("output_dir", "out")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, overrides)


def _out(cfg) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _ground(cfg, h):
    spec = eigendecompose(build_hamiltonian(cfg.chain(h)))
    psi, degenerate = ground_state(spec)
    return spec, psi, degenerate


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    spec, _, degenerate = _ground(cfg, args.h)
    path = _out(cfg) / "spectrum.csv"
    lines = ["index,energy"] + [f"{k},{e:.17g}" for k, e in enumerate(spec.eigenvalues)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    print(f"{spec.dim} eigenvalues -> {path}  (E0={spec.eigenvalues[0]:.12g}, "
          f"gap={spec.eigenvalues[1] - spec.eigenvalues[0]:.6g}, degenerate={degenerate})")
    return 0


def cmd_quench(args) -> int:
    cfg = _config(args)
    point = run_point(cfg, args.h)
    path = emit_point(point, _out(cfg) / f"point_h{args.h:+g}.json")
    bad = {k: len(c["violations"]) for k, c in point.checks.items()}
    print(json.dumps({"h": point.h, "lambda_q": jsonable(point.fit["lambda_q"]),
                      "fit_valid": point.fit["valid"], "violations": bad, "bundle": str(path)}))
    return 0


def cmd_heatmap(args) -> int:
    cfg = _config(args)
    t0 = time.perf_counter()
    result = run_sweep(cfg)
    files = emit(result, cfg.output_dir)
    qa = result.time_average(result.qfi_heatmap)
    ba = result.time_average(result.bound_heatmap)
    lam = result.lambda_curve
    summary = {
        "points": len(result.points),
        "seconds": round(time.perf_counter() - t0, 2),
        "argmax_h_qfi_time_average": float(result.h_grid[np.argmax(qa)]),
        "argmax_h_bound_time_average": float(result.h_grid[np.argmax(ba)]),
        "argmax_h_lambda": float(result.h_grid[np.nanargmax(lam)]) if np.isfinite(lam).any() else None,
        "failed": len(result.failed),
        "violation_counts": result.violation_summary()["counts"],
        "files": len(files),
    }
    print(json.dumps(summary))
    return 0


def cmd_otoc(args) -> int:
    cfg = _config(args)
    spec, gs, _ = _ground(cfg, args.h)
    times = np.asarray(cfg.t_grid)
    values = otoc_series(spec, gs, cfg.operator("otoc_a"), cfg.operator("otoc_b"), times)
    path = _out(cfg) / f"otoc_h{args.h:+g}.csv"
    lines = ["t,re,im"] + [f"{t:.17g},{v.real:.17g},{v.imag:.17g}" for t, v in zip(times, values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    print(f"{times.size} samples -> {path}")
    return 0


def cmd_clock(args) -> int:
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    proto = default_protocol(args.n_sites, args.h)
    report = clock_report(proto, t_max=args.t_max, dt=args.dt)
    dump_json(report.to_dict(), out / "clock_report.json")
    print(json.dumps(jsonable(report.to_dict())))
    return 0


def cmd_verify(args) -> int:
    cfg = _config(args)
    result = run_sweep(cfg)
    if args.out:
        emit(result, cfg.output_dir)
    selected = args.checks or list(CHECKS)
    unknown = sorted(set(selected) - set(CHECKS))
    if unknown:
        raise SystemExit(f"unknown checks: {', '.join(unknown)}")
    counts = result.violation_summary()["counts"]
    checked = result.violation_summary()["checked"]
    failed = False
    for name in selected:
        status = "PASS" if counts[name] == 0 else "FAIL"
        failed |= counts[name] > 0
        print(f"{status} {name}: {counts[name]} violations in {checked[name]} checked samples")
    for h, err in result.failed.items():
        failed = True
        print(f"FAIL point h={h}: {err}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON file with SweepConfig keys")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (value parsed as YAML); repeatable")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qstopwatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="eigenvalues of H(h) to CSV")
    p.add_argument("--h", type=float, default=1.0)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("quench", parents=[common], help="single-point JSON bundle")
    p.add_argument("--h", type=float, default=1.0)
    p.set_defaults(func=cmd_quench)

    p = sub.add_parser("heatmap", parents=[common], help="full sweep: heatmaps, lambda curve, bundles")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("otoc", parents=[common], help="four-point OTOC series in the ground state")
    p.add_argument("--h", type=float, default=1.0)
    p.set_defaults(func=cmd_otoc)

    p = sub.add_parser("clock", parents=[common], help="ancilla clock identities report")
    p.add_argument("--n-sites", type=int, default=6)
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--t-max", type=float, default=2.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.set_defaults(func=cmd_clock)

    p = sub.add_parser("verify", parents=[common], help="run the inequality checks; exit 1 on any violation")
    p.add_argument("--checks", nargs="+", metavar="NAME", help=f"subset of: {' '.join(CHECKS)}")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
