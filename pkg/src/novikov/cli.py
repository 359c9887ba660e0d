"""Command line entry point: ``novikov run|sweep|verify|convergence``.

Exit codes: 0 completed / all checks passed, 2 wave breaking detected (a
result, not a failure), 1 corrupt state, configuration error or failed check.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .config import ConfigError, builtin_scenarios, load_config
from .runner import EXIT_BREAKING, EXIT_FAILURE, EXIT_OK, STATUS_EXIT, atomic_write_text, run_scenario

log = logging.getLogger("novikov")


def _config_error(exc: ConfigError) -> int:
    print(f"config error in {exc.source}:", file=sys.stderr)
    for p in exc.problems:
        print(f"  - {p}", file=sys.stderr)
    return EXIT_FAILURE


def cmd_run(args) -> int:
    try:
        cfg, path = load_config(args.config)
    except ConfigError as exc:
        return _config_error(exc)
    out_dir = Path(args.output) if args.output else None
    outcome, manifest = run_scenario(cfg, out_dir, path.parent)
    s = manifest["outcome"]
    m = s["min_k_u_ux_final"]
    print(f"{cfg.name}: {s['status']} at t = {s['halt_time']:.6g} ({s['halt_reason']}); "
          f"min k u u_x = {'n/a' if m is None else format(m, '.6g')}")
    for w in manifest["checks"].get("boundary_warnings", []):
        print(f"warning: {w}", file=sys.stderr)
    return STATUS_EXIT[outcome.status]


def cmd_sweep(args) -> int:
    from .sweep import load_sweep, run_sweep

    try:
        spec, base, base_path = load_sweep(args.sweepfile)
        rows, summary = run_sweep(spec, base, base_path.parent,
                                  Path(args.output) if args.output else None, args.workers)
    except ConfigError as exc:
        return _config_error(exc)
    for r in rows:
        ht = "-" if r["halt_time"] is None else f"{r['halt_time']:.4g}"
        print(f"{json.dumps(r['params'])}  {r['status']:<18} t={ht}")
    print(f"summary: {summary}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import VerifyHooks, format_table, run_checks

    hooks = VerifyHooks(
        corrupt_helmholtz=args.inject_fault == "helmholtz",
        lambda_shift=0.05 if args.inject_fault == "lambda" else 0.0,
    )
    results = run_checks(args.filter, hooks)
    if not results:
        print(f"no checks match {args.filter!r}", file=sys.stderr)
        return EXIT_FAILURE
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_OK if not failed else EXIT_FAILURE


def cmd_convergence(args) -> int:
    from .convergence import ManufacturedSolution, perturbation_divergence, spatial_refinement, temporal_order
    from .config import initial_profiles
    from .integrator import RunStatus, run
    from .grid import SpectralGrid

    try:
        cfg, path = load_config(args.config)
    except ConfigError as exc:
        return _config_error(exc)
    params = cfg.build_params()
    ctrl = cfg.build_control()
    base = run(params, cfg.build_initial(base_dir=path.parent), ctrl)
    if base.status != RunStatus.COMPLETED:
        print(f"scenario is not smooth up to t_end = {ctrl.t_end:g} ({base.status.value} at "
              f"t = {base.halt_time:.4g}); use a shorter horizon", file=sys.stderr)
        return EXIT_FAILURE

    n = cfg.grid.n_modes
    L = cfg.grid.half_length
    lines = []
    ms = ManufacturedSolution(params, SpectralGrid(n, L))
    st = temporal_order(ms)
    ok_t = 3.7 <= st.fitted_order <= 4.3 and all(3.7 <= o <= 4.3 for o in st.pairwise_orders)
    lines.append({"study": "temporal_order", **asdict(st), "pass": ok_t})

    horizon = min(ctrl.t_end, args.horizon)
    sp_ctrl = replace(ctrl, t_end=horizon)
    sp = spatial_refinement(params, lambda x: initial_profiles(cfg.initial, x, path.parent),
                            L, sp_ctrl, n // 2, n, 2 * n) if cfg.initial.kind != "file" else None
    if sp is not None:
        lines.append({"study": "spatial_refinement", **asdict(sp), "pass": sp.ratio > 1e3})

    dv = perturbation_divergence(params, cfg.build_initial(base_dir=path.parent), sp_ctrl, args.perturbation)
    lines.append({"study": "continuous_dependence", "horizon": horizon, **asdict(dv),
                  "pass": dv.final_distance <= 1e-3})

    text = "".join(json.dumps(ln, default=_np) + "\n" for ln in lines)
    sys.stdout.write(text)
    out = Path(args.output) if args.output else cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "convergence.ndjson", text)
    return EXIT_OK if all(ln["pass"] for ln in lines) else EXIT_FAILURE


def _np(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="novikov", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("config", help=f"YAML file or built-in scenario ({', '.join(builtin_scenarios())})")
    p.add_argument("-o", "--output", help="output directory (default: from the config)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a Cartesian parameter sweep")
    p.add_argument("sweepfile")
    p.add_argument("-o", "--output")
    p.add_argument("-j", "--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the bundled invariant checks")
    p.add_argument("--filter", default=None, help="only checks whose name contains this text")
    p.add_argument("--inject-fault", choices=["helmholtz", "lambda"], default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("convergence", help="time/space refinement and perturbation studies")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--perturbation", type=float, default=1e-6)
    p.set_defaults(func=cmd_convergence)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
