"""Command-line entry points.

Subcommands: ``run`` advances a configured simulation and writes the run
artifacts; ``check-collision`` reports equilibrium annihilation, symmetry
and null residuals of the collision discretization at the configured
resolution; ``check-coercivity`` samples the Rayleigh quotient of the
linearized operator; ``decompose`` prints the hydrodynamic fields and
macroscopic-equation residuals of a snapshot as JSON.

Exit codes: 0 pass, 1 check/ledger failure, 2 instability, 3 bad
configuration.  The only environment override honoured is the thread
count (NUMBA_NUM_THREADS), read by the compiled kernels at import time.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vmbolt", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
            ("run", "advance a simulation from a JSON config"),
            ("check-collision", "collision-operator structure checks"),
            ("check-coercivity", "sampled coercivity estimate")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="path to a JSON run configuration")
    sp = sub.add_parser("decompose",
                        help="hydrodynamic decomposition of a snapshot")
    sp.add_argument("snapshot", help="path to a snapshot JSON descriptor")
    sp = sub.choices["run"]
    sp.add_argument("--resume", default=None,
                    help="snapshot to resume from instead of fresh data")
    sub.choices["check-coercivity"].add_argument(
        "--samples", type=int, default=200)
    return p


def _cmd_run(args) -> int:
    from .driver import RunConfig, run_simulation
    cfg = RunConfig.from_json(args.config)
    result = run_simulation(cfg, resume_from=args.resume)
    last = result.reports[-1] if result.reports else None
    print(f"steps={cfg.steps} exit={result.exit_code} "
          f"csv={result.csv_path} snapshot={result.snapshot_path}")
    if last is not None:
        print(f"final: t={last.t:.6g} energy={last.energy:.6g} "
              f"min_f={last.min_f:.3e}")
    if result.ledger is not None:
        print(f"ledger: passed={result.ledger.passed} "
              f"integral_margin={result.ledger.integral_margin:.3e}")
    return result.exit_code


def _cmd_check_collision(args) -> int:
    from .collision import apply_L, build_workspace, eval_Q, l_form
    from .driver import RunConfig, build_model
    from .maxwellian import inner_v, mu_table, sqrt_mu_table

    cfg = RunConfig.from_json(args.config)
    model = build_model(cfg)
    g, ws = model.vgrid, model.ws
    mu = mu_table(g)
    q = eval_Q(mu, mu, ws, correct=False)
    ann = float(np.max(np.abs(q)) / np.max(mu))
    basis_cols = np.ascontiguousarray(np.moveaxis(model.basis.vectors, 0, -1))
    le = apply_L(basis_cols, ws)
    null = np.sqrt(np.einsum("snc,snc,n->c", le, le, g.weights))
    null /= np.sqrt(np.einsum("snc,snc,n->c", basis_cols, basis_cols,
                              g.weights))
    rng = np.random.default_rng(cfg.seed)
    a = rng.standard_normal((2, g.n_nodes)) * sqrt_mu_table(g)
    b = rng.standard_normal((2, g.n_nodes)) * sqrt_mu_table(g)
    la, lb = apply_L(a, ws), apply_L(b, ws)
    symm = abs(inner_v(la, b, g) - inner_v(a, lb, g)) / abs(inner_v(la, b, g))
    form = float(l_form(a, ws))
    print(f"equilibrium annihilation sup|Q(mu,mu)|/sup mu = {ann:.3e}")
    print(f"null residuals = {np.array2string(null, precision=3)}")
    print(f"symmetry defect = {symm:.3e}   <Lg,g> = {form:.6g}")
    ok = ann <= 1e-3 and symm <= 1e-8 and np.all(null <= 5e-3) and form >= 0.0
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _cmd_check_coercivity(args) -> int:
    from .diagnostics import rayleigh_coercivity
    from .driver import RunConfig, build_model

    cfg = RunConfig.from_json(args.config)
    model = build_model(cfg)
    delta, quot = rayleigh_coercivity(model.ws, model.basis,
                                      count=args.samples, seed=cfg.seed)
    print(f"delta_hat = {delta:.6g} over {args.samples} samples "
          f"(median {np.median(quot):.6g}, max {np.max(quot):.6g})")
    print("PASS" if delta > 0.0 else "FAIL")
    return 0 if delta > 0.0 else 1


def _cmd_decompose(args) -> int:
    from .diagnostics import build_macro_basis, macro_fields_of, macro_residuals
    from .driver import build_model, read_snapshot

    state, cfg, step = read_snapshot(args.snapshot)
    model = build_model(cfg)
    macro = macro_fields_of(state.f, model)
    mb = build_macro_basis(model.vgrid)
    rep = macro_residuals(state, model, mb)
    out = {
        "t": state.t,
        "step": step,
        "macro": {k: v.tolist() for k, v in
                  zip(("a_plus", "a_minus", "b1", "b2", "b3", "c"),
                      macro.as_array())},
        "residual_max_norms": rep.max_norms,
        "cancellation_max": float(np.max(np.abs(rep.cancellation))),
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    from .driver import ConfigError, InstabilityError
    handlers = {"run": _cmd_run, "check-collision": _cmd_check_collision,
                "check-coercivity": _cmd_check_coercivity,
                "decompose": _cmd_decompose}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except InstabilityError as exc:
        print(f"instability: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
