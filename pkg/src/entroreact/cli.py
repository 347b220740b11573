"""Command-line front end: ``entroreact <subcommand> ...``.

Exit status is 0 when every verdict passes, 2 when a verdict fails and 1 on
usage or I/O errors. Floating-point output uses 17 significant digits.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    Sampler,
    complex_balance_residual,
    detect_boundary_equilibria,
    find_positive_equilibrium,
    law_basis,
    validate_conditions,
)
from .config import load_run_config, parse_vector
from .crn import NetworkParseError, load_network
from .diagnostics import (
    entropy_monotonicity_report,
    fit_exponential_decay,
    fit_polynomial_growth,
    read_series_csv,
    sup_norm_envelope,
    write_series_csv,
)
from .grid import Grid, write_snapshot
from .inequalities import check_gn_chain, gn_ratio, random_band_limited, truncation_chi
from .solver import CheckpointError, SimulationError, load_checkpoint, run, save_checkpoint

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _g(x: float) -> str:
    return f"{x:.17g}"


def _tuple(values) -> str:
    return "(" + ", ".join(_g(float(v) + 0.0) for v in values) + ")"


def _totals_label(values) -> str:
    return "(" + ",".join(_g(float(v)) for v in values) + ")"


def _vector(text: str, what: str) -> tuple[float, ...]:
    try:
        return parse_vector(text)
    except ValueError as exc:
        raise UsageError(f"{what}: {exc}") from None


def _threads(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("ENTROREACT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"ENTROREACT_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise UsageError("ENTROREACT_THREADS must be at least 1")
        return n
    return 1


def _resolve_mu(net, text: str, totals):
    """'auto' means -log of the equilibrium in the class of ``totals`` (default: of u = 1)."""
    if text == "0":
        return np.zeros(net.n_species)
    if text != "auto":
        mu = np.array(_vector(text, "--mu"))
        if mu.shape != (net.n_species,):
            raise UsageError(f"--mu needs {net.n_species} values, got {len(mu)}")
        return mu
    if not hasattr(net, "reactions"):
        return np.zeros(net.n_species)
    M, _ = law_basis(net)
    if len(M) == 0:
        return np.zeros(net.n_species)
    if totals is None:
        totals = M @ np.ones(net.n_species)
    rep = find_positive_equilibrium(net, totals)
    if not rep.converged:
        raise UsageError("--mu auto: equilibrium solve did not converge; pass --mu explicitly")
    return -np.log(rep.equilibrium)


def _check_totals(M, totals):
    if totals is not None and len(totals) != len(M):
        raise UsageError(f"--totals needs {len(M)} values (one per conservation law), got {len(totals)}")


# --------------------------------------------------------------------------
# analyze


def cmd_analyze(args) -> int:
    net = load_network(args.network)
    M, names = law_basis(net)
    totals = _vector(args.totals, "--totals") if args.totals else None
    _check_totals(M, totals)
    ok = True
    out = []
    out.append(
        f"network: {net.n_species} species, {net.n_reactions} reactions, {len(net.complexes)} complexes"
    )
    out.append(f"conservation laws: {len(M)}")
    for name, row in zip(names, M):
        terms = " ".join(f"{_g(c)}*{sp}" for c, sp in zip(row, net.species) if c != 0)
        out.append(f"  {name}: {terms}")

    eq = None
    if len(M) and totals is not None:
        rep = find_positive_equilibrium(net, totals)
        label = ", ".join(f"{n}={_g(v)}" for n, v in zip(names, totals))
        if rep.converged:
            eq = rep.equilibrium
            out.append(f"equilibrium ({label}): u_∞={_tuple(eq)}")
            out.append(f"  Newton iterations: {rep.newton_iterations}")
            out.append(f"  max complex-balance residual: {_g(rep.max_residual)}")
        else:
            ok = False
            out.append(f"equilibrium ({label}): no positive equilibrium found ({rep.newton_iterations} iterations)")
    elif not len(M):
        out.append("no conservation laws: equilibrium class is the whole orthant")

    boundary = detect_boundary_equilibria(net, totals)
    if not boundary:
        out.append("boundary equilibria: none")
    else:
        out.append("boundary equilibria:")
        for b in boundary:
            where = "" if b.in_class is None else ("  [in class]" if b.in_class else "  [not in class]")
            out.append(f"  {b.description}{where}")
    if totals is not None:
        hits = [b for b in boundary if b.in_class]
        if hits:
            ok = False
            out.append(f"{len(hits)} boundary equilibria in class {_totals_label(totals)}")
        else:
            out.append(f"no boundary equilibria in class {_totals_label(totals)}")

    if args.mu == "auto" and totals is not None and eq is None:
        # no positive equilibrium in this class; take the one through u = 1
        out.append("mu: using the equilibrium class of u = (1, ..., 1)")
        mu = _resolve_mu(net, "auto", None)
    elif args.mu == "auto" and eq is not None:
        mu = -np.log(eq)
    else:
        mu = _resolve_mu(net, args.mu, totals)
    cond = validate_conditions(net, mu, args.dim, Sampler(samples=args.samples, seed=args.seed))
    out.append(f"conditions (d={args.dim}, mu={_tuple(mu)}):")
    out.extend(f"  {line}" for line in cond.lines())
    ok = ok and cond.passed

    print("\n".join(out))
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "laws.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(["law"] + list(net.species)) + "\n")
            for name, row in zip(names, M):
                fh.write(",".join([name] + [_g(c) for c in row]) + "\n")
        with open(d / "residuals.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write("complex,residual\n")
            if eq is not None:
                for cplx, r in complex_balance_residual(net, eq).items():
                    fh.write(f"{cplx.label(net.species)},{_g(r)}\n")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    rc = load_run_config(args.config, threads=_threads(args.threads))
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        rc.diagnostics_path = d / rc.diagnostics_path.name
        rc.snapshot_path = d / rc.snapshot_path.name
        if rc.checkpoint_path is not None:
            rc.checkpoint_path = d / rc.checkpoint_path.name
    sim = rc.simulation
    state = None
    if args.restart:
        try:
            state = load_checkpoint(Path(args.restart).read_bytes())
        except OSError as exc:
            raise UsageError(f"cannot read checkpoint: {exc}") from None
        if state.grid != sim.grid or state.u.shape[0] != sim.system.n_species:
            raise UsageError("checkpoint grid or species count does not match the config")

    def on_checkpoint(s):
        if rc.checkpoint_path is not None:
            rc.checkpoint_path.write_bytes(save_checkpoint(s))

    sim.keep_snapshots = False
    status = EXIT_OK
    try:
        series, state = run(sim, state, on_checkpoint)
    except SimulationError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        series, state, status = exc.series, exc.state, EXIT_FAIL
    with open(rc.diagnostics_path, "w", encoding="utf-8", newline="") as fh:
        write_series_csv(fh, series)
    with open(rc.snapshot_path, "w", encoding="utf-8", newline="") as fh:
        write_snapshot(fh, state.grid, state.u, sim.system.species)
    if rc.checkpoint_path is not None and rc.checkpoint_at is None and status == EXIT_OK:
        rc.checkpoint_path.write_bytes(save_checkpoint(state))
    print(f"t = {_g(state.t)}")
    print(f"accepted steps: {state.accepted}, rejected steps: {state.rejected}")
    print(f"clamped mass: {_g(state.clamped_mass)}")
    print(f"records: {len(series)}")
    print(f"diagnostics: {rc.diagnostics_path}")
    print(f"snapshot: {rc.snapshot_path}")
    if rc.checkpoint_path is not None and rc.checkpoint_path.exists():
        print(f"checkpoint: {rc.checkpoint_path}")
    return status


# --------------------------------------------------------------------------
# verify-conditions


def cmd_verify_conditions(args) -> int:
    net = load_network(args.network)
    totals = _vector(args.totals, "--totals") if args.totals else None
    if totals is not None:
        _check_totals(law_basis(net)[0], totals)
    mu = _resolve_mu(net, args.mu, totals)
    relax = _vector(args.relax, "--relax") if args.relax else None
    if relax is not None and len(relax) != 2:
        raise UsageError("--relax takes two values K1,K2")
    rep = validate_conditions(
        net, mu, args.dim, Sampler(samples=args.samples, seed=args.seed), relaxation=relax
    )
    print(f"mu={_tuple(mu)}")
    for line in rep.lines():
        print(line)
    return EXIT_OK if rep.passed else EXIT_FAIL


# --------------------------------------------------------------------------
# verify-gn


def cmd_verify_gn(args) -> int:
    if args.threshold <= 1:
        raise UsageError("--threshold must exceed 1")
    n = args.cells or (256 if args.dim == 1 else 64)
    grid = Grid.interval(1.0, n) if args.dim == 1 else Grid.rectangle(1.0, 1.0, n, n)
    rng = np.random.default_rng(args.seed)
    fields = [random_band_limited(grid, rng, args.modes, args.amp) for _ in range(args.samples)]
    # empirical embedding constant over the truncated fields
    C4 = max((gn_ratio(grid, truncation_chi(f, args.threshold)) for f in fields), default=0.0)
    core_fail = composite_fail = 0
    lines = ["sample,inequality,lhs,rhs,slack,passed"]
    for k, f in enumerate(fields):
        rep = check_gn_chain(grid, f, args.threshold, C4)
        for r in rep.records:
            lines.append(f"{k},{r.name},{_g(r.lhs)},{_g(r.rhs)},{_g(r.slack)},{int(r.passed)}")
            if not r.passed:
                if r.name in ("split", "low", "h1", "llogl"):
                    core_fail += 1
                else:
                    composite_fail += 1
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    summary = sys.stderr if not args.out else sys.stdout
    print(f"fields: {args.samples}, grid: {'x'.join(map(str, grid.shape))}, N={_g(args.threshold)}", file=summary)
    print(f"empirical C4: {_g(C4)}", file=summary)
    print(f"core chain failures: {core_fail}", file=summary)
    print(f"gn/composite failures: {composite_fail}", file=summary)
    return EXIT_OK if core_fail == 0 else EXIT_FAIL


# --------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    try:
        with open(args.diagnostics, encoding="utf-8", newline="") as fh:
            series = read_series_csv(fh)
    except OSError as exc:
        raise UsageError(f"cannot read diagnostics: {exc}") from None
    ok = True
    print(f"records: {len(series)}, t in [{_g(series.t[0])}, {_g(series.t[-1])}]")
    if len(series) >= 2:
        mono = entropy_monotonicity_report(series)
        print(f"entropy: max increase {_g(mono.max_jump)} at t={_g(mono.time)}")
    if args.fit_decay:
        window = _vector(args.window, "--window") if args.window else None
        if window is not None and len(window) != 2:
            raise UsageError("--window takes two values t0,t1")
        dist = series.total_distance()
        if not np.any(np.isfinite(dist)):
            raise UsageError("diagnostics carry no distance to an equilibrium")
        fit = fit_exponential_decay(series.times, dist, window)
        print(
            f"exponential decay: rate {_g(fit.rate)}, amplitude {_g(fit.amplitude)}, "
            f"R^2 {_g(fit.r_squared)}, points {fit.n_points}"
        )
        if not (fit.rate > 0 and fit.r_squared >= args.min_r2):
            ok = False
            print(f"decay verdict: FAIL (need rate > 0 and R^2 >= {_g(args.min_r2)})")
        else:
            print("decay verdict: pass")
    if args.fit_growth:
        horizons = _vector(args.fit_growth, "--fit-growth")
        M = sup_norm_envelope(series, horizons)
        fit = fit_polynomial_growth(horizons, M)
        print("horizon,sup_norm")
        for T, m in zip(horizons, M):
            print(f"{_g(T)},{_g(m)}")
        print(f"polynomial growth: degree {_g(fit.degree)}, constant {_g(fit.constant)}, R^2 {_g(fit.r_squared)}")
        if args.max_degree is not None and fit.degree > args.max_degree:
            ok = False
            print(f"growth verdict: FAIL (degree exceeds {_g(args.max_degree)})")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="entroreact", description="Entropy methods for reaction-diffusion networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="conservation laws, equilibria and conditions of a network")
    a.add_argument("network")
    a.add_argument("--totals", help="conserved totals, comma separated")
    a.add_argument("--out-dir", help="write laws.csv and residuals.csv here")
    a.add_argument("--dim", type=int, choices=(1, 2), default=1)
    a.add_argument("--mu", default="auto", help="auto, 0 or a comma-separated vector")
    a.add_argument("--samples", type=int, default=10_000)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="integrate a reaction-diffusion run")
    s.add_argument("config")
    s.add_argument("--threads", type=int)
    s.add_argument("--restart", help="continue from this checkpoint")
    s.add_argument("--out-dir", help="write outputs here instead of next to the config")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify-conditions", help="sample (P), (E) and check (G)")
    v.add_argument("network")
    v.add_argument("--mu", default="auto")
    v.add_argument("--dim", type=int, choices=(1, 2), required=True)
    v.add_argument("--samples", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--totals")
    v.add_argument("--relax", help="K1,K2: accept the entropy inequality up to K1*|u|_1 + K2")
    v.set_defaults(func=cmd_verify_conditions)

    g = sub.add_parser("verify-gn", help="check the truncated Gagliardo-Nirenberg chain on random fields")
    g.add_argument("--dim", type=int, choices=(1, 2), required=True)
    g.add_argument("--samples", type=int, default=1000)
    g.add_argument("--threshold", type=float, default=5.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--modes", type=int, default=8)
    g.add_argument("--amp", type=float, default=10.0)
    g.add_argument("--cells", type=int)
    g.add_argument("--out", help="chain CSV path (default: stdout)")
    g.set_defaults(func=cmd_verify_gn)

    r = sub.add_parser("report", help="fit decay and growth on a diagnostics CSV")
    r.add_argument("diagnostics")
    r.add_argument("--fit-decay", action="store_true")
    r.add_argument("--window", help="t0,t1 for the decay fit")
    r.add_argument("--min-r2", type=float, default=0.99)
    r.add_argument("--fit-growth", help="comma-separated horizons T_k")
    r.add_argument("--max-degree", type=float)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"entroreact: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except NetworkParseError as exc:
        print(f"entroreact: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, CheckpointError) as exc:
        print(f"entroreact: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
