"""Batch experiment runner: ``tauberlab run <name> [flags]`` writes ``<out>/<name>.csv``.

Exit codes: 0 when every pass flag is true, 2 when some check fails or
a run-time invariant breaks, 1 on usage errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .bridge import bang_family, discount_error_audit, discretize, full_gap, horizon_error_audit, kernel_gap
from .control import (
    SearchConfig,
    analytic_V,
    analytic_W,
    counterexample,
    estimate_Vlambda,
    estimate_Vt,
    lower_bound_audit,
    nonuniformity_probe,
    random_schedule,
    schedule_arrays,
    simulate_batch,
    smooth_variant,
)
from .discrete import (
    DiscreteProblem,
    fixed_point_residual,
    min_mean_cycle_all,
    monotonicity_audit,
    random_graph,
    read_graph,
    tauberian_gap,
    value_lambda,
)
from .errors import ContractError, DomainError, InsufficientDataError, TauberError
from .kernel import convexity_residual, lemma_i_margin, lemma_ii_margin, locate_eps0, mass, mass_quadrature
from .means import (
    BoundedSequence,
    SampledFunction,
    abel_mean,
    cesaro_means,
    discounted_average,
    dyadic_block_sequence,
    hardy_littlewood_report,
    square_wave,
    time_average,
)
from .plays import Trajectory
from .report import ValueReport, merge_reports

EXPERIMENTS = ("means", "kernel", "counterexample", "smooth", "discrete", "bridge", "all")
PRESETS = ("square-wave", "constant", "dyadic")


@dataclass(frozen=True)
class RunOptions:
    name: str
    t_grid: Optional[tuple] = None
    lambda_grid: Optional[tuple] = None
    n_grid: Optional[tuple] = None
    audit_lambda_grid: Optional[tuple] = None
    seed: int = 7
    out: str = "."
    step: float = 1e-2
    graph: Optional[str] = None
    preset: str = "square-wave"
    n_random: int = 200

    def grid(self, attr: str, default) -> tuple:
        g = getattr(self, attr)
        return tuple(default) if g is None else tuple(g)

    def params(self) -> dict:
        d = {"version": __version__, "seed": self.seed, "step": self.step}
        for k in ("t_grid", "lambda_grid", "n_grid", "audit_lambda_grid"):
            if getattr(self, k) is not None:
                d[k] = getattr(self, k)
        return d


# means


def _sequence_rows(seq: BoundedSequence, ref, n_grid, lambda_grid, rep: ValueReport):
    vn = cesaro_means(seq, n_grid)
    for n, v in zip(n_grid, vn):
        if ref is None:
            rep.add("cesaro", float(n), float(v), "", "", "")
        else:
            tol = max(1.0 / n, 1e-9)
            rep.add("cesaro", float(n), float(v), ref, tol, bool(abs(v - ref) <= tol))
    for lam in lambda_grid:
        v = abel_mean(seq, lam)
        if ref is None:
            rep.add("abel", lam, v, "", "", "")
        else:
            tol = max(lam, 1e-9)
            rep.add("abel", lam, v, ref, tol, bool(abs(v - ref) <= tol))


def _square_wave_integral(t: float) -> float:
    full, rest = divmod(t, 2.0)
    return full + min(rest, 1.0)


def experiment_means(opts: RunOptions) -> ValueReport:
    if opts.preset not in PRESETS:
        raise DomainError(f"unknown preset {opts.preset!r}; choose from {', '.join(PRESETS)}")
    lambda_grid = opts.grid("lambda_grid", (0.1, 0.01, 0.001))
    cols = ["kind", "param", "value", "reference", "tolerance", "pass"]
    rep = ValueReport("means", cols, meta={"preset": opts.preset})
    if opts.preset == "dyadic":
        n_grid = opts.grid("n_grid", [2**k for k in range(1, 21)])
        seq = dyadic_block_sequence()
        _sequence_rows(seq, None, n_grid, lambda_grid, rep)
    else:
        n_grid = opts.grid("n_grid", (10, 100, 1000, 10000, 100000))
        if opts.preset == "square-wave":
            seq, ref = BoundedSequence.periodic([1.0, 0.0]), 0.5
        else:
            seq, ref = BoundedSequence.constant(0.3), 0.3
        _sequence_rows(seq, ref, n_grid, lambda_grid, rep)

    hl = hardy_littlewood_report(seq, n_grid, lambda_grid)
    for kind in ("liminf_cesaro", "limsup_cesaro", "liminf_abel", "limsup_abel"):
        row = hl.where(kind=kind)[0]
        rep.add(kind, row["param"], row["value"], "", "", "")
    lo, hi = hl.where(kind="liminf_cesaro")[0]["value"], hl.where(kind="limsup_cesaro")[0]["value"]
    if opts.preset == "dyadic":
        # the block sums swing between about 1/3 and 2/3
        rep.add("cesaro_oscillation", float(n_grid[-1]), hi - lo, 0.25, "", bool(hi - lo >= 0.25))
    else:
        rep.add("cesaro_oscillation", float(n_grid[-1]), hi - lo, 0.0, 1.0 / n_grid[len(n_grid) // 2],
                bool(hi - lo <= 1.0 / n_grid[len(n_grid) // 2]))

    if opts.preset == "square-wave":
        # the continuous-time square wave: 1 on [0, 1), 0 on [1, 2)
        t_grid = opts.grid("t_grid", (4.0, 100.0, 1000.0))
        g = square_wave(2.0, 0.5)
        f = SampledFunction.from_callable(g, opts.step, max(t_grid))
        for t in t_grid:
            v = time_average(f, t)
            ref = _square_wave_integral(t) / t
            rep.add("time_average", t, v, ref, opts.step, bool(abs(v - ref) <= opts.step))
        for lam in lambda_grid:
            v = discounted_average(f, lam)
            ref = 1.0 / (1.0 + math.exp(-lam))
            rep.add("discounted_average", lam, v, ref, opts.step, bool(abs(v - ref) <= opts.step))
    return rep


# kernel


def _random_step_trajectory(rng: np.random.Generator, horizon: float, step: float, grid: float) -> Trajectory:
    """Piecewise-constant costs with switches on multiples of ``grid``."""
    k = int(rng.integers(1, 12))
    switches = np.sort(rng.choice(int(horizon / grid), size=k, replace=False)) * grid
    levels = rng.uniform(0.0, 1.0, size=k + 1)
    s = np.arange(int(round(horizon / step)) + 1) * step
    idx = np.searchsorted(switches, s + 1e-12, side="right")
    return Trajectory.from_costs(levels[idx], step)


def experiment_kernel(opts: RunOptions) -> ValueReport:
    rng = np.random.default_rng(opts.seed)
    t_grid = opts.grid("t_grid", (1.0, 10.0, 1000.0))

    mass_rep = ValueReport("mass", ["lambda", "alpha", "beta", "closed_form", "quadrature", "difference", "pass"])
    for _ in range(100):
        lam = float(np.exp(rng.uniform(math.log(1e-3), math.log(10.0))))
        alpha = float(rng.uniform(0.0, 10.0 / lam))
        beta = alpha + float(rng.uniform(0.0, 10.0 / lam))
        a, b = mass(lam, alpha, beta), mass_quadrature(lam, alpha, beta)
        mass_rep.add(lam, alpha, beta, a, b, abs(a - b), bool(abs(a - b) <= 1e-10))

    eps_grid = [round(0.01 * k, 2) for k in range(1, 51)]
    li = ValueReport("lemma_i", ["eps", "mass", "bound", "t_spread", "pass"])
    for eps in eps_grid:
        ms = [lemma_i_margin(t, eps) for t in t_grid]
        spread = max(m.mass_value for m in ms) - min(m.mass_value for m in ms)
        li.add(eps, ms[0].mass_value, ms[0].bound, spread, bool(all(m.passed for m in ms) and spread <= 1e-12))
    li.meta["eps0_located"] = locate_eps0()

    lii = ValueReport("lemma_ii", ["eps", "delta", "mass", "bound", "t_spread", "pass"])
    for eps in (1e-4, 1e-3, 1e-2, 2e-2):
        ms = [lemma_ii_margin(t, eps, 0.05) for t in t_grid]
        spread = max(m.mass_value for m in ms) - min(m.mass_value for m in ms)
        lii.add(eps, 0.05, ms[0].mass_value, ms[0].bound, spread, bool(all(m.passed for m in ms) and spread <= 1e-12))

    conv = ValueReport("convexity", ["trajectory", "residual_h", "residual_h_half", "ratio", "pass"],
                       meta={"lambda": 0.1, "s_max": 200.0, "h": 0.01})
    for i in range(20):
        X = _random_step_trajectory(rng, 200.0, 0.005, 0.01)
        r1 = convexity_residual(X, 0.1, 200.0, h=0.01)
        r2 = convexity_residual(X, 0.1, 200.0, h=0.005)
        ratio = r2 / r1 if r1 > 0 else 0.0
        conv.add(i, r1, r2, ratio, bool(r1 <= 1e-3 and ratio <= 0.6))

    return merge_reports("kernel", [mass_rep, li, lii, conv])


# control problems


def _monotone_rows(rep, kind, params, values, lo, hi):
    prev = math.inf
    for p, v in zip(params, values):
        ok = lo <= v <= hi and v <= prev + 1e-12
        rep.add(kind, p, v, lo, hi, bool(ok))
        prev = v


def experiment_counterexample(opts: RunOptions) -> ValueReport:
    p = counterexample()
    t_grid = opts.grid("t_grid", (100.0, 1000.0, 10000.0))
    lambda_grid = opts.grid("lambda_grid", (0.1, 0.01, 0.001))
    cfg = SearchConfig(h=opts.step)

    lim = ValueReport("limits", ["kind", "param", "value", "low", "high", "pass"],
                      meta={"state": (0.0, 0.0)})
    vt = [estimate_Vt(p, (0.0, 0.0), t, cfg).value for t in t_grid]
    _monotone_rows(lim, "V_t", t_grid, vt, 0.5, 0.55)
    vl = [estimate_Vlambda(p, (0.0, 0.0), lam, cfg).value for lam in lambda_grid]
    _monotone_rows(lim, "V_lambda", lambda_grid, vl, 0.75, 0.80)

    table = ValueReport("analytic_table", ["state", "V", "W", "V_t", "V_lambda", "pass"],
                        meta={"t": t_grid[-1], "lambda": lambda_grid[-1]})
    for x0 in ((0.0, 0.0), (0.5, 0.0), (1.5, 0.0), (3.0, 0.0), (1.0, 0.5)):
        V, W = analytic_V(*x0), analytic_W(*x0)
        et = estimate_Vt(p, x0, t_grid[-1], cfg).value
        el = estimate_Vlambda(p, x0, lambda_grid[-1], cfg).value
        table.add(x0, V, W, et, el, bool(et - V <= 0.07 and el - W <= 0.07))

    audit = lower_bound_audit(opts.n_random, t_grid[0], lambda_grid[0], opts.seed, h=opts.step)

    probe = nonuniformity_probe(t=1000.0, lam=1e-3, speeds=(0.1, 0.01), cfg=cfg)
    base_t, base_l = probe.rows[0][1], probe.rows[0][2]
    nonu = ValueReport("nonuniformity", ["state_y", "V_t", "V_lambda", "jump_t", "jump_lambda", "pass"],
                       meta=probe.meta)
    for y, a, b in probe.rows:
        ok = True if y == 0.0 else (a - base_t >= 0.5 and b - base_l >= 0.5)
        nonu.add(y, a, b, a - base_t, b - base_l, bool(ok))
    return merge_reports("counterexample", [lim, table, audit, nonu])


def experiment_smooth(opts: RunOptions) -> ValueReport:
    p = smooth_variant()
    rng = np.random.default_rng(opts.seed)
    t_grid = opts.grid("t_grid", (10.0, 20.0))
    lambda_grid = opts.grid("lambda_grid", (0.2, 0.1))
    cfg = SearchConfig(pieces=4, sweeps=1, scan_points=12, zoom_levels=8, h=opts.step, tail_tol=1e-4)

    inv = ValueReport("forward_invariance", ["schedules", "horizon", "violations", "pass"])
    horizon = 20.0
    breaks, values = schedule_arrays([random_schedule(rng, horizon) for _ in range(opts.n_random)])
    states, _ = simulate_batch(p, (0.0, 0.0), breaks, values, horizon, opts.step, keep_states=True)
    inside = np.asarray(p.invariant(states.reshape(-1, 2))).reshape(states.shape[:2])
    violations = int((~inside.all(axis=1)).sum())
    inv.add(opts.n_random, horizon, violations, violations == 0)

    vals = ValueReport("values", ["kind", "param", "value", "pass"], meta={"state": (0.0, 0.0)})
    vt = [estimate_Vt(p, (0.0, 0.0), t, cfg).value for t in t_grid]
    vl = [estimate_Vlambda(p, (0.0, 0.0), lam, cfg).value for lam in lambda_grid]
    for t, v in zip(t_grid, vt):
        vals.add("V_t", t, v, bool(0.0 <= v <= 1.0))
    for lam, v in zip(lambda_grid, vl):
        vals.add("V_lambda", lam, v, bool(0.0 <= v <= 1.0))
    # the discounted and averaged values stay apart, as in the discontinuous instance
    vals.add("gap", "", vl[-1] - vt[-1], bool(vl[-1] - vt[-1] >= 0.1))
    return merge_reports("smooth", [inv, vals])


# discrete


def _discrete_rows(p: DiscreteProblem, label, n_grid, rep: ValueReport):
    mmc = min_mean_cycle_all(p)
    gap = tauberian_gap(p, n_grid, mmc)
    for row in gap.where():
        rep.add(label, p.n_states, "tauberian_gap", row["n"], row["gap_n_limit"], row["gap_lambda_limit"],
                row["gap_n_lambda"], row["bound"], row["pass"])
    n = n_grid[-1]
    mono = monotonicity_audit(p, n, (1.0 / n,), mmc)
    rep.add(label, p.n_states, "monotonicity", n, "", "", "", "", mono.passed)
    lam = 1.0 / n
    res = fixed_point_residual(p, lam, value_lambda(p, lam).values)
    rep.add(label, p.n_states, "fixed_point_residual", n, res, "", "", 1e-8, bool(res <= 1e-8))
    last = gap.rows[-1]
    rep.add(label, p.n_states, "gap_n_lambda", n, last[3], "", "", 0.02, bool(last[3] <= 0.02))


def experiment_discrete(opts: RunOptions) -> ValueReport:
    n_grid = opts.grid("n_grid", (10, 100, 1000, 10000))
    cols = ["graph", "states", "check", "n", "value", "value2", "value3", "bound", "pass"]
    rep = ValueReport("discrete", cols, meta={})
    if opts.graph is not None:
        rep.meta["graph"] = opts.graph
        _discrete_rows(read_graph(opts.graph), 0, n_grid, rep)
    else:
        rng = np.random.default_rng(opts.seed)
        rep.meta["graphs"] = 30
        for i in range(30):
            p = random_graph(int(rng.integers(5, 51)), rng)
            _discrete_rows(p, i, n_grid, rep)
    return rep


# bridge


def experiment_bridge(opts: RunOptions) -> ValueReport:
    lambda_grid = opts.grid("lambda_grid", (0.5, 0.1, 0.01, 0.001))
    t_grid = opts.grid("t_grid", (5.0, 10.0, 20.0, 30.0))
    audit_grid = opts.grid("audit_lambda_grid", (0.5, 0.2, 0.1, 0.05))

    kg = ValueReport("kernel_gap", ["lambda", "E", "bound", "full_gap", "identity_error", "pass"])
    prev = math.inf
    for lam in lambda_grid:
        E, bound, ok = kernel_gap(lam)
        fg = full_gap(lam)
        err = abs(fg - 2.0 * E)
        kg.add(lam, E, bound, fg, err, bool(ok and err <= 1e-9 and E < prev))
        prev = E

    p = counterexample()
    bp = discretize(p, (0.0, 0.0), bang_family(32), depth=256, quant=1.0 / 2048)
    cfg = SearchConfig(h=opts.step)
    hz = horizon_error_audit(bp, t_grid, cfg)
    dc = discount_error_audit(bp, audit_grid, cfg)

    fine = discretize(p, (0.0, 0.0), bang_family(32), depth=256, quant=1.0 / 4096)
    qr = ValueReport("quant_refinement", ["n", "v_n", "v_n_half_quant", "difference", "bound", "pass"],
                     meta={"quant": bp.quant, "nodes": bp.n_nodes, "nodes_half_quant": fine.n_nodes,
                           "node_cap": 2_000_000})
    n = int(max(t_grid))
    a, b = bp.value_n(n), fine.value_n(n)
    bound = 1.0 * (bp.max_snap + fine.max_snap)  # declared unit-cost Lipschitz estimate: 1
    qr.add(n, a, b, abs(a - b), bound, bool(abs(a - b) <= bound + 1e-12))
    return merge_reports("bridge", [kg, hz, dc, qr])


RUNNERS: dict[str, Callable[[RunOptions], ValueReport]] = {
    "means": experiment_means,
    "kernel": experiment_kernel,
    "counterexample": experiment_counterexample,
    "smooth": experiment_smooth,
    "discrete": experiment_discrete,
    "bridge": experiment_bridge,
}


class UsageError(Exception):
    pass


def _write(opts: RunOptions, rep: ValueReport) -> Path:
    rep.meta.update(opts.params())
    out = Path(opts.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{opts.name}.csv"
    rep.write_csv(path)
    return path


def _run_one(opts: RunOptions) -> tuple[int, int, int]:
    """(exit code, rows, failed rows) of a single experiment."""
    try:
        rep = RUNNERS[opts.name](opts)
    except (DomainError, ContractError, InsufficientDataError) as exc:
        raise UsageError(str(exc)) from exc
    except TauberError as exc:
        print(f"tauberlab: {opts.name}: {exc}", file=sys.stderr)
        return 2, 0, 1
    path = _write(opts, rep)
    fails = rep.failures
    for f in fails[:10]:
        print(f"tauberlab: {opts.name}: failed row {f}", file=sys.stderr)
    print(f"{path}: {len(rep.rows)} rows, {len(fails)} failed")
    return (0 if not fails else 2), len(rep.rows), len(fails)


def run(opts: RunOptions) -> int:
    """Run one experiment (or all of them) and return the exit code."""
    if opts.name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {opts.name!r}")
    if opts.name != "all":
        return _run_one(opts)[0]
    summary = ValueReport("all", ["experiment", "rows", "failures", "pass"])
    code = 0
    for name in RUNNERS:
        c, rows, fails = _run_one(replace(opts, name=name))
        summary.add(name, rows, fails, c == 0)
        code = max(code, c)
    _write(opts, summary)
    return code


def _grid(kind):
    def parse(text: str) -> tuple:
        try:
            vals = tuple(kind(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a comma-separated list: {text!r}") from None
        if not vals:
            raise argparse.ArgumentTypeError("grid must be nonempty")
        return vals

    return parse


def _int_grid(text: str) -> tuple:
    vals = _grid(float)(text)
    if any(v != int(v) or v < 1 for v in vals):
        raise argparse.ArgumentTypeError("n values must be positive integers")
    return tuple(int(v) for v in vals)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tauberlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment and write <out>/<name>.csv")
    r.add_argument("name", help=f"one of {', '.join(EXPERIMENTS)}")
    r.add_argument("--t-grid", type=_grid(float))
    r.add_argument("--lambda-grid", type=_grid(float))
    r.add_argument("--n-grid", type=_int_grid)
    r.add_argument("--audit-lambda-grid", type=_grid(float), help="bridge: discount audit grid")
    r.add_argument("--seed", type=int, default=7)
    r.add_argument("--out", default=".")
    r.add_argument("--step", type=float, default=1e-2, help="integrator step h")
    r.add_argument("--graph", help="discrete: graph file (id cost succ...)")
    r.add_argument("--preset", default="square-wave", help=f"means: one of {', '.join(PRESETS)}")
    r.add_argument("--n-random", type=int, default=200, help="random schedules in the audits")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    opts = RunOptions(
        name=args.name,
        t_grid=args.t_grid,
        lambda_grid=args.lambda_grid,
        n_grid=args.n_grid,
        audit_lambda_grid=args.audit_lambda_grid,
        seed=args.seed,
        out=args.out,
        step=args.step,
        graph=args.graph,
        preset=args.preset,
        n_random=args.n_random,
    )
    try:
        if args.step <= 0 or args.n_random < 1:
            raise UsageError("--step must be positive and --n-random at least 1")
        if args.graph is not None and not Path(args.graph).is_file():
            raise UsageError(f"graph file not found: {args.graph}")
        return run(opts)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"tauberlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
