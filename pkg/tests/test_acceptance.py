"""Acceptance criteria, one test each; every test prints a one-line verdict."""

import csv
import io
import itertools
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from tauberlab import cli
from tauberlab.bridge import bang_family, discount_error_audit, discretize, full_gap, horizon_error_audit, kernel_gap
from tauberlab.control import (
    SearchConfig,
    analytic_V,
    analytic_W,
    counterexample,
    estimate_Vlambda,
    estimate_Vt,
    lower_bound_audit,
)
from tauberlab.discrete import fixed_point_residual, min_mean_cycle_all, random_graph, value_lambda, value_n
from tauberlab.kernel import convexity_residual, lemma_i_margin, lemma_ii_margin, mass, mass_quadrature
from tauberlab.plays import Trajectory


def _record(number, title, checks, started):
    """Print and keep a one-line verdict, then fail the test if any check failed."""
    ok = all(v for _, v in checks)
    bad = [name for name, v in checks if not v]
    status = "PASS" if ok else "FAIL"
    detail = "" if ok else f" failed: {', '.join(bad)}"
    line = f"[{status}] criterion {number}: {title} ({time.perf_counter() - started:.1f} s){detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _csv_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_criterion_1_counterexample_limits(tmp_path):
    t0 = time.perf_counter()
    argv = ["run", "counterexample", "--t-grid", "100,1000,10000", "--lambda-grid", "0.1,0.01,0.001",
            "--seed", "7", "--out", str(tmp_path)]
    code = cli.main(argv)
    rows = [r for r in _csv_rows(tmp_path / "counterexample.csv") if r["section"] == "limits"]
    vt = [float(r["value"]) for r in rows if r["kind"] == "V_t"]
    vl = [float(r["value"]) for r in rows if r["kind"] == "V_lambda"]
    elapsed = time.perf_counter() - t0
    _record(1, f"V_t(0,0) {['%.4f' % v for v in vt]}, V_lambda(0,0) {['%.4f' % v for v in vl]}", [
        ("exit code 0", code == 0),
        ("three V_t values", len(vt) == 3),
        ("V_t in [0.5, 0.55]", all(0.5 <= v <= 0.55 for v in vt)),
        ("V_t decreasing in t", all(b < a for a, b in zip(vt, vt[1:]))),
        ("three V_lambda values", len(vl) == 3),
        ("V_lambda in [0.75, 0.80]", all(0.75 <= v <= 0.80 for v in vl)),
        ("V_lambda decreasing as lambda -> 0", all(b < a for a, b in zip(vl, vl[1:]))),
        ("runtime <= 120 s", elapsed <= 120),
    ], t0)


def test_criterion_2_lower_bound_audit():
    t0 = time.perf_counter()
    h = 1e-2
    rep = lower_bound_audit(200, 100.0, 0.1, seed=7, h=h, slack=10 * h)
    _record(2, f"lower-bound audit, 200 random schedules, seed 7: {len(rep.failures)} violations, "
               f"min gamma_t {rep.meta['min_gamma_t']:.4f}, min gamma_lambda {rep.meta['min_gamma_lambda']:.4f}", [
        ("zero violations", rep.passed),
        ("all schedules checked", len(rep.rows) >= 200),
    ], t0)


def test_criterion_3_analytic_tables():
    t0 = time.perf_counter()
    p = counterexample()
    expected = {
        (0.0, 0.0): (0.5, 0.75),
        (0.5, 0.0): (1 / 3, 0.615099),
        (1.5, 0.0): (0.0, 0.0),
        (3.0, 0.0): (1.0, 1.0),
        (1.0, 0.5): (1.0, 1.0),
    }
    checks = []
    worst = 0.0
    for x0, (v, w) in expected.items():
        checks.append((f"V{x0}", abs(analytic_V(*x0) - v) <= 1e-12))
        checks.append((f"W{x0}", abs(analytic_W(*x0) - w) <= 1e-6))
        et = estimate_Vt(p, x0, 1e4).value
        el = estimate_Vlambda(p, x0, 1e-3).value
        excess = max(et - analytic_V(*x0), el - analytic_W(*x0))
        worst = max(worst, excess)
        # finite-horizon values may sit below the limit (e.g. 1 - 2/t at (1, 0.5))
        checks.append((f"estimates at {x0} within 0.07", excess <= 0.07))
    _record(3, f"analytic V/W tables exact at 5 states; estimator excess max {worst:.1e}", checks, t0)


def test_criterion_4_kernel_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    mass_err = 0.0
    for _ in range(100):
        lam = float(10 ** rng.uniform(-2, 1))
        a, b = np.sort(rng.uniform(0, 50 / lam, 2))
        mass_err = max(mass_err, abs(mass(lam, a, b) - mass_quadrature(lam, a, b)))
    eps_grid = np.round(np.arange(0.01, 0.5001, 0.01), 10)
    lemma_i = all(lemma_i_margin(t, e).passed for e in eps_grid for t in (1.0, 10.0, 1000.0))
    spread = 0.0
    for e in (1e-4, 1e-3, 1e-2, 0.1, 0.3):
        vals = [lemma_ii_margin(t, e, 0.05).mass_value for t in (1e-2, 1.0, 10.0, 1e3, 1e5)]
        spread = max(spread, max(vals) - min(vals))
    res1, ratios = [], []
    for seed in range(20):
        r = np.random.default_rng(seed)
        step = 0.005
        cuts = np.sort(r.choice(np.arange(1, 40000), size=30, replace=False))
        levels = r.uniform(0, 1, 31)
        X = Trajectory.from_costs(levels[np.searchsorted(cuts, np.arange(40001), side="right")], step)
        a = convexity_residual(X, 0.1, 200.0, h=0.01)
        b = convexity_residual(X, 0.1, 200.0, h=0.005)
        res1.append(a)
        ratios.append(b / a if a > 0 else 0.0)
    _record(4, f"mass err {mass_err:.1e}; lemma ii t-spread {spread:.1e}; convexity residual max {max(res1):.1e}, "
               f"halving ratio max {max(ratios):.2f}", [
        ("closed form vs quadrature <= 1e-10", mass_err <= 1e-10),
        ("lemma i passes on eps grid 0.01..0.5", lemma_i),
        ("lemma ii t-independent to 1e-12", spread <= 1e-12),
        ("convexity residual <= 1e-3 at h=0.01", max(res1) <= 1e-3),
        ("residual at least halves under h -> h/2", max(ratios) <= 0.5),
    ], t0)


def _policy_vlambda(p, lam, depth):
    sigma = np.array(list(itertools.product(*[p.successors_of(i).tolist() for i in range(p.n_states)])))
    rows = np.arange(sigma.shape[0])[:, None]
    cur = np.broadcast_to(np.arange(p.n_states), sigma.shape).copy()
    acc, w = np.zeros(sigma.shape), lam
    for _ in range(depth):
        acc += w * p.costs[cur]
        w *= 1 - lam
        cur = sigma[rows, cur]
    return acc.min(axis=0)


def _paths_vn(p, n):
    out = np.empty(p.n_states)
    deg = np.diff(p.indptr)
    for z in range(p.n_states):
        ends, sums = np.array([z]), np.array([p.costs[z]])
        for _ in range(n - 1):
            parent = np.repeat(np.arange(ends.size), deg[ends])
            ends = np.concatenate([p.successors_of(e) for e in ends])
            sums = sums[parent] + p.costs[ends]
        out[z] = sums.min() / n
    return out


def test_criterion_5_discrete_tauberian():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    n = 10_000
    worst_ratio, worst_nl, worst_res = 0.0, 0.0, 0.0
    for _ in range(30):
        p = random_graph(int(rng.integers(5, 51)), rng)
        mmc = min_mean_cycle_all(p)
        vn = value_n(p, n).values
        vl = value_lambda(p, 1 / n).values
        gap = max(np.max(np.abs(vn - mmc)), np.max(np.abs(vl - mmc)))
        worst_ratio = max(worst_ratio, gap / (2 * p.n_states / n))
        worst_nl = max(worst_nl, float(np.max(np.abs(vn - vl))))
        worst_res = max(worst_res, fixed_point_residual(p, 1 / n, vl))
    brute = 0.0
    for seed in range(5):
        p = random_graph(10, np.random.default_rng(100 + seed))
        for lam in (0.5, 0.1):
            depth = math.ceil(math.log(1e-9) / math.log(1 - lam))
            brute = max(brute, float(np.max(np.abs(value_lambda(p, lam).values - _policy_vlambda(p, lam, depth)))))
        brute = max(brute, float(np.max(np.abs(value_n(p, 8).values - _paths_vn(p, 8)))))
    _record(5, f"30 graphs, n=1e4: gap/(2N/n) max {worst_ratio:.2f}, |v_n - v_1/n| max {worst_nl:.1e}, "
               f"residual {worst_res:.1e}, brute force {brute:.1e}", [
        ("sup gaps <= 2N/n", worst_ratio <= 1.0),
        ("sup |v_1/n - v_n| <= 0.02", worst_nl <= 0.02),
        ("fixed-point residual <= 1e-8", worst_res <= 1e-8),
        ("brute-force agreement <= 1e-6", brute <= 1e-6),
    ], t0)


def test_criterion_6_bridge_bounds():
    t0 = time.perf_counter()
    lams = (0.5, 0.1, 0.01, 0.001)
    gaps = [kernel_gap(l) for l in lams]
    Es = [g[0] for g in gaps]
    ident = max(abs(full_gap(l) - 2 * kernel_gap(l)[0]) for l in lams)
    cap = 2_000_000
    bp = discretize(counterexample(), (0.0, 0.0), bang_family(32), depth=256, quant=1 / 2048, node_cap=cap)
    hz = horizon_error_audit(bp, [5, 10, 20, 30])
    dc = discount_error_audit(bp, [0.5, 0.2, 0.1, 0.05])
    elapsed = time.perf_counter() - t0
    _record(6, f"E(lambda) {['%.3g' % e for e in Es]}, identity err {ident:.1e}, {bp.n_nodes} nodes, "
               f"horizon diffs max {max(hz.column('difference')):.3f}, discount diffs max "
               f"{max(dc.column('difference')):.3f}", [
        ("E <= e^lambda - 1", all(g[2] for g in gaps)),
        ("E strictly decreasing", all(b < a for a, b in zip(Es, Es[1:]))),
        ("full_gap = 2E within 1e-9", ident <= 1e-9),
        ("horizon audit passes", hz.passed),
        ("discount audit passes", dc.passed),
        ("node cap respected", bp.n_nodes <= cap),
        ("expansion closed", bp.closed),
        ("runtime <= 300 s", elapsed <= 300),
    ], t0)


def test_criterion_7_mismatch_and_nonuniformity():
    t0 = time.perf_counter()
    p = counterexample()
    V = estimate_Vt(p, (0.0, 0.0), 1e4).value
    W = estimate_Vlambda(p, (0.0, 0.0), 1e-3).value
    rest = estimate_Vt(p, (1.0, 0.0), 1e3).value
    moving = estimate_Vt(p, (1.0, 0.01), 1e3).value
    _record(7, f"W - V at (0,0) = {W - V:.4f}; V_t(1,0.01) = {moving:.4f} vs V_t(1,0) = {rest:.2e} at t=1e3", [
        ("mismatch near 1/4", abs((W - V) - 0.25) <= 0.05),
        ("V_t(1,0) ~ 0", rest <= 1e-6),
        ("V_t(1,0.01) ~ 1", moving >= 0.85),
    ], t0)
