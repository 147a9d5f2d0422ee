"""Continuous time to discrete time: one time unit becomes one step.

A product state (w, x) records where a unit-length piece of play ended (w)
and what it cost on average over that unit (x). Stepping between product
states through a finite family of unit schedules gives a finite graph whose
n-step and discounted values approximate V_t and V_lambda, within
2/floor(t) and within the kernel gap below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .control.band import band_unit_step
from .control.estimate import SearchConfig, estimate_Vlambda, estimate_Vt
from .control.problems import ControlProblem, ControlSchedule
from .control.simulate import simulate_batch
from .discrete import DiscreteProblem, format_graph, value_lambda, value_n
from .errors import CapacityError, DomainError
from .report import ValueReport

__all__ = [
    "BridgedProblem",
    "bang_family",
    "discretize",
    "kernel_gap",
    "full_gap",
    "horizon_error_audit",
    "discount_error_audit",
]

X_RESOLUTION = 1e-6
SINK = -1  # omega id shared by every absorbing end state


def bang_family(k: int = 32) -> tuple[ControlSchedule, ...]:
    """u = 1 on [0, j/k], then 0, for j = 0..k (one time unit each)."""
    if k < 1:
        raise DomainError("k must be positive")
    return tuple(ControlSchedule.bang(j / k) if j < k else ControlSchedule.constant(1.0) for j in range(k + 1))


@dataclass
class BridgedProblem:
    """Reachable product states (w, x) and the induced graph with cost x.

    Node 0 is the root: the initial state w0 before any unit has elapsed.
    Its own cost is never paid, so values at w0 are minima over the root's
    successors.
    """

    base: ControlProblem
    root: tuple
    unit_schedules: tuple
    quant: float
    depth: int
    omegas: np.ndarray  # (M, d) quantized states, index = omega id
    node_omega: np.ndarray  # (N,) omega id per product node, SINK for absorbed
    node_x: np.ndarray  # (N,) unit cost per product node
    discrete: DiscreteProblem
    closed: bool  # True when no reachable state was left unexpanded
    truncated: int  # product nodes given a self-loop at the depth limit
    max_snap: float  # largest quantization displacement of an end state
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.discrete.n_states

    def product_state(self, i: int):
        w = self.node_omega[i]
        state = ("sink",) if w == SINK else tuple(float(v) for v in self.omegas[w])
        return state, float(self.node_x[i])

    def successors(self, i: int) -> list:
        return [self.product_state(j) for j in self.discrete.successors_of(i)]

    def value_n(self, n: int) -> float:
        """v_n at the root: best average of the first n unit costs."""
        self._check_horizon(n)
        v = value_n(self.discrete, n).values
        return float(v[self.discrete.successors_of(0)].min())

    def value_lambda(self, lam: float, tol: float = 1e-10) -> float:
        """v_lambda at the root: best of lam * sum_k (1-lam)^k x_{k+1}."""
        if not 0.0 < lam < 1.0:
            raise DomainError("lambda must lie in (0, 1)")
        v = value_lambda(self.discrete, lam, tol).values
        return float(v[self.discrete.successors_of(0)].min())

    def _check_horizon(self, n: int) -> None:
        if not self.closed and n > self.depth:
            raise DomainError(f"horizon {n} exceeds the expansion depth {self.depth}")

    def graph_text(self) -> str:
        lines = [
            f"bridged {self.base.name} from {self.root}",
            f"quant {self.quant!r} depth {self.depth} closed {self.closed}",
            "node 0 is the root; its cost is never paid",
        ]
        return format_graph(self.discrete, "\n".join(lines))

    def export_graph(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.graph_text())


def _unit_step(p: ControlProblem, states: np.ndarray, sched: ControlSchedule, h: float, exact: bool):
    """End states after one time unit and the average cost over it."""
    if exact and p.zero_band is not None:
        return band_unit_step(states, sched.breakpoints, sched.values, p.zero_band)
    n = int(round(1.0 / h))
    if abs(n * h - 1.0) > 1e-9:
        raise DomainError("step h must divide the unit interval")
    bp = [b for b in sched.breakpoints if b < 1.0]
    vals = sched.values[: len(bp) + 1]
    ends, costs = np.empty_like(states), np.empty(states.shape[0])
    chunk = 2048
    for a in range(0, states.shape[0], chunk):
        s = states[a : a + chunk]
        B = s.shape[0]
        X, c = simulate_batch(
            p, s, np.tile(np.asarray(bp, dtype=float), (B, 1)), np.tile(np.asarray(vals, dtype=float), (B, 1)),
            1.0, h, keep_states=True,
        )
        ends[a : a + B] = X[:, -1]
        costs[a : a + B] = h * (c.sum(axis=1) - 0.5 * (c[:, 0] + c[:, -1]))
    return ends, np.clip(costs, 0.0, 1.0)


def _keys(q: np.ndarray) -> np.ndarray:
    """One int64 key per lattice point (two-dimensional lattices only)."""
    q = q.astype(np.int64) + (1 << 30)
    return q[:, 0] * (1 << 31) + q[:, 1]


def discretize(
    p: ControlProblem,
    x0,
    unit_schedules: Sequence[ControlSchedule] | None = None,
    depth: int = 128,
    quant: float = 1.0 / 2048,
    node_cap: int = 2_000_000,
    h: float = 1e-2,
    exact: bool = True,
) -> BridgedProblem:
    """Breadth-first expansion of the product graph from w0 = x0.

    Each unit schedule is run for one time unit from every frontier state;
    the end state is snapped to the lattice x0 + quant * Z^2 and the
    average unit cost stored to 1e-6. End states the problem marks as
    absorbing (cost 1 forever) collapse into one sink. Expansion stops
    when no new state appears or after ``depth`` levels; unexpanded states
    then loop on themselves and are counted in ``truncated``.
    """
    if depth < 1:
        raise DomainError("depth must be at least 1")
    if quant <= 0:
        raise DomainError("quant must be positive")
    if p.state_dim != 2:
        raise DomainError("the product lattice is implemented for two-dimensional states")
    scheds = tuple(unit_schedules) if unit_schedules is not None else bang_family()
    if not scheds:
        raise DomainError("need at least one unit schedule")
    for s in scheds:
        p.check_schedule(s)

    # the lattice origin is the initial state itself, so w0 is represented exactly
    origin = np.asarray(x0, dtype=float).reshape(1, 2)
    if p.invariant is not None and not np.asarray(p.invariant(origin)).all():
        raise DomainError("initial state lies outside the state space")
    root_q = np.zeros((1, 2))
    known_keys = _keys(root_q)  # sorted
    known_ids = np.array([0], dtype=np.int64)
    omegas = [origin.copy()]
    frontier = np.array([0], dtype=np.int64)
    frontier_states = origin.copy()
    n_omega = 1
    edge_src, edge_dst, edge_x = [], [], []
    max_snap = 0.0
    level = 0
    while frontier.size and level < depth:
        dst_all, x_all = [], []
        new_states = []
        for sched in scheds:
            ends, cost = _unit_step(p, frontier_states, sched, h, exact)
            q = np.rint((ends - origin) / quant)
            max_snap = max(max_snap, float(np.abs(origin + q * quant - ends).max()))
            absorbed = np.asarray(p.absorbing(ends), dtype=bool) if p.absorbing is not None else np.zeros(len(ends), bool)
            keys = _keys(q)
            dst = np.full(keys.size, SINK, dtype=np.int64)
            live = ~absorbed
            pos = np.searchsorted(known_keys, keys[live])
            pos = np.minimum(pos, known_keys.size - 1)
            hit = known_keys[pos] == keys[live]
            idx_live = np.nonzero(live)[0]
            dst[idx_live[hit]] = known_ids[pos[hit]]
            new_states.append((keys[idx_live[~hit]], q[idx_live[~hit]], idx_live[~hit], len(dst_all)))
            dst_all.append(dst)
            x_all.append(np.where(absorbed, 1.0, cost))
        # register new lattice points, in sorted key order
        fresh_keys = np.concatenate([k for k, _, _, _ in new_states])
        fresh_q = np.concatenate([q for _, q, _, _ in new_states]) if fresh_keys.size else np.empty((0, 2))
        uniq, first, inv = np.unique(fresh_keys, return_index=True, return_inverse=True)
        new_ids = n_omega + np.arange(uniq.size)
        offset = 0
        for k, _, where, j in new_states:
            dst_all[j][where] = new_ids[inv[offset : offset + k.size]]
            offset += k.size
        if uniq.size:
            omegas.append(origin + fresh_q[first] * quant)
            order = np.argsort(np.concatenate([known_keys, uniq]), kind="stable")
            known_keys = np.concatenate([known_keys, uniq])[order]
            known_ids = np.concatenate([known_ids, new_ids])[order]
            n_omega += uniq.size
        # edges grouped by source, schedules in the given order
        dst_mat = np.stack(dst_all, axis=1)
        x_mat = np.stack(x_all, axis=1)
        edge_src.append(np.repeat(frontier, len(scheds)))
        edge_dst.append(dst_mat.ravel())
        edge_x.append(np.rint(np.clip(x_mat, 0.0, 1.0).ravel() / X_RESOLUTION).astype(np.int64))
        if n_omega * len(scheds) > 4 * node_cap:
            raise CapacityError(f"{n_omega} lattice states exceed the node cap {node_cap}", int(uniq.size))
        frontier = new_ids
        frontier_states = origin + fresh_q[first] * quant if uniq.size else np.empty((0, 2))
        level += 1

    closed = frontier.size == 0
    omegas_arr = np.concatenate(omegas, axis=0)
    e_src = np.concatenate(edge_src)
    e_dst = np.concatenate(edge_dst)
    e_x = np.concatenate(edge_x)
    # sink: enters with some x, then pays 1 forever
    e_src = np.concatenate([e_src, [SINK]])
    e_dst = np.concatenate([e_dst, [SINK]])
    e_x = np.concatenate([e_x, [int(round(1.0 / X_RESOLUTION))]])

    # product nodes: root first, then every distinct (omega, x) edge target
    stride = int(round(1.0 / X_RESOLUTION)) + 1
    tkey = (e_dst + 1) * stride + e_x
    tnodes, t_inv = np.unique(tkey, return_inverse=True)
    n_nodes = 1 + tnodes.size
    if n_nodes > node_cap:
        raise CapacityError(f"{n_nodes} product states exceed the node cap {node_cap}", int(frontier.size))
    node_omega = np.concatenate([[0], tnodes // stride - 1])
    node_x = np.concatenate([[0.0], (tnodes % stride) * X_RESOLUTION])
    edge_target = 1 + t_inv

    # successors of a product node are the edge targets of its omega
    order = np.argsort(e_src + 1, kind="stable")
    e_src_s, targets = e_src[order] + 1, edge_target[order]
    omega_deg = np.bincount(e_src_s, minlength=n_omega + 1)  # slot 0 is the sink
    omega_ptr = np.concatenate([[0], np.cumsum(omega_deg)])
    slot = node_omega + 1
    deg = omega_deg[slot]
    unexpanded = deg == 0
    truncated = int(unexpanded.sum())
    deg = np.where(unexpanded, 1, deg)
    indptr = np.concatenate([[0], np.cumsum(deg)])
    start = np.repeat(omega_ptr[slot], deg)
    within = np.arange(indptr[-1]) - np.repeat(indptr[:-1], deg)
    indices = targets[np.minimum(start + within, targets.size - 1)]
    owner = np.repeat(np.arange(n_nodes), deg)
    indices = np.where(unexpanded[owner], owner, indices)

    disc = DiscreteProblem.from_csr(node_x, indptr, indices)
    return BridgedProblem(
        base=p,
        root=tuple(float(v) for v in omegas_arr[0]),
        unit_schedules=scheds,
        quant=float(quant),
        depth=int(depth),
        omegas=omegas_arr,
        node_omega=node_omega,
        node_x=node_x,
        discrete=disc,
        closed=bool(closed),
        truncated=truncated,
        max_snap=max_snap,
        meta={"levels": level, "lattice_states": n_omega, "edges": disc.n_edges},
    )


# kernel gap between (1 - lam)^floor(t) and exp(-lam t)


def _unit_pieces(lam: float, k: np.ndarray):
    """On [k, k+1): level a = (1-lam)^k and crossing point c with exp(-lam c) = a."""
    a = np.exp(k * math.log1p(-lam))
    c = np.clip(-k * math.log1p(-lam) / lam, k, k + 1.0)
    return a, c


def _exact_parts(lam: float):
    """Positive and negative parts of lam * int (1-lam)^floor(t) - exp(-lam t) dt, exactly."""
    r = -math.log1p(-lam) / lam  # >= 1
    # from index K on, the crossing lies past k + 1 and the integrand is <= 0
    K = int(math.ceil(1.0 / (r - 1.0))) + 1 if r > 1.0 else 1
    k = np.arange(K, dtype=float)
    a, c = _unit_pieces(lam, k)
    e = lambda t: np.exp(-lam * t)
    pos = lam * (a * (k + 1.0 - c)) - (e(c) - e(k + 1.0))
    neg = (e(k) - e(c)) - lam * a * (c - k)
    # whole intervals k >= K: lam * int_K^inf e^{-lam t} - lam * sum_{k>=K} (1-lam)^k
    tail = math.exp(-lam * K) - math.exp(K * math.log1p(-lam))
    return float(np.sum(pos)), float(np.sum(neg)) + tail


def _quadrature_parts(lam: float, s_max: float, h: float):
    """Same split by composite Simpson rules on [k, c] and [c, k+1] per unit interval."""
    K = int(math.ceil(s_max))
    k = np.arange(K, dtype=float)
    a, c = _unit_pieces(lam, k)
    m = max(2, 2 * int(math.ceil(0.5 / h)))  # even panel count per unit
    w = np.ones(m + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    u = np.linspace(0.0, 1.0, m + 1)

    def simpson(lo, hi, f):
        t = lo[:, None] + (hi - lo)[:, None] * u[None, :]
        return ((hi - lo) / (3.0 * m)) * (f(t) @ w)

    pos = simpson(c, k + 1.0, lambda t: a[:, None] - np.exp(-lam * t))
    neg = simpson(k, c, lambda t: np.exp(-lam * t) - a[:, None])
    return lam * float(pos.sum()), lam * float(neg.sum())


def _check_lambda(lam):
    if not 0.0 < lam < 1.0:
        raise DomainError("lambda must lie in (0, 1)")


def _check_truncation(lam, s_max):
    tail = max(math.exp(-lam * s_max), math.exp(math.floor(s_max) * math.log1p(-lam)))
    if tail > 1e-9:
        raise DomainError(f"s_max={s_max} leaves kernel mass {tail:.2e} > 1e-9 beyond it")


def kernel_gap(lam: float, s_max: float | None = None, h: float | None = None):
    """E(lam) = lam * int_0^inf [(1-lam)^floor(t) - exp(-lam t)]_+ dt against e^lam - 1.

    Without ``h`` the integral is exact (closed form per unit interval,
    split at the crossing point). With ``h`` it is recomputed by Simpson
    quadrature of step about h on [0, s_max], which needs both kernels'
    mass beyond s_max to be below 1e-9. Returns (E, bound, pass).
    """
    _check_lambda(lam)
    if h is None:
        E = _exact_parts(lam)[0]
    else:
        if h <= 0:
            raise DomainError("h must be positive")
        s_max = s_max if s_max is not None else math.log(1e10) / lam + 1.0
        _check_truncation(lam, s_max)
        E = _quadrature_parts(lam, s_max, h)[0]
    bound = math.expm1(lam)
    return E, bound, bool(E <= bound)


def full_gap(lam: float, s_max: float | None = None, h: float | None = None) -> float:
    """lam * int_0^inf |(1-lam)^floor(t) - exp(-lam t)| dt (equals 2 E(lam))."""
    _check_lambda(lam)
    if h is None:
        pos, neg = _exact_parts(lam)
    else:
        if h <= 0:
            raise DomainError("h must be positive")
        s_max = s_max if s_max is not None else math.log(1e10) / lam + 1.0
        _check_truncation(lam, s_max)
        pos, neg = _quadrature_parts(lam, s_max, h)
    return pos + neg


# cross-engine audits


def _declared_slack(bp: BridgedProblem, slack: float, cost_lipschitz: float) -> float:
    return slack + cost_lipschitz * bp.max_snap


def horizon_error_audit(
    bp: BridgedProblem,
    t_grid: Sequence[float],
    search: SearchConfig = SearchConfig(),
    slack: float = 0.02,
    cost_lipschitz: float = 1.0,
) -> ValueReport:
    """|V_t - v_floor(t)| at the root against 2/floor(t) plus the declared slack.

    ``slack`` covers the finite unit-schedule family and the search
    behind the V_t estimate; ``cost_lipschitz * max_snap`` covers the
    lattice snapping (zero when every end state lies on the lattice).
    """
    extra = _declared_slack(bp, slack, cost_lipschitz)
    rep = ValueReport(
        "horizon_error_audit",
        ["t", "V_t", "v_n", "difference", "bound", "pass"],
        meta={
            "problem": bp.base.name, "root": bp.root, "quant": bp.quant, "depth": bp.depth,
            "closed": bp.closed, "nodes": bp.n_nodes, "slack": slack,
            "cost_lipschitz": cost_lipschitz, "max_snap": bp.max_snap,
        },
    )
    for t in t_grid:
        n = int(math.floor(t))
        if n < 1:
            raise DomainError("t must be at least 1")
        Vt = estimate_Vt(bp.base, bp.root, float(t), search).value
        vn = bp.value_n(n)
        diff = abs(Vt - vn)
        bound = 2.0 / n + extra
        rep.add(float(t), Vt, vn, diff, bound, bool(diff <= bound))
    return rep


def discount_error_audit(
    bp: BridgedProblem,
    lambda_grid: Sequence[float],
    search: SearchConfig = SearchConfig(),
    slack: float = 0.02,
    cost_lipschitz: float = 1.0,
) -> ValueReport:
    """|V_lam - v_lam| at the root against full_gap(lam) plus the declared slack."""
    extra = _declared_slack(bp, slack, cost_lipschitz)
    rep = ValueReport(
        "discount_error_audit",
        ["lambda", "V_lambda", "v_lambda", "difference", "bound", "pass"],
        meta={
            "problem": bp.base.name, "root": bp.root, "quant": bp.quant, "depth": bp.depth,
            "closed": bp.closed, "nodes": bp.n_nodes, "slack": slack,
            "cost_lipschitz": cost_lipschitz, "max_snap": bp.max_snap,
        },
    )
    if not bp.closed:
        rep.meta["warning"] = "expansion truncated; discounted tails use self-loops"
    for lam in lambda_grid:
        _check_lambda(lam)
        Vl = estimate_Vlambda(bp.base, bp.root, float(lam), search).value
        vl = bp.value_lambda(float(lam))
        diff = abs(Vl - vl)
        bound = full_gap(float(lam)) + extra
        rep.add(float(lam), Vl, vl, diff, bound, bool(diff <= bound))
    return rep
