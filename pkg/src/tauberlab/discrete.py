"""Deterministic dynamic programming on a finite graph.

A play from z visits z = y_1, y_2, ... with y_{i+1} a successor of y_i and
pays g(y_i) at step i. ``value_n`` is the best n-step average,
``value_lambda`` the best lam-discounted sum, and ``min_mean_cycle`` the
common limit of both (the cheapest cycle mean reachable from z).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

from .errors import DomainError
from .report import ValueReport

__all__ = [
    "DiscreteProblem",
    "ValueTable",
    "value_n",
    "value_n_sweep",
    "value_lambda",
    "fixed_point_residual",
    "min_mean_cycle",
    "min_mean_cycle_all",
    "monotonicity_audit",
    "tauberian_gap",
    "random_graph",
    "read_graph",
    "write_graph",
    "parse_graph",
    "format_graph",
]


class DiscreteProblem:
    """Finite state set, successor lists (the correspondence) and costs in [0, 1].

    States are indexed 0..N-1; ``labels`` keeps external identifiers.
    Successor lists are stored sorted and deduplicated, so argmin ties
    resolve to the lowest index.
    """

    def __init__(self, costs: Sequence[float], successors: Sequence[Iterable[int]], labels=None):
        if len(successors) != len(costs):
            raise DomainError("one successor list per state is required")
        lists = [np.asarray(list(s), dtype=np.int64) for s in successors]
        indptr = np.concatenate([[0], np.cumsum([a.size for a in lists])]).astype(np.int64)
        indices = np.concatenate(lists) if lists else np.empty(0, dtype=np.int64)
        self._setup(costs, indptr, indices, labels)

    @classmethod
    def from_csr(cls, costs, indptr, indices, labels=None) -> "DiscreteProblem":
        """Build from compressed rows: successors of i are indices[indptr[i]:indptr[i+1]]."""
        obj = cls.__new__(cls)
        obj._setup(costs, np.asarray(indptr, dtype=np.int64), np.asarray(indices, dtype=np.int64), labels)
        return obj

    def _setup(self, costs, indptr, indices, labels):
        costs = np.asarray(costs, dtype=float)
        n = costs.size
        if n == 0:
            raise DomainError("empty state set")
        if indptr.size != n + 1 or indptr[0] != 0 or indptr[-1] != indices.size:
            raise DomainError("malformed successor structure")
        if costs.min() < 0 or costs.max() > 1:
            raise DomainError("costs must lie in [0, 1]")
        deg = np.diff(indptr)
        if (deg <= 0).any():
            raise DomainError(f"state {int(np.argmax(deg <= 0))} has no successor")
        if indices.min() < 0 or indices.max() >= n:
            raise DomainError("a successor lies outside the state set")
        rows = np.repeat(np.arange(n), deg)
        order = np.lexsort((indices, rows))
        rows, cols = rows[order], indices[order]
        keep = np.ones(rows.size, dtype=bool)
        keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        self.src, self.dst = rows[keep], cols[keep]
        deg = np.bincount(self.src, minlength=n)
        self.indptr = np.concatenate([[0], np.cumsum(deg)]).astype(np.int64)
        self.costs = costs
        self.labels = list(range(n)) if labels is None else list(labels)
        if len(self.labels) != n:
            raise DomainError("one label per state is required")
        # pad with the first successor: min and argmin are unaffected
        pad = np.repeat(self.dst[self.indptr[:-1]][:, None], int(deg.max()), axis=1)
        pad[self.src, np.arange(self.src.size) - self.indptr[self.src]] = self.dst
        self.succ_matrix = pad

    @property
    def n_states(self) -> int:
        return self.costs.size

    @property
    def n_edges(self) -> int:
        return self.dst.size

    def successors_of(self, i: int) -> np.ndarray:
        return self.dst[self.indptr[i] : self.indptr[i + 1]]

    @property
    def successors(self) -> list[np.ndarray]:
        return [self.successors_of(i) for i in range(self.n_states)]

    def index(self, label) -> int:
        return self.labels.index(label)

    def adjacency(self) -> sparse.csr_matrix:
        n = self.n_states
        return sparse.csr_matrix((np.ones(self.n_edges), (self.src, self.dst)), shape=(n, n))

    def __repr__(self):
        return f"DiscreteProblem(states={self.n_states}, edges={self.n_edges})"


@dataclass(frozen=True)
class ValueTable:
    kind: str  # "n" or "lambda"
    param: float
    values: np.ndarray
    witness: np.ndarray  # optimal successor index per state

    def __getitem__(self, i):
        return self.values[i]


TIE_RTOL = 1e-12


def _best_successor(p: DiscreteProblem, w: np.ndarray):
    """Minimum of w over successors, and the lowest successor within rounding of it."""
    q = w[p.succ_matrix]
    m = q.min(axis=1)
    tied = q <= (m + TIE_RTOL * np.maximum(1.0, np.abs(m)))[:, None]
    j = np.argmax(tied, axis=1)
    rows = np.arange(p.n_states)
    return m, p.succ_matrix[rows, j]


def value_n(p: DiscreteProblem, n: int) -> ValueTable:
    """Exact n-step values: S_1 = g, S_k = g + min_succ S_{k-1}, v_n = S_n / n."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    S = p.costs.copy()
    witness = p.succ_matrix[:, 0].copy()
    for _ in range(n - 1):
        m, witness = _best_successor(p, S)
        S = p.costs + m
    return ValueTable("n", float(n), S / n, witness)


def value_n_sweep(p: DiscreteProblem, n_grid: Sequence[int]) -> dict[int, ValueTable]:
    """value_n at every n of ``n_grid`` from one DP pass."""
    wanted = sorted({int(n) for n in n_grid})
    if not wanted or wanted[0] < 1:
        raise DomainError("n_grid must hold positive integers")
    out = {}
    S = p.costs.copy()
    witness = p.succ_matrix[:, 0].copy()
    k = 1
    for n in wanted:
        while k < n:
            m, witness = _best_successor(p, S)
            S = p.costs + m
            k += 1
        out[n] = ValueTable("n", float(n), S / n, witness.copy())
    return out


def _evaluate_policy(p: DiscreteProblem, lam: float, policy: np.ndarray) -> np.ndarray:
    n = p.n_states
    P = sparse.csr_matrix((np.full(n, 1.0 - lam), (np.arange(n), policy)), shape=(n, n))
    A = sparse.identity(n, format="csr") - P
    return np.asarray(spsolve(A.tocsc(), lam * p.costs), dtype=float).reshape(n)


def fixed_point_residual(p: DiscreteProblem, lam: float, v: np.ndarray) -> float:
    """sup_z |v(z) - lam g(z) - (1 - lam) min_succ v|."""
    m, _ = _best_successor(p, v)
    return float(np.max(np.abs(v - lam * p.costs - (1.0 - lam) * m)))


def value_lambda(
    p: DiscreteProblem,
    lam: float,
    tol: float = 1e-10,
    method: str = "policy",
    max_iter: int | None = None,
) -> ValueTable:
    """Unique fixed point of v = lam g + (1 - lam) min_succ v.

    ``method="policy"`` runs policy iteration with exact sparse policy
    evaluation, then polishes with value-iteration steps; ``"value"`` runs
    plain value iteration. Both stop once the sup-norm change is at most
    tol * lam / (1 - lam), which bounds the error by tol.
    """
    if not 0.0 < lam <= 1.0:
        raise DomainError("lambda must lie in (0, 1]")
    if tol <= 0:
        raise DomainError("tol must be positive")
    if lam == 1.0:
        _, w = _best_successor(p, np.zeros(p.n_states))
        return ValueTable("lambda", 1.0, p.costs.copy(), w)

    stop = tol * lam / (1.0 - lam)
    if method == "policy":
        _, policy = _best_successor(p, p.costs)
        for _ in range(10 * p.n_states + 10):
            v = _evaluate_policy(p, lam, policy)
            m, cand = _best_successor(p, v)
            current = v[policy]
            better = m < current - 1e-13 * max(1.0, float(np.abs(v).max()))
            if not better.any():
                break
            policy = np.where(better, cand, policy)
        v = np.clip(v, 0.0, 1.0)
    elif method == "value":
        v = p.costs.copy()
    else:
        raise DomainError(f"unknown method {method!r}")

    if max_iter is None:
        max_iter = int(math.ceil(math.log(stop / 2.0) / math.log1p(-lam))) + 10
    witness = p.succ_matrix[:, 0]
    for _ in range(max(max_iter, 1)):
        m, witness = _best_successor(p, v)
        new = lam * p.costs + (1.0 - lam) * m
        change = float(np.max(np.abs(new - v)))
        v = new
        if change <= stop:
            break
    _, witness = _best_successor(p, v)
    return ValueTable("lambda", float(lam), v, witness)


def _karp(p: DiscreteProblem, nodes: np.ndarray) -> float:
    """Minimum cycle mean inside the strongly connected node set ``nodes``."""
    k = nodes.size
    local = -np.ones(p.n_states, dtype=np.int64)
    local[nodes] = np.arange(k)
    mask = (local[p.src] >= 0) & (local[p.dst] >= 0)
    src, dst = local[p.src[mask]], local[p.dst[mask]]
    if src.size == 0:
        return math.inf
    w = p.costs[p.src[mask]]
    D = np.full((k + 1, k), np.inf)
    D[0, 0] = 0.0
    for step in range(1, k + 1):
        cand = D[step - 1, src] + w
        np.minimum.at(D[step], dst, cand)
    best = math.inf
    with np.errstate(invalid="ignore"):
        for v in range(k):
            if not np.isfinite(D[k, v]):
                continue
            ks = np.arange(k)
            fin = np.isfinite(D[:k, v])
            ratios = (D[k, v] - D[:k, v][fin]) / (k - ks[fin])
            best = min(best, float(ratios.max()))
    return best


def min_mean_cycle_all(p: DiscreteProblem) -> np.ndarray:
    """Cheapest cycle mean reachable from every state (Karp per strong component)."""
    n_comp, comp = csgraph.connected_components(p.adjacency(), directed=True, connection="strong")
    comp_mean = np.full(n_comp, np.inf)
    self_loop = np.zeros(p.n_states, dtype=bool)
    self_loop[p.src[p.src == p.dst]] = True
    for c in range(n_comp):
        nodes = np.nonzero(comp == c)[0]
        if nodes.size == 1 and not self_loop[nodes[0]]:
            continue
        comp_mean[c] = _karp(p, nodes)
    # propagate minima backwards through the condensation DAG
    cedges = {(int(a), int(b)) for a, b in zip(comp[p.src], comp[p.dst]) if a != b}
    cadj = [[] for _ in range(n_comp)]
    indeg = np.zeros(n_comp, dtype=np.int64)
    for a, b in cedges:
        cadj[a].append(b)
        indeg[b] += 1
    order, stack = [], [c for c in range(n_comp) if indeg[c] == 0]
    while stack:
        c = stack.pop()
        order.append(c)
        for b in cadj[c]:
            indeg[b] -= 1
            if indeg[b] == 0:
                stack.append(b)
    best = comp_mean.copy()
    for c in reversed(order):
        for b in cadj[c]:
            best[c] = min(best[c], best[b])
    return best[comp]


def min_mean_cycle(p: DiscreteProblem, z: int) -> float:
    """Minimum mean cost over cycles reachable from state index ``z``."""
    reach = csgraph.breadth_first_order(p.adjacency(), z, directed=True, return_predecessors=False)
    sub = np.sort(reach)
    # restrict to the reachable subgraph and reuse the component solver
    local = -np.ones(p.n_states, dtype=np.int64)
    local[sub] = np.arange(sub.size)
    mask = local[p.src] >= 0
    deg = np.bincount(local[p.src[mask]], minlength=sub.size)
    indptr = np.concatenate([[0], np.cumsum(deg)])
    q = DiscreteProblem.from_csr(p.costs[sub], indptr, local[p.dst[mask]])
    return float(min_mean_cycle_all(q)[local[z]])


def monotonicity_audit(
    p: DiscreteProblem,
    n_max: int,
    lambda_grid: Sequence[float],
    mmc: np.ndarray | None = None,
) -> ValueReport:
    """Values along optimal moves z -> y never drop beyond the one-step slack.

    Checks, for every state z and its optimal successor y:
    mmc(z) <= mmc(y); v_n(z) <= v_n(y) + 1/n; v_lam(z) <= v_lam(y) + lam.
    """
    if mmc is None:
        mmc = min_mean_cycle_all(p)
    rep = ValueReport(
        "monotonicity_audit",
        ["kind", "param", "state", "successor", "value_state", "value_successor", "slack", "pass"],
        meta={"states": p.n_states, "n_max": n_max},
    )
    tol = 1e-12
    vn = value_n(p, n_max)
    for z in range(p.n_states):
        y = int(vn.witness[z])
        rep.add("limit", math.inf, p.labels[z], p.labels[y], float(mmc[z]), float(mmc[y]), 0.0,
                bool(mmc[z] <= mmc[y] + tol))
    for z in range(p.n_states):
        y = int(vn.witness[z])
        slack = 1.0 / n_max
        rep.add("n", float(n_max), p.labels[z], p.labels[y], float(vn.values[z]), float(vn.values[y]),
                slack, bool(vn.values[z] <= vn.values[y] + slack + tol))
    for lam in lambda_grid:
        vl = value_lambda(p, lam)
        for z in range(p.n_states):
            y = int(vl.witness[z])
            rep.add("lambda", float(lam), p.labels[z], p.labels[y], float(vl.values[z]),
                    float(vl.values[y]), float(lam), bool(vl.values[z] <= vl.values[y] + lam + tol))
    return rep


def tauberian_gap(p: DiscreteProblem, n_grid: Sequence[int], mmc: np.ndarray | None = None) -> ValueReport:
    """Uniform gaps between v_n, v_{1/n} and the min-mean-cycle limit along n_grid.

    Each row passes when both value gaps to the limit are at most 2 N / n
    (N states): an optimal n-step play spends at most N steps off its
    final cycle, and similarly for the discounted play.
    """
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise DomainError("n_grid must be ascending")
    if mmc is None:
        mmc = min_mean_cycle_all(p)
    tables = value_n_sweep(p, n_grid)
    rep = ValueReport(
        "tauberian_gap",
        ["n", "gap_n_limit", "gap_lambda_limit", "gap_n_lambda", "bound", "pass"],
        meta={"states": p.n_states, "edges": p.n_edges},
    )
    for n in n_grid:
        vn = tables[n].values
        vl = value_lambda(p, 1.0 / n).values
        g_n = float(np.max(np.abs(vn - mmc)))
        g_l = float(np.max(np.abs(vl - mmc)))
        bound = 2.0 * p.n_states / n
        rep.add(n, g_n, g_l, float(np.max(np.abs(vn - vl))), bound, bool(g_n <= bound and g_l <= bound))
    return rep


def random_graph(n_states: int, rng: np.random.Generator, max_out: int = 3) -> DiscreteProblem:
    """Uniform costs, 1..max_out successors drawn uniformly per state."""
    costs = rng.uniform(0.0, 1.0, size=n_states)
    succ = []
    for _ in range(n_states):
        k = int(rng.integers(1, max_out + 1))
        succ.append(rng.choice(n_states, size=min(k, n_states), replace=False))
    return DiscreteProblem(costs, succ)


def parse_graph(text: str) -> DiscreteProblem:
    """Read ``id cost succ1 succ2 ...`` lines; ``#`` starts a comment."""
    rows = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise DomainError(f"line {lineno}: need an id, a cost and at least one successor")
        try:
            sid = int(parts[0])
            cost = float(parts[1])
            succ = [int(x) for x in parts[2:]]
        except ValueError:
            raise DomainError(f"line {lineno}: malformed entry") from None
        if sid < 0 or any(s < 0 for s in succ):
            raise DomainError(f"line {lineno}: ids must be non-negative integers")
        if sid in rows:
            raise DomainError(f"line {lineno}: duplicate state {sid}")
        rows[sid] = (cost, succ)
    if not rows:
        raise DomainError("graph has no states")
    ids = sorted(rows)
    pos = {sid: i for i, sid in enumerate(ids)}
    missing = {s for _, succ in rows.values() for s in succ if s not in pos}
    if missing:
        raise DomainError(f"successors without a definition: {sorted(missing)[:5]}")
    costs = [rows[i][0] for i in ids]
    succ = [[pos[s] for s in rows[i][1]] for i in ids]
    return DiscreteProblem(costs, succ, labels=ids)


def format_graph(p: DiscreteProblem, comment: str | None = None) -> str:
    """Inverse of ``parse_graph``. Non-integer labels are replaced by indices."""
    int_labels = all(isinstance(l, (int, np.integer)) and l >= 0 for l in p.labels)
    lab = p.labels if int_labels else list(range(p.n_states))
    buf = io.StringIO()
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    for i in range(p.n_states):
        succ = " ".join(str(lab[j]) for j in p.successors_of(i))
        buf.write(f"{lab[i]} {float(p.costs[i])!r} {succ}\n")
    return buf.getvalue()


def read_graph(path) -> DiscreteProblem:
    return parse_graph(Path(path).read_text())


def write_graph(p: DiscreteProblem, path, comment: str | None = None) -> None:
    Path(path).write_text(format_graph(p, comment))
