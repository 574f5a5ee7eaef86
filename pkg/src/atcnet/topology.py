"""Combination-matrix validation and structural decomposition.

A combination matrix stores, in entry (l, k), the weight agent k applies to
data received from agent l, so every column is a convex combination and the
directed edge set is {l -> k : weights[l, k] > 0}. The decomposition splits
the agents into sending sub-networks (strongly connected, primitive, no
inbound edges) and receiving sub-networks (everything else) and extracts the
canonical block-triangular form obtained by renumbering agents so senders
come first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ColumnSumViolation,
    IsolatedRAgent,
    NegativeWeight,
    NoConvergence,
    NonPrimitiveSource,
    NonSquare,
)

COLUMN_SUM_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class CombinationMatrix:
    """Validated left-stochastic weight matrix over a directed network."""

    n: int
    weights: np.ndarray  # (n, n), read-only


@dataclass(frozen=True)
class Condensation:
    """SCCs of the agent graph plus the (acyclic) edges between them.

    ``sccs`` is ordered topologically along the flow direction (components
    that feed others come first); members keep their input order.
    """

    sccs: tuple[tuple[int, ...], ...]
    edges: frozenset[tuple[int, int]]  # (from_scc, to_scc) indices into sccs


@dataclass(frozen=True, eq=False)
class NetworkPartition:
    """Canonical sending/receiving decomposition of a combination matrix.

    ``order`` lists original agent ids in canonical order (senders first);
    the blocks are taken from weights[order][:, order].
    """

    scc_list: tuple[tuple[int, ...], ...]
    s_type_ids: tuple[int, ...]
    r_type_ids: tuple[int, ...]
    order: np.ndarray  # (n,), read-only
    t_ss: np.ndarray
    t_sr: np.ndarray
    t_rr: np.ndarray
    n_gs: int
    n_gr: int
    s_sizes: tuple[int, ...]
    r_sizes: tuple[int, ...]

    @property
    def n(self) -> int:
        return self.n_gs + self.n_gr

    @property
    def s_agents(self) -> tuple[int, ...]:
        """Original ids of sending agents, in canonical order."""
        return tuple(int(i) for i in self.order[: self.n_gs])

    @property
    def r_agents(self) -> tuple[int, ...]:
        """Original ids of receiving agents, in canonical order."""
        return tuple(int(i) for i in self.order[self.n_gs :])

    def s_blocks(self) -> list[np.ndarray]:
        """Diagonal blocks of t_ss, one per sending sub-network."""
        blocks = []
        at = 0
        for size in self.s_sizes:
            blocks.append(self.t_ss[at : at + size, at : at + size])
            at += size
        return blocks

    def subnetwork_of_s_agent(self) -> np.ndarray:
        """Sub-network index for each canonical sending position."""
        out = np.empty(self.n_gs, dtype=int)
        at = 0
        for s, size in enumerate(self.s_sizes):
            out[at : at + size] = s
            at += size
        return out

    def r_column(self, agent_id: int) -> int:
        """Canonical receiving-side column index for an original agent id."""
        for col, aid in enumerate(self.r_agents):
            if aid == agent_id:
                return col
        raise KeyError(agent_id)

    def permute(self, matrix: np.ndarray) -> np.ndarray:
        """Apply the canonical symmetric permutation to an (n, n) matrix."""
        return matrix[np.ix_(self.order, self.order)]


@dataclass(frozen=True, eq=False)
class PerronVector:
    """Positive, sum-one eigenvector of a primitive left-stochastic block."""

    entries: np.ndarray


def validate(matrix) -> CombinationMatrix:
    """Check nonnegativity and unit column sums; renormalize within tolerance.

    Columns whose sums deviate from 1 by at most ``COLUMN_SUM_TOL`` (printed
    matrices are often rounded to a few decimals) are rescaled exactly to 1.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquare(a.shape)
    if a.shape[0] < 1:
        raise NonSquare(a.shape)
    neg = np.argwhere(a < 0)
    if neg.size:
        l, k = neg[0]
        raise NegativeWeight(int(l), int(k), float(a[l, k]))
    sums = a.sum(axis=0)
    bad = np.argwhere(np.abs(sums - 1.0) > COLUMN_SUM_TOL)
    if bad.size:
        k = int(bad[0][0])
        raise ColumnSumViolation(k, float(sums[k]))
    return CombinationMatrix(n=a.shape[0], weights=_frozen(a / sums))


def _tarjan_sccs(adj: list[list[int]]) -> list[list[int]]:
    """Iterative Tarjan; returns SCCs in reverse topological order."""
    n = len(adj)
    index = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sccs: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for i in range(pi, len(adj[v])):
                w = adj[v][i]
                if index[w] == -1:
                    work[-1] = (v, i + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


def condense(a: CombinationMatrix) -> Condensation:
    """SCC decomposition of the directed graph {l -> k : weights[l, k] > 0}."""
    w = a.weights
    n = a.n
    adj = [list(np.nonzero(w[l] > 0)[0]) for l in range(n)]
    raw = _tarjan_sccs(adj)

    comp_of = [0] * n
    for ci, comp in enumerate(raw):
        for v in comp:
            comp_of[v] = ci

    raw_edges = set()
    for l in range(n):
        for k in adj[l]:
            if comp_of[l] != comp_of[k]:
                raw_edges.add((comp_of[l], comp_of[k]))

    # Deterministic topological order: Kahn with smallest original agent id first.
    indeg = [0] * len(raw)
    out_edges: list[list[int]] = [[] for _ in raw]
    for u, v in raw_edges:
        indeg[v] += 1
        out_edges[u].append(v)
    key = [min(comp) for comp in raw]
    ready = sorted((i for i in range(len(raw)) if indeg[i] == 0), key=lambda i: key[i])
    topo: list[int] = []
    while ready:
        u = min(ready, key=lambda i: key[i])
        ready.remove(u)
        topo.append(u)
        for v in out_edges[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)

    relabel = {old: new for new, old in enumerate(topo)}
    sccs = tuple(tuple(int(v) for v in sorted(raw[old])) for old in topo)
    edges = frozenset((relabel[u], relabel[v]) for u, v in raw_edges)
    return Condensation(sccs=sccs, edges=edges)


def _period(adj_in_scc: dict[int, list[int]], members: tuple[int, ...]) -> int:
    """Period of a strongly connected subgraph (gcd of closed-walk lengths).

    Uses BFS levels from one root: the period is gcd(level[u] + 1 - level[v])
    over all edges u -> v inside the component. Returns 0 for a single node
    without a self-loop (no closed walk at all).
    """
    root = members[0]
    level = {root: 0}
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj_in_scc[u]:
                if v not in level:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u in members:
        for v in adj_in_scc[u]:
            g = math.gcd(g, level[u] + 1 - level[v])
    return g


def classify(a: CombinationMatrix) -> NetworkPartition:
    """Split SCCs into sending and receiving groups and extract blocks.

    Sending sub-networks are SCCs with no inbound edge whose diagonal block
    is primitive; all other SCCs are receiving. Receiving SCCs keep the
    condensation's topological order so the internal receiving block comes
    out block upper-triangular.
    """
    cond = condense(a)
    has_inbound = [False] * len(cond.sccs)
    for _, v in cond.edges:
        has_inbound[v] = True

    w = a.weights
    s_ids, r_ids = [], []
    for ci, members in enumerate(cond.sccs):
        if has_inbound[ci]:
            r_ids.append(ci)
            continue
        adj = {
            u: [v for v in members if w[u, v] > 0]
            for u in members
        }
        if _period(adj, members) != 1:
            raise NonPrimitiveSource(ci, members)
        s_ids.append(ci)

    order = np.array(
        [v for ci in s_ids for v in cond.sccs[ci]]
        + [v for ci in r_ids for v in cond.sccs[ci]],
        dtype=int,
    )
    n_gs = sum(len(cond.sccs[ci]) for ci in s_ids)
    n_gr = a.n - n_gs
    permuted = w[np.ix_(order, order)]
    t_ss = permuted[:n_gs, :n_gs]
    t_sr = permuted[:n_gs, n_gs:]
    t_rr = permuted[n_gs:, n_gs:]

    # A receiving SCC whose own block keeps all its column weight would never
    # settle; with a valid left-stochastic matrix this cannot happen, but a
    # block spectral radius at 1 is rejected explicitly.
    at = 0
    for ci in r_ids:
        size = len(cond.sccs[ci])
        block = t_rr[at : at + size, at : at + size]
        if spectral_radius(block) >= 1.0 - 1e-12:
            raise IsolatedRAgent(ci, cond.sccs[ci])
        at += size

    return NetworkPartition(
        scc_list=cond.sccs,
        s_type_ids=tuple(s_ids),
        r_type_ids=tuple(r_ids),
        order=_frozen(order).astype(int),
        t_ss=_frozen(t_ss),
        t_sr=_frozen(t_sr),
        t_rr=_frozen(t_rr),
        n_gs=n_gs,
        n_gr=n_gr,
        s_sizes=tuple(len(cond.sccs[ci]) for ci in s_ids),
        r_sizes=tuple(len(cond.sccs[ci]) for ci in r_ids),
    )


def perron(block: np.ndarray, tol: float = 1e-12, max_iter: int = 100000) -> PerronVector:
    """Power iteration for the positive sum-one eigenvector at eigenvalue 1.

    Seeded with the uniform vector, which has nonzero overlap with the
    (positive) target for any primitive left-stochastic block. Stops once
    the returned iterate itself satisfies ||A p - p||_inf < tol.
    """
    b = np.asarray(block, dtype=float)
    n = b.shape[0]
    p = np.full(n, 1.0 / n)
    bp = b @ p
    for _ in range(max_iter):
        if np.abs(bp - p).max() < tol:
            return PerronVector(entries=_frozen(p))
        p = bp / bp.sum()
        bp = b @ p
    raise NoConvergence(max_iter, what="Perron power iteration")


def spectral_radius(t: np.ndarray, tol: float = 1e-10, max_squarings: int = 200) -> float:
    """Dominant eigenvalue magnitude via normalized repeated squaring.

    Tracks ||T^(2^j)||_inf with per-step rescaling; the 2^j-th root of the
    accumulated scale converges to the spectral radius from above and is
    insensitive to complex eigenvalue pairs, unlike plain vector iteration.
    """
    b = np.asarray(t, dtype=float)
    if b.size == 0:
        return 0.0
    scale = float(np.abs(b).sum(axis=1).max())
    if scale == 0.0:
        return 0.0
    b = b / scale
    log_acc = math.log(scale)
    power = 1
    estimate = scale
    for _ in range(max_squarings):
        b = b @ b
        power *= 2
        s = float(np.abs(b).sum(axis=1).max())
        if s == 0.0:
            return 0.0
        b = b / s
        log_acc = 2.0 * log_acc + math.log(s)
        new_estimate = math.exp(log_acc / power)
        if abs(new_estimate - estimate) <= tol * max(1.0, abs(new_estimate)):
            return new_estimate
        estimate = new_estimate
    raise NoConvergence(max_squarings, what="spectral radius estimate")
