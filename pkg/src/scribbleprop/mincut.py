"""Multi-label energy minimization by graph cuts.

``max_flow`` is a from-scratch augmenting-path solver in the tree-reuse style
(grow / augment / adopt): two search trees rooted at the terminals grow until
they touch, the connecting path is saturated, and orphaned subtrees are
re-adopted instead of rebuilt.  ``alpha_expansion`` drives it through binary
keep-or-switch moves; the pairwise model is Potts (a metric), so each move is
solved exactly by one cut.

Conventions fixed for determinism: arcs are scanned in insertion order, the
expansion cycles labels in ascending universe order, and nodes whose keep and
switch costs tie stay with their current label (they end on the sink side of
the cut).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import errors
from .energy import total_energy

EPS = 1e-12          # residual capacities at or below this count as saturated
CONVERGENCE = 1e-9   # stop when a full label cycle improves energy by less

FREE, SOURCE_TREE, SINK_TREE = 0, 1, 2
NO_ARC = -1


class FlowNetwork:
    """s-t network with paired forward/reverse arcs (arc ``a`` pairs ``a ^ 1``).

    A network is single-use: max_flow consumes capacities in place.
    """

    def __init__(self, node_count, source, sink):
        if source == sink or not (0 <= source < node_count and 0 <= sink < node_count):
            raise errors.InvalidParameter("source/sink must be distinct valid nodes")
        self.node_count = node_count
        self.source = source
        self.sink = sink
        self.arc_to = []
        self.arc_cap = []
        self.arc_cap0 = []
        self.adj = [[] for _ in range(node_count)]

    def add_arc(self, u, v, cap, rev_cap=0.0):
        """Add arc u->v with capacity cap and its reverse with rev_cap."""
        if cap < 0 or rev_cap < 0 or not (np.isfinite(cap) and np.isfinite(rev_cap)):
            raise errors.InvalidParameter(f"capacities must be finite and >= 0: {cap}, {rev_cap}")
        a = len(self.arc_to)
        self.arc_to.extend((v, u))
        self.arc_cap.extend((float(cap), float(rev_cap)))
        self.arc_cap0.extend((float(cap), float(rev_cap)))
        self.adj[u].append(a)
        self.adj[v].append(a + 1)
        return a

    def arc_flow(self, a):
        """Net flow pushed through arc ``a`` (negative if the pair's reverse won)."""
        return self.arc_cap0[a] - self.arc_cap[a]


@dataclass
class CutResult:
    max_flow_value: float
    source_side: np.ndarray  # bool per node; True = source side of the min cut


def max_flow(net):
    """Run the solver to completion and return the flow value and min cut.

    The reported cut is the residual-reachable set from the source, so tied
    nodes (all paths saturated) land on the sink side.
    """
    cap = net.arc_cap
    to = net.arc_to
    adj = net.adj
    s, t = net.source, net.sink
    n = net.node_count

    tree = [FREE] * n
    tree[s], tree[t] = SOURCE_TREE, SINK_TREE
    parent_arc = [NO_ARC] * n
    active = deque((s, t))
    in_active = [False] * n
    in_active[s] = in_active[t] = True
    orphans = deque()

    def activate(v):
        if not in_active[v]:
            in_active[v] = True
            active.append(v)

    def grow():
        """Expand both trees; return the arc joining them, or NO_ARC."""
        while active:
            u = active[0]
            if tree[u] != FREE:
                if tree[u] == SOURCE_TREE:
                    for a in adj[u]:
                        if cap[a] > EPS:
                            v = to[a]
                            if tree[v] == FREE:
                                tree[v] = SOURCE_TREE
                                parent_arc[v] = a
                                activate(v)
                            elif tree[v] == SINK_TREE:
                                return a
                else:
                    for a in adj[u]:
                        if cap[a ^ 1] > EPS:  # residual arc to[a] -> u
                            v = to[a]
                            if tree[v] == FREE:
                                tree[v] = SINK_TREE
                                parent_arc[v] = a ^ 1  # arc v -> u toward the sink
                                activate(v)
                            elif tree[v] == SOURCE_TREE:
                                return a ^ 1
            active.popleft()
            in_active[u] = False
        return NO_ARC

    def augment(link):
        """Push the bottleneck along source-tree + link + sink-tree path."""
        u, v = to[link ^ 1], to[link]
        bottleneck = cap[link]
        w = u
        while w != s:
            pa = parent_arc[w]
            if cap[pa] < bottleneck:
                bottleneck = cap[pa]
            w = to[pa ^ 1]
        w = v
        while w != t:
            pa = parent_arc[w]
            if cap[pa] < bottleneck:
                bottleneck = cap[pa]
            w = to[pa]

        cap[link] -= bottleneck
        cap[link ^ 1] += bottleneck
        w = u
        while w != s:
            pa = parent_arc[w]
            cap[pa] -= bottleneck
            cap[pa ^ 1] += bottleneck
            if cap[pa] <= EPS:  # w lost its source-tree parent
                parent_arc[w] = NO_ARC
                orphans.append(w)
            w = to[pa ^ 1]
        w = v
        while w != t:
            pa = parent_arc[w]
            cap[pa] -= bottleneck
            cap[pa ^ 1] += bottleneck
            if cap[pa] <= EPS:
                parent_arc[w] = NO_ARC
                orphans.append(w)
            w = to[pa]
        return bottleneck

    def rooted(v):
        """True if v's parent chain reaches its terminal (no orphan on the way)."""
        term = s if tree[v] == SOURCE_TREE else t
        while v != term:
            pa = parent_arc[v]
            if pa == NO_ARC:
                return False
            v = to[pa ^ 1] if tree[v] == SOURCE_TREE else to[pa]
        return True

    def adopt():
        while orphans:
            u = orphans.popleft()
            tr = tree[u]
            found = False
            for a in adj[u]:
                # new parent must offer residual capacity toward u's terminal
                residual = cap[a ^ 1] if tr == SOURCE_TREE else cap[a]
                if residual > EPS:
                    p = to[a]
                    if tree[p] == tr and rooted(p):
                        parent_arc[u] = (a ^ 1) if tr == SOURCE_TREE else a
                        found = True
                        break
            if found:
                continue
            # u leaves the tree: its children orphan, frontier neighbors reactivate
            for a in adj[u]:
                v = to[a]
                if tree[v] != tr:
                    continue
                pa = parent_arc[v]
                if pa != NO_ARC:
                    parent = to[pa ^ 1] if tr == SOURCE_TREE else to[pa]
                    if parent == u:
                        parent_arc[v] = NO_ARC
                        orphans.append(v)
                residual = cap[a ^ 1] if tr == SOURCE_TREE else cap[a]
                if residual > EPS:
                    activate(v)
            tree[u] = FREE
            parent_arc[u] = NO_ARC

    flow = 0.0
    while True:
        link = grow()
        if link == NO_ARC:
            break
        flow += augment(link)
        adopt()

    # min cut = residual-reachable set from the source
    side = np.zeros(n, dtype=bool)
    side[s] = True
    queue = deque((s,))
    while queue:
        u = queue.popleft()
        for a in adj[u]:
            v = to[a]
            if cap[a] > EPS and not side[v]:
                side[v] = True
                queue.append(v)
    return CutResult(flow, side)


# ---------------------------------------------------------------------------
# alpha-expansion over an EnergyProblem

def expansion_move(problem, current, alpha):
    """Best labeling where each superpixel keeps its label or switches to alpha.

    Honors the forbidden mask: alpha-forbidden superpixels cannot switch, and
    superpixels whose current label is forbidden (possible only at
    initialization) must switch.  Raises InfeasibleCurrent when neither side
    is allowed for some superpixel.
    """
    y = np.asarray(current, dtype=np.int64)
    n = problem.num_sites
    if y.shape != (n,):
        raise errors.LengthMismatch(f"labeling length {y.shape} vs {n} sites")
    costs = problem.unary.costs
    forbid = problem.unary.forbidden
    rows = np.arange(n)
    cur_forbidden = forbid[rows, y]
    alpha_forbidden = forbid[:, alpha]
    stuck = cur_forbidden & alpha_forbidden
    if stuck.any():
        raise errors.InfeasibleCurrent(
            f"superpixel {int(np.nonzero(stuck)[0][0])} allows neither its current label nor alpha")

    fixed_alpha = (y == alpha) | cur_forbidden     # ends at alpha either way
    fixed_keep = alpha_forbidden & ~fixed_alpha
    var = ~(fixed_alpha | fixed_keep)
    var_ids = np.nonzero(var)[0]

    result = y.copy()
    result[fixed_alpha] = alpha
    if len(var_ids) == 0:
        return result

    node_of = np.full(n, -1, dtype=np.int64)
    node_of[var_ids] = np.arange(len(var_ids))
    keep_cost = costs[var_ids, y[var_ids]].copy()
    switch_cost = costs[var_ids, alpha].copy()

    # classify edges; pairs of variable nodes with differing labels need an
    # auxiliary node each
    var_pairs = []
    for (i, j), w in zip(problem.edge_index, problem.edge_weight):
        if w <= 0.0:
            continue
        i_var, j_var = var[i], var[j]
        if i_var and j_var:
            var_pairs.append((node_of[i], node_of[j], int(y[i] != y[j]), w))
        elif i_var or j_var:
            v, f = (i, j) if i_var else (j, i)
            vn = node_of[v]
            if fixed_alpha[f]:
                keep_cost[vn] += w          # V(y_v, alpha), y_v != alpha here
            else:
                if y[v] != y[f]:
                    keep_cost[vn] += w      # V(y_v, y_f)
                switch_cost[vn] += w        # V(alpha, y_f), y_f != alpha here

    n_aux = sum(1 for _, _, differ, _ in var_pairs if differ)
    n_nodes = len(var_ids) + n_aux + 2
    source, sink = n_nodes - 2, n_nodes - 1
    net = FlowNetwork(n_nodes, source, sink)

    # source side of the cut = switch to alpha; sink side = keep
    for v in range(len(var_ids)):
        net.add_arc(source, v, keep_cost[v])    # paid when v keeps (sink side)
        net.add_arc(v, sink, switch_cost[v])    # paid when v switches (source side)
    aux = len(var_ids)
    for ni, nj, differ, w in var_pairs:
        if differ:
            net.add_arc(source, aux, w)
            net.add_arc(aux, ni, w, w)
            net.add_arc(aux, nj, w, w)
            aux += 1
        else:
            net.add_arc(ni, nj, w, w)

    cut = max_flow(net)
    switched = cut.source_side[:len(var_ids)]
    result[var_ids[switched]] = alpha
    return result


def default_init(problem):
    """Per-superpixel argmin of the allowed unary costs, ties to lowest index."""
    masked = np.where(problem.unary.forbidden, np.inf, problem.unary.costs)
    return np.argmin(masked, axis=1).astype(np.int64)


def alpha_expansion(problem, init=None, trace=None):
    """Cycle expansion moves over the universe until a full pass stops helping.

    ``init`` defaults to the unary argmin.  ``trace``, when given, collects
    the energy after every move (used by the monotone-descent checks).
    """
    if problem.unary.forbidden.all(axis=1).any():
        raise errors.NoFeasibleLabeling("some superpixel has no allowed label")
    y = default_init(problem) if init is None else np.asarray(init, dtype=np.int64).copy()
    e = total_energy(problem, y)
    if trace is not None:
        trace.append(e)
    while True:
        cycle_start = e
        for alpha in range(problem.num_labels):
            y = expansion_move(problem, y, alpha)
            e = total_energy(problem, y)
            if trace is not None:
                trace.append(e)
        if not cycle_start - e > CONVERGENCE:
            break
    return y
