"""Size constraints over the extended naturals: extraction from grids,
the labeled constraint graph and its condensation, canonical minimal
solutions, bad-path certificates, and the square (equal side sums)
analysis.

Each grid cell contributes constraints on its column size x and row size
y; a solution assigns every grid node a value in N+ union {aleph0} so
that a product frame with those side sizes maps onto the grid.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .extnat import ALEPH0, ExtNat, ext_max, ext_min, ext_sum
from .grids import BiCluster, BiClusterType, GridSpec, classify_bicluster, sizes


# ---------------------------------------------------------------------------
# constraints


@dataclass(frozen=True)
class Eq:
    node: str
    value: ExtNat

    def __post_init__(self):
        object.__setattr__(self, "value", ExtNat.of(self.value))

    def __str__(self):
        return f"({self.node} = {self.value})"


@dataclass(frozen=True)
class Ge:
    node: str
    bound: int

    def __post_init__(self):
        if self.bound < 1:
            raise ValueError("lower bounds are positive")

    def __str__(self):
        return f"({self.node} >= {self.bound})"


@dataclass(frozen=True)
class GeScaled:
    node: str
    scale: int  # 1 or 2
    other: str

    def __post_init__(self):
        if self.scale not in (1, 2):
            raise ValueError("scale must be 1 or 2")

    def __str__(self):
        lam = "" if self.scale == 1 else "2*"
        return f"({self.node} >= {lam}{self.other})"


Constraint = Union[Eq, Ge, GeScaled]


@dataclass(frozen=True)
class ConstraintSet:
    xs: tuple[str, ...]
    ys: tuple[str, ...]
    constraints: frozenset[Constraint]

    def nodes(self) -> tuple[str, ...]:
        return self.xs + self.ys

    def side(self, node: str) -> str:
        if node in self.xs:
            return "x"
        if node in self.ys:
            return "y"
        raise KeyError(node)


@dataclass(frozen=True)
class ImpossibleCell:
    x: str
    y: str
    kind: BiClusterType


def _cell_constraints(x: str, y: str, c: BiCluster) -> Optional[list[Constraint]]:
    """Table row for one cell; None encodes an impossible cell."""
    t = classify_bicluster(c)
    h, v, n = sizes(c)
    if t.impossible:
        return None
    if t is BiClusterType.COUNTABLY_INFINITE or t.infinity:
        return [Eq(x, ALEPH0), Eq(y, ALEPH0)]
    if t is BiClusterType.H2V_SWITCH:
        return [GeScaled(x, 2, y), Ge(y, v.finite)]
    if t is BiClusterType.V2H_SWITCH:
        return [Ge(x, h.finite), GeScaled(y, 2, x)]
    if t is BiClusterType.EQ_SWITCH:
        return [GeScaled(x, 1, y), GeScaled(y, 1, x), Ge(x, h.finite), Ge(y, v.finite)]
    if t is BiClusterType.H_STRICT:
        return [Eq(x, n), Ge(y, v.finite)]
    if t is BiClusterType.V_STRICT:
        return [Ge(x, h.finite), Eq(y, n)]
    if t is BiClusterType.HV_STRICT:
        return [Eq(x, n), Eq(y, n)]
    if t is BiClusterType.FREE:
        return [Ge(x, h.finite), Ge(y, v.finite)]
    raise AssertionError(t)


def extract_constraints(g: GridSpec) -> Union[ConstraintSet, ImpossibleCell]:
    out: set[Constraint] = set()
    for x in g.xs:
        for y in g.ys:
            c = g.cell(x, y)
            cons = _cell_constraints(x, y, c)
            if cons is None:
                return ImpossibleCell(x, y, classify_bicluster(c))
            out.update(cons)
    for z in g.nodes():
        out.add(Ge(z, 1))
    return ConstraintSet(g.xs, g.ys, frozenset(out))


def node_bounds(con: ConstraintSet, z: str) -> tuple[ExtNat, ExtNat]:
    """(max_F(z), min_F(z)): the least equality value (aleph0 when there is
    none) and the sup of all equality/lower-bound values."""
    eqs = [c.value for c in con.constraints if isinstance(c, Eq) and c.node == z]
    lows = [ExtNat(c.bound) for c in con.constraints if isinstance(c, Ge) and c.node == z]
    mx = ext_min(eqs, default=ALEPH0)
    mn = ext_max(eqs + lows, default=ExtNat(1))
    return mx, mn


Solution = dict[str, ExtNat]


def check_solution(
    con: ConstraintSet, xi: Solution
) -> tuple[bool, Optional[Constraint]]:
    for z in con.nodes():
        if z not in xi:
            raise ValueError(f"solution missing node {z!r}")
        if not xi[z].is_infinite and xi[z].finite < 1:
            return False, Ge(z, 1)
    for c in sorted(con.constraints, key=str):
        if isinstance(c, Eq):
            if xi[c.node] != c.value:
                return False, c
        elif isinstance(c, Ge):
            if xi[c.node] < ExtNat(c.bound):
                return False, c
        else:
            if xi[c.node] < ExtNat(c.scale) * xi[c.other]:
                return False, c
    return True, None


# ---------------------------------------------------------------------------
# constraint graph and condensation


@dataclass(frozen=True)
class ConstraintGraph:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, int, str]]  # (z, label, z')

    def successors(self, z: str) -> list[tuple[int, str]]:
        return sorted((lam, w) for (u, lam, w) in self.edges if u == z)


def build_graph(con: ConstraintSet) -> ConstraintGraph:
    edges = frozenset(
        (c.node, c.scale, c.other)
        for c in con.constraints
        if isinstance(c, GeScaled)
    )
    for z, lam, w in edges:
        if lam == 1 and (w, 1, z) not in edges:
            raise AssertionError("one-labelled edges must come in pairs")
    return ConstraintGraph(tuple(sorted(con.nodes())), edges)


def _tarjan_sccs(nodes: Iterable[str], succ: dict[str, list[str]]) -> list[list[str]]:
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    sccs: list[list[str]] = []
    counter = itertools.count()

    for start in sorted(nodes):
        if start in index:
            continue
        work = [(start, iter(succ.get(start, ())))]
        index[start] = low[start] = next(counter)
        stack.append(start)
        on_stack.add(start)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(sorted(comp))
    return sccs


@dataclass(frozen=True)
class Condensation:
    sccs: tuple[tuple[str, ...], ...]
    scc_of: dict[str, int]
    edges: frozenset[tuple[int, int]]  # via 2-labelled edges; may self-loop
    max_s: tuple[ExtNat, ...]
    min_s: tuple[ExtNat, ...]
    rank: tuple[ExtNat, ...]

    def scc_key(self, i: int) -> frozenset[str]:
        return frozenset(self.sccs[i])


def condense(graph: ConstraintGraph, con: ConstraintSet) -> Condensation:
    succ: dict[str, list[str]] = {z: [] for z in graph.nodes}
    for z, _, w in sorted(graph.edges):
        succ[z].append(w)
    comps = _tarjan_sccs(graph.nodes, succ)
    comps.sort(key=lambda c: c[0])
    scc_of = {z: i for i, comp in enumerate(comps) for z in comp}

    edges: set[tuple[int, int]] = set()
    internal_two = [False] * len(comps)
    for z, lam, w in graph.edges:
        if lam == 2:
            a, b = scc_of[z], scc_of[w]
            edges.add((a, b))
            if a == b:
                internal_two[a] = True

    bounds = {z: node_bounds(con, z) for z in graph.nodes}
    max_s = tuple(
        ext_min([bounds[z][0] for z in comp]) for comp in comps
    )
    min_s = tuple(
        ALEPH0 if internal_two[i] else ext_max([bounds[z][1] for z in comps[i]])
        for i in range(len(comps))
    )

    # rank: sup of outgoing path lengths; infinite once a self-looping
    # component is reachable
    nscc = len(comps)
    out: dict[int, list[int]] = {i: [] for i in range(nscc)}
    for a, b in edges:
        if a != b:
            out[a].append(b)
    reaches_loop = [internal_two[i] for i in range(nscc)]
    changed = True
    while changed:
        changed = False
        for a in range(nscc):
            if not reaches_loop[a] and any(reaches_loop[b] for b in out[a]):
                reaches_loop[a] = True
                changed = True
    finite_rank: dict[int, int] = {}

    def rank_of(i: int) -> int:
        if i in finite_rank:
            return finite_rank[i]
        r = 0
        for b in out[i]:
            r = max(r, 1 + rank_of(b))
        finite_rank[i] = r
        return r

    rank = tuple(
        ALEPH0 if reaches_loop[i] else ExtNat(rank_of(i)) for i in range(nscc)
    )
    return Condensation(
        tuple(tuple(c) for c in comps), scc_of, frozenset(edges), max_s, min_s, rank
    )


def compute_solution(con: ConstraintSet) -> tuple[dict[frozenset, ExtNat], Solution]:
    """The canonical candidate: by induction on rank, each strongly
    connected component gets the sup of its own lower bounds and twice the
    values of its 2-successors; every member inherits the component value."""
    graph = build_graph(con)
    cond = condense(graph, con)
    nscc = len(cond.sccs)
    order = sorted(range(nscc), key=lambda i: (cond.rank[i].is_infinite,
                                               0 if cond.rank[i].is_infinite else cond.rank[i].finite))
    nu: list[Optional[ExtNat]] = [None] * nscc
    for i in order:
        if cond.rank[i].is_infinite:
            nu[i] = ALEPH0
            continue
        val = cond.min_s[i]
        for (a, b) in cond.edges:
            if a == i and b != i:
                assert nu[b] is not None
                val = ext_max([val, ExtNat(2) * nu[b]])
        nu[i] = val
    nu_by_key = {cond.scc_key(i): nu[i] for i in range(nscc)}
    xi = {z: nu[cond.scc_of[z]] for z in graph.nodes}
    return nu_by_key, xi


# ---------------------------------------------------------------------------
# bad paths


@dataclass(frozen=True)
class BadPath:
    nodes: tuple[str, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.nodes) - 1:
            raise ValueError("label/node length mismatch")

    @property
    def start(self) -> str:
        return self.nodes[0]

    @property
    def end(self) -> str:
        return self.nodes[-1]

    def scale_product(self) -> int:
        out = 1
        for lam in self.labels:
            out *= lam
        return out

    def certificate(self, con: ConstraintSet) -> tuple[ExtNat, int, ExtNat]:
        mx, _ = node_bounds(con, self.start)
        _, mn = node_bounds(con, self.end)
        return mx, self.scale_product(), mn

    def verify(self, con: ConstraintSet) -> bool:
        graph = build_graph(con)
        for i, lam in enumerate(self.labels):
            if (self.nodes[i], lam, self.nodes[i + 1]) not in graph.edges:
                return False
        mx, prod, mn = self.certificate(con)
        return mx < ExtNat(prod) * mn

    def __str__(self):
        parts = [self.nodes[0]]
        for lam, z in zip(self.labels, self.nodes[1:]):
            parts.append(f"->{lam} {z}")
        return " ".join(parts)


def _needed_twos(mx: ExtNat, mn: ExtNat) -> Optional[int]:
    """Least t with mx < 2^t * mn, or None when no t works."""
    if mx.is_infinite:
        return None
    if mn.is_infinite:
        return 0
    t = 0
    while (1 << t) * mn.finite <= mx.finite:
        t += 1
    return t


def find_bad_path(con: ConstraintSet) -> Optional[BadPath]:
    """Certificate search.  Preference order: length-0 certificates, then
    smallest 2-label count, then shortest path, then lexicographic
    endpoints; cycles are repeated exactly as often as the certificate
    needs."""
    bounds = {z: node_bounds(con, z) for z in con.nodes()}
    for z in sorted(con.nodes()):
        mx, mn = bounds[z]
        if mx < mn:
            return BadPath((z,), ())

    graph = build_graph(con)
    if not graph.edges:
        return None

    best: Optional[tuple[tuple[int, int, str, str], BadPath]] = None
    for z0 in sorted(con.nodes()):
        mx0 = bounds[z0][0]
        if mx0.is_infinite:
            continue
        caps = [
            _needed_twos(mx0, bounds[zm][1]) for zm in con.nodes()
        ]
        cap = max((t for t in caps if t is not None), default=None)
        if cap is None:
            continue
        # BFS over (node, capped 2-count); shortest paths, sorted expansion
        start = (z0, 0)
        parent: dict[tuple[str, int], tuple[tuple[str, int], int]] = {start: None}
        dist = {start: 0}
        frontier = [start]
        while frontier:
            nxt = []
            for state in frontier:
                z, t = state
                for lam, w in graph.successors(z):
                    t2 = min(cap, t + (1 if lam == 2 else 0))
                    s2 = (w, t2)
                    if s2 not in dist:
                        dist[s2] = dist[state] + 1
                        parent[s2] = (state, lam)
                        nxt.append(s2)
            frontier = nxt
        for zm in sorted(con.nodes()):
            need = _needed_twos(mx0, bounds[zm][1])
            if need is None:
                continue
            if need == 0 and zm == z0:
                continue  # would be a length-0 certificate, already excluded
            hits = [t for t in range(need, cap + 1) if (zm, t) in dist]
            if not hits:
                continue
            t = min(hits, key=lambda t: dist[(zm, t)])
            key = (need, dist[(zm, t)], z0, zm)
            if best is not None and key >= best[0]:
                continue
            rev_nodes = [zm]
            rev_labels: list[int] = []
            state = (zm, t)
            while parent[state] is not None:
                prev, lam = parent[state]
                rev_labels.append(lam)
                rev_nodes.append(prev[0])
                state = prev
            path = BadPath(tuple(reversed(rev_nodes)), tuple(reversed(rev_labels)))
            assert path.verify(con)
            best = (key, path)
    return best[1] if best else None


# ---------------------------------------------------------------------------
# diagnosis


@dataclass(frozen=True)
class DiagnosisImpossible:
    cell: ImpossibleCell


@dataclass(frozen=True)
class DiagnosisBadPath:
    path: BadPath
    constraints: ConstraintSet


@dataclass(frozen=True)
class DiagnosisGood:
    constraints: ConstraintSet
    xi_min: Solution


Diagnosis = Union[DiagnosisImpossible, DiagnosisBadPath, DiagnosisGood]


def diagnose(g: GridSpec) -> Diagnosis:
    con = extract_constraints(g)
    if isinstance(con, ImpossibleCell):
        return DiagnosisImpossible(con)
    path = find_bad_path(con)
    if path is not None:
        return DiagnosisBadPath(path, con)
    _, xi = compute_solution(con)
    ok, violated = check_solution(con, xi)
    if not ok:  # pragma: no cover
        raise AssertionError(f"xi_min fails {violated} but no bad path found")
    return DiagnosisGood(con, xi)


# ---------------------------------------------------------------------------
# strict / bounded / unbounded analysis


@dataclass(frozen=True)
class NodeStatus:
    kind: str  # "strict" | "bounded" | "unbounded"
    strict_value: Optional[int] = None
    ub: Optional[int] = None
    witness: Optional[BadPath] = None  # reused as a plain labelled path

    @property
    def bounded(self) -> bool:
        return self.kind in ("strict", "bounded")


def node_status(con: ConstraintSet) -> dict[str, NodeStatus]:
    """Upper-bound analysis; only meaningful on instances with a solution
    (call after a Good diagnosis).  ub(z) minimises floor(n / product of
    labels) over paths from n-strict nodes to z; the witness path is
    recovered from predecessor links with lexicographic tie-breaking."""
    graph = build_graph(con)
    bounds = {z: node_bounds(con, z) for z in con.nodes()}
    strict = {
        z: bounds[z][0].finite
        for z in con.nodes()
        if not bounds[z][0].is_infinite
    }
    # Dijkstra-flavoured search on (weight, path length) with weight
    # floor(n / 2^t): expanding along an edge never increases the weight,
    # and in solvable instances no 2-cycle is reachable from a strict node,
    # so plain BFS to a fixpoint terminates.
    best: dict[str, tuple[int, tuple[str, ...], tuple[int, ...]]] = {}
    for z0 in sorted(strict):
        n0 = strict[z0]
        # state: node -> (max 2-count seen); in solvable instances the
        # 2-count along any reachable walk is bounded, grow to fixpoint
        twos: dict[str, int] = {z0: 0}
        pred: dict[str, tuple[str, int]] = {}
        changed = True
        guard = 0
        while changed:
            changed = False
            guard += 1
            if guard > 2 * len(con.nodes()) + 4:
                raise AssertionError("unbounded 2-count; instance has no solution")
            for z in sorted(twos):
                for lam, w in graph.successors(z):
                    t2 = twos[z] + (1 if lam == 2 else 0)
                    if t2 > twos.get(w, -1):
                        twos[w] = t2
                        pred[w] = (z, lam)
                        changed = True
        for z, t in twos.items():
            weight = n0 >> t
            entry = best.get(z)
            if entry is not None and entry[0] <= weight:
                continue
            rev_nodes = [z]
            rev_labels = []
            cur = z
            seen = {z}
            while cur != z0:
                p, lam = pred[cur]
                rev_nodes.append(p)
                rev_labels.append(lam)
                cur = p
                if cur in seen:  # pragma: no cover
                    raise AssertionError("cyclic predecessor chain")
                seen.add(cur)
            path = BadPath(tuple(reversed(rev_nodes)), tuple(reversed(rev_labels)))
            best[z] = (weight, path.nodes, path.labels)

    out: dict[str, NodeStatus] = {}
    for z in con.nodes():
        if z in strict:
            n = strict[z]
            out[z] = NodeStatus("strict", strict_value=n, ub=min(n, best[z][0]),
                                witness=BadPath(best[z][1], best[z][2]))
        elif z in best:
            weight, nodes, labels = best[z]
            out[z] = NodeStatus("bounded", ub=weight, witness=BadPath(nodes, labels))
        else:
            out[z] = NodeStatus("unbounded")
    return out


# ---------------------------------------------------------------------------
# square analysis


@dataclass(frozen=True)
class SquareGood:
    witness: Solution
    sum_x: ExtNat
    sum_y: ExtNat


@dataclass(frozen=True)
class SquareBadCaseI:
    """All nodes bounded, no equal-sum solution exists."""


@dataclass(frozen=True)
class SquareBadCaseII:
    bounded_side: str  # "x" or "y": the side whose sum is always smaller
    unbounded_node: str


@dataclass(frozen=True)
class SquareBadCaseIII:
    open_side: str  # "x" or "y"
    witness_subgrid: GridSpec
    ub_total: int


@dataclass(frozen=True)
class SquareNotApplicable:
    reason: str


SquareVerdict = Union[
    SquareGood, SquareBadCaseI, SquareBadCaseII, SquareBadCaseIII, SquareNotApplicable
]


def _induced_minima(
    con: ConstraintSet,
    graph: ConstraintGraph,
    fixed: Solution,
    free: set[str],
) -> Solution:
    """Least values on `free` satisfying their lower bounds and scaled
    constraints, given `fixed` elsewhere (monotone system; a 2-cycle
    inside the free part forces aleph-0)."""
    succ = {z: [w for (_, w) in graph.successors(z) if w in free] for z in free}
    comps = _tarjan_sccs(free, succ)
    comp_of = {z: i for i, comp in enumerate(comps) for z in comp}
    values: Solution = dict(fixed)
    # components in dependency order: Tarjan emits callees first
    for i, comp in enumerate(comps):
        val = ext_max([node_bounds(con, z)[1] for z in comp])
        pump = False
        for z in comp:
            for lam, w in graph.successors(z):
                if w in free and comp_of[w] == i:
                    if lam == 2:
                        pump = True
                else:
                    val = ext_max([val, ExtNat(lam) * values[w]])
        if pump:
            val = ALEPH0
        for z in comp:
            values[z] = val
    return {z: values[z] for z in free}


def _box_ranges(
    con: ConstraintSet, status: dict[str, NodeStatus], nodes: list[str],
    volume_cap: int = 2_000_000,
) -> list[list[int]]:
    ranges = []
    volume = 1
    for z in nodes:
        lo = node_bounds(con, z)[1]
        hi = status[z].ub
        assert hi is not None and not lo.is_infinite
        rng = list(range(lo.finite, hi + 1))
        if not rng:
            return []
        volume *= len(rng)
        if volume > volume_cap:
            raise ValueError("bounded-box enumeration too large")
        ranges.append(rng)
    return ranges


def _equal_sum_search(
    g: GridSpec, con: ConstraintSet, status: dict[str, NodeStatus]
) -> Optional[Solution]:
    """Search for a solution with equal side sums when the x side is fully
    bounded.  Bounded nodes range over their [min, ub] boxes; unbounded
    ones take induced minimal values, and the first unbounded y absorbs
    any slack (no constraint points into an unbounded node)."""
    graph = build_graph(con)
    bounded = [z for z in sorted(con.nodes()) if status[z].bounded]
    free = {z for z in con.nodes() if not status[z].bounded}
    assert all(status[x].bounded for x in g.xs)
    ranges = _box_ranges(con, status, bounded)
    if ranges == [] and bounded:
        return None
    bump_candidates = sorted(z for z in free if z in g.ys)
    for combo in itertools.product(*ranges):
        xi: Solution = {z: ExtNat(v) for z, v in zip(bounded, combo)}
        if free:
            xi.update(_induced_minima(con, graph, xi, set(free)))
        ok, _ = check_solution(con, xi)
        if not ok:
            continue
        sx = ext_sum(xi[x] for x in g.xs)
        sy = ext_sum(xi[y] for y in g.ys)
        if sx == sy:
            return xi
        if sy < sx and bump_candidates:
            slack = sx.finite - sy.finite
            bump = bump_candidates[0]
            xi = dict(xi)
            xi[bump] = xi[bump] + ExtNat(slack)
            ok, _ = check_solution(con, xi)
            assert ok, "bumping an unconstrained node broke the solution"
            return xi
    return None


def square_diagnose(g: GridSpec) -> SquareVerdict:
    """Decide whether the grid admits a product preimage with equal side
    sizes, and if not, which of the three failure shapes applies."""
    diag = diagnose(g)
    if not isinstance(diag, DiagnosisGood):
        return SquareNotApplicable(f"no product preimage: {type(diag).__name__}")
    con = diag.constraints
    status = node_status(con)

    if g.open_x and g.open_y:
        return SquareNotApplicable("both sides open is out of scope")

    unb_x = [x for x in g.xs if not status[x].bounded]
    unb_y = [y for y in g.ys if not status[y].bounded]
    pushable_x = g.open_x or bool(unb_x)
    pushable_y = g.open_y or bool(unb_y)

    if pushable_x and pushable_y:
        # aleph0 on every unbounded node, the minimal solution elsewhere
        xi = dict(diag.xi_min)
        for z in unb_x + unb_y:
            xi[z] = ALEPH0
        ok, violated = check_solution(con, xi)
        assert ok, f"unbounded-infinite witness fails {violated}"
        sum_x = ALEPH0 if (g.open_x or unb_x) else ext_sum(xi[x] for x in g.xs)
        sum_y = ALEPH0 if (g.open_y or unb_y) else ext_sum(xi[y] for y in g.ys)
        return SquareGood(xi, sum_x, sum_y)

    if g.open_y or g.open_x:
        work = g if g.open_y else g.transposed()
        side = "y" if g.open_y else "x"
        # the non-open side is fully bounded here (otherwise pushable)
        wcon = extract_constraints(GridSpec(work.xs, work.ys, work.cells))
        assert isinstance(wcon, ConstraintSet)
        wstatus = node_status(wcon)
        assert all(wstatus[x].bounded for x in work.xs)
        ub_total = sum(wstatus[x].ub for x in work.xs)
        chosen: list[str] = []
        witness_nodes: set[str] = set()
        for x in work.xs:
            w = wstatus[x].witness
            if w is not None:
                witness_nodes.update(w.nodes)
        for y in work.ys:
            if y in witness_nodes:
                chosen.append(y)
        for y in work.ys:
            if len(chosen) > ub_total:
                break
            if y not in chosen:
                chosen.append(y)
        copies = []
        i = 1
        while len(chosen) + len(copies) <= ub_total:
            new_id = f"{work.ys[0]}_copy{i}"
            copies.append((new_id, work.ys[0]))
            i += 1
        base = GridSpec(work.xs, work.ys, dict(work.cells))
        if copies:
            base = base.with_copied_rows(copies)
            chosen = chosen + [c[0] for c in copies]
        sub = base.subgrid(ys=sorted(chosen, key=list(base.ys).index))
        assert len(sub.ys) > ub_total
        if side == "x":
            sub = sub.transposed()
        return SquareBadCaseIII(side, sub, ub_total)

    x_all = not unb_x
    y_all = not unb_y
    if x_all:
        xi = _equal_sum_search(g, con, status)
        if xi is not None:
            return SquareGood(xi, ext_sum(xi[x] for x in g.xs), ext_sum(xi[y] for y in g.ys))
        if y_all:
            return SquareBadCaseI()
        return SquareBadCaseII("x", sorted(unb_y)[0])
    # some x unbounded, all y bounded: transpose the search (node ids are
    # preserved by transposition)
    gt = g.transposed()
    cont = extract_constraints(gt)
    assert isinstance(cont, ConstraintSet)
    statust = node_status(cont)
    xit = _equal_sum_search(gt, cont, statust)
    if xit is not None:
        return SquareGood(
            xit, ext_sum(xit[x] for x in g.xs), ext_sum(xit[y] for y in g.ys)
        )
    return SquareBadCaseII("y", sorted(unb_x)[0])
