"""Synthesis of the three axiom families with their canonical
countermodels, plus shape recognizers.

Every synthesized axiom comes with a frame-side refutation (a concrete
model on the realized grid where the antecedent holds and the consequent
fails at a designated world) that the test suite re-verifies with the
model checker, and a sampled validity check on products.  The impossible
and bad-path templates are parameterized by an axis so that the
constructions left to symmetry are generated by the same code with the
roles of the two modalities exchanged; the square construction is
transposed wholesale when the bounded side is the vertical one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Union

from .extnat import ExtNat
from .formula import (
    And,
    Axis,
    Bot,
    Box,
    Diamond,
    Formula,
    Implies,
    Not,
    Or,
    Top,
    Var,
    box_plus,
    conj,
    dia_plus,
    disj,
    transpose_formula,
)
from .frames import Frame
from .grids import (
    BiCluster,
    BiClusterType,
    GridSpec,
    PointKind,
    classify_bicluster,
    realize_grid,
    sizes,
    transpose_world_map,
    world_kinds,
)
from .constraints import (
    BadPath,
    ConstraintSet,
    NodeStatus,
    SquareBadCaseI,
    SquareBadCaseII,
    SquareBadCaseIII,
    SquareVerdict,
    _tarjan_sccs,
    build_graph,
    compute_solution,
    extract_constraints,
    node_bounds,
    node_status,
    square_diagnose,
)
from .semantics import Model


def _v(name: str) -> Formula:
    return Var(name)


# ---------------------------------------------------------------------------
# the base axiom


def axiom_comm_pse() -> Formula:
    """Commuting boxes plus the two difference axioms for each modality."""
    p = _v("p")
    bhv = Box(Axis.H, Box(Axis.V, p))
    bvh = Box(Axis.V, Box(Axis.H, p))
    parts = [Implies(bhv, bvh), Implies(bvh, bhv)]
    for ax in (Axis.H, Axis.V):
        parts.append(Implies(p, Box(ax, Diamond(ax, p))))
        parts.append(Implies(Diamond(ax, Diamond(ax, p)), disj([p, Diamond(ax, p)])))
    return conj(parts)


# ---------------------------------------------------------------------------
# helpers on realized grids


def _succs(frame: Frame, axis: Axis, w: int) -> frozenset[int]:
    mask = frame.succ(axis)[w]
    return frozenset(i for i in range(frame.n) if mask >> i & 1)


def _closure(frame: Frame, axis: Axis, w: int) -> frozenset[int]:
    return _succs(frame, axis, w) | {w}


class _Realized:
    """Realized grid with per-cell world lookup."""

    def __init__(self, g: GridSpec):
        self.grid = g
        self.frame, self.cell_map = realize_grid(g)
        self.kinds = world_kinds(g)

    def cell_worlds(
        self, x: str, y: str, kinds: Sequence[PointKind] = tuple(PointKind)
    ) -> list[int]:
        want = set(kinds)
        return [
            w
            for w, (wx, wy, k) in enumerate(self.kinds)
            if wx == x and wy == y and k in want
        ]

    def line_worlds(self, node: str) -> frozenset[int]:
        if node in self.grid.xs:
            return frozenset(w for w, (wx, _, _) in enumerate(self.kinds) if wx == node)
        return frozenset(w for w, (_, wy, _) in enumerate(self.kinds) if wy == node)


def _kind_for(irr_axis: Axis) -> PointKind:
    """The kind irreflexive along irr_axis and reflexive along the other."""
    return PointKind.IR if irr_axis is Axis.H else PointKind.RI


def _kinds_irreflexive(axis: Axis) -> tuple[PointKind, ...]:
    if axis is Axis.V:
        return (PointKind.RI, PointKind.II)
    return (PointKind.IR, PointKind.II)


def _kinds_reflexive(axis: Axis) -> tuple[PointKind, ...]:
    if axis is Axis.V:
        return (PointKind.RR, PointKind.IR)
    return (PointKind.RR, PointKind.RI)


# ---------------------------------------------------------------------------
# impossible bi-clusters


@dataclass(frozen=True)
class ImpossibleParams:
    k: int  # points marked along marker_axis
    l: int  # points marked along the other axis
    marker_axis: Axis  # V in the standard layout


def impossible_params(c: BiCluster) -> ImpossibleParams:
    """The a-group collects the h-reflexive (necessarily v-irreflexive)
    points, the b-group every h-irreflexive one; when no h-reflexive
    point exists the roles of the axes are exchanged."""
    t = classify_bicluster(c)
    if not t.impossible:
        raise ValueError(f"bi-cluster of type {t.value} is not impossible")
    if c.ri > ExtNat(0):
        return ImpossibleParams(c.ri.finite, (c.ir + c.ii).finite, Axis.V)
    return ImpossibleParams(c.ir.finite, (c.ri + c.ii).finite, Axis.H)


def _impossible_formula(params: ImpossibleParams) -> Formula:
    k, l = params.k, params.l
    am = params.marker_axis
    bm = am.other
    avars = [f"a{i}" for i in range(1, k + 1)]
    bvars = [f"b{j}" for j in range(1, l + 1)]

    def ahat(i: int) -> Formula:
        return conj([Not(_v(avars[i])), Box(am, _v(avars[i]))] + [_v(b) for b in bvars])

    def bhat(j: int) -> Formula:
        return conj([Not(_v(bvars[j])), Box(bm, _v(bvars[j]))] + [_v(a) for a in avars])

    clash = conj(
        [ahat(0)]
        + [
            Diamond(bm, conj([ahat(i)] + [Diamond(am, ahat(s)) for s in range(k) if s != i]))
            for i in range(k)
        ]
        + [
            Diamond(bm, conj([bhat(j)] + [Diamond(am, ahat(s)) for s in range(k)]))
            for j in range(l)
        ]
        + [
            Diamond(am, conj([ahat(i)] + [Diamond(bm, bhat(t)) for t in range(l)]))
            for i in range(1, k)
        ]
        + [
            Diamond(am, conj([bhat(j)] + [Diamond(bm, bhat(t)) for t in range(l) if t != j]))
            for j in range(l)
        ]
    )
    goal = conj([_v(a) for a in avars] + [_v(b) for b in bvars])
    return Implies(clash, dia_plus(Axis.H, dia_plus(Axis.V, goal)))


def synth_impossible(c: BiCluster) -> Formula:
    return _impossible_formula(impossible_params(c))


def countermodel_impossible(g: GridSpec, cell: tuple[str, str]) -> tuple[Model, int]:
    """Each marker variable holds on the line through its point; the
    consequent's conjunction of all markers then forces a world of the
    impossible cell distinct from every point of it."""
    x, y = cell
    params = impossible_params(g.cell(x, y))
    am, bm = params.marker_axis, params.marker_axis.other
    ctx = _Realized(g)
    a_pts = ctx.cell_worlds(x, y, (_kind_for(irr_axis=am),))
    b_pts = ctx.cell_worlds(x, y, _kinds_irreflexive(bm))
    assert len(a_pts) == params.k and len(b_pts) == params.l
    val: dict[str, frozenset[int]] = {}
    for i, w in enumerate(a_pts, start=1):
        val[f"a{i}"] = _succs(ctx.frame, am, w)
    for j, w in enumerate(b_pts, start=1):
        val[f"b{j}"] = _succs(ctx.frame, bm, w)
    return Model(ctx.frame, val), a_pts[0]


# ---------------------------------------------------------------------------
# bad paths


@dataclass(frozen=True)
class BadPathParams:
    start_axis: Axis  # marker axis of the path start (V for a row node)
    n_p: int
    steps: tuple[tuple[Axis, int, str], ...]  # (wrapper axis, label, cluster type)
    end: tuple  # ("finite", end_axis, r_p, i_p) | ("generated", top_axis, k_p)


_SWITCH_POINT = {
    BiClusterType.V2H_SWITCH: PointKind.IR,
    BiClusterType.H2V_SWITCH: PointKind.RI,
    BiClusterType.EQ_SWITCH: PointKind.II,
}


def _chat_axes(t: BiClusterType) -> tuple[Axis, ...]:
    if t is BiClusterType.V2H_SWITCH:
        return (Axis.H,)
    if t is BiClusterType.H2V_SWITCH:
        return (Axis.V,)
    return (Axis.H, Axis.V)


def _node_axis(g: GridSpec, z: str) -> Axis:
    return Axis.V if z in g.ys else Axis.H


@dataclass
class _BadPathData:
    params: BadPathParams
    strict_cell: tuple[str, str]
    edge_cells: list[tuple[str, str]]
    end_cell: tuple[str, str]
    gen_kinds: Optional[tuple[PointKind, PointKind]]  # (top-marked, other-marked)


def _strictness_cell(g: GridSpec, z: str, n: int) -> tuple[str, str]:
    """A cell consisting of exactly n points irreflexive along z's axis."""
    if z in g.ys:
        want = (BiClusterType.V_STRICT, BiClusterType.HV_STRICT)
        for x in sorted(g.xs):
            c = g.cell(x, z)
            if classify_bicluster(c) in want and c.total() == ExtNat(n):
                return (x, z)
    else:
        want = (BiClusterType.H_STRICT, BiClusterType.HV_STRICT)
        for y in sorted(g.ys):
            c = g.cell(z, y)
            if classify_bicluster(c) in want and c.total() == ExtNat(n):
                return (z, y)
    raise ValueError(f"no strictness witness cell for {z}")


def _badpath_data(g: GridSpec, p: BadPath) -> _BadPathData:
    con = extract_constraints(g)
    if not isinstance(con, ConstraintSet):
        raise ValueError("grid has impossible cells")
    if not p.verify(con):
        raise ValueError("not a verified bad path of this grid")
    z0, zm = p.start, p.end
    a_axis = _node_axis(g, z0)
    n_p = node_bounds(con, z0)[0].finite
    strict_cell = _strictness_cell(g, z0, n_p)

    steps = []
    edge_cells = []
    for i, lam in enumerate(p.labels):
        a, b = p.nodes[i], p.nodes[i + 1]
        cell = (a, b) if a in g.xs else (b, a)
        t = classify_bicluster(g.cell(*cell))
        assert t.switch, f"edge cell {cell} is not a switch bi-cluster"
        # the j-th step is spread along the axis of the edge's source side
        steps.append((_node_axis(g, a), lam, t.value))
        edge_cells.append(cell)

    k_p = n_p // p.scale_product() + 1
    assert ExtNat(k_p) <= node_bounds(con, zm)[1]
    m_axis = _node_axis(g, zm)

    if zm in g.ys:
        line = [(x, zm) for x in sorted(g.xs)]
    else:
        line = [(zm, y) for y in sorted(g.ys)]

    for cx, cy in line:
        c = g.cell(cx, cy)
        if not c.is_finite() or classify_bicluster(c).infinity:
            continue
        size = sizes(c)[1] if m_axis is Axis.V else sizes(c)[0]
        if size >= ExtNat(k_p):
            refl = sum(c.count(k).finite for k in _kinds_reflexive(m_axis))
            irr = sum(c.count(k).finite for k in _kinds_irreflexive(m_axis))
            r_p = min(refl, (k_p + 1) // 2)
            i_p = max(0, k_p - 2 * r_p)
            assert i_p <= irr
            params = BadPathParams(a_axis, n_p, tuple(steps), ("finite", m_axis, r_p, i_p))
            return _BadPathData(params, strict_cell, edge_cells, (cx, cy), None)

    for cx, cy in line:
        c = g.cell(cx, cy)
        if not classify_bicluster(c).infinity:
            continue
        # subcase (a): generate along the spread axis; (b): along the marker
        # axis.  The top-marked point must be irreflexive along top and
        # reflexive along the other axis; its partner irreflexive along the
        # other axis.
        for top in (m_axis.other, m_axis):
            top_kind = _kind_for(irr_axis=top)
            partner = [
                k for k in _kinds_irreflexive(top.other) if c.count(k) > ExtNat(0)
            ]
            if c.count(top_kind) > ExtNat(0) and partner:
                params = BadPathParams(a_axis, n_p, tuple(steps), ("generated", top, k_p))
                return _BadPathData(
                    params, strict_cell, edge_cells, (cx, cy), (top_kind, partner[0])
                )
    raise ValueError(f"no endpoint witness cell for {zm}")


def _badpath_formula(params: BadPathParams) -> Formula:
    am = params.start_axis
    bm = am.other
    avars = [f"a{i}" for i in range(1, params.n_p + 1)]
    first = conj(
        [box_plus(am, _v("a"))]
        + [dia_plus(am, conj([Not(_v(a)), Box(am, _v(a))])) for a in avars]
    )

    path: Formula = conj([Not(_v("a")), Box(bm, _v("b"))])
    for j, (wrap, lam, tname) in enumerate(params.steps, start=1):
        cj = _v(f"c{j}")
        chat_j = conj([Not(cj)] + [Box(ax, cj) for ax in _chat_axes(BiClusterType(tname))])
        inner = conj([chat_j, path])
        if lam == 2:
            path = Diamond(wrap, conj([chat_j, path, Diamond(wrap, inner)]))
        else:
            path = Diamond(wrap, inner)

    if params.end[0] == "finite":
        _, m_axis, r_p, i_p = params.end
        parts = []
        for j in range(1, r_p + 1):
            bo = conj(
                [_v(f"bo{j}")]
                + [Not(_v(f"bo{t}")) for t in range(1, r_p + 1) if t != j]
                + [Not(_v(f"bu{t}")) for t in range(1, i_p + 1)]
            )
            body = conj([bo, path])
            parts.append(dia_plus(m_axis, conj([bo, path, Diamond(m_axis, body)])))
        for s in range(1, i_p + 1):
            bu = conj(
                [_v(f"bu{s}")]
                + [Not(_v(f"bu{t}")) for t in range(1, i_p + 1) if t != s]
                + [Not(_v(f"bo{t}")) for t in range(1, r_p + 1)]
            )
            parts.append(dia_plus(m_axis, conj([bu, path])))
        last = conj(parts)
    else:
        _, top, k_p = params.end
        chat = conj([Not(_v("c")), Box(top, _v("c"))])
        dhat = conj([Not(_v("d")), Box(top.other, _v("d"))])
        large = conj([chat, Diamond(top, conj([dhat, path]))])
        for _ in range(2, k_p + 1):
            step = conj([large, Diamond(top.other, large)])
            large = conj(
                [chat, Diamond(top, conj([dhat, path, Diamond(top.other, step)]))]
            )
        last = large

    antecedent = conj([first, dia_plus(Axis.H, dia_plus(Axis.V, last))])
    goal = dia_plus(am, conj([_v("b")] + [_v(a) for a in avars]))
    return Implies(antecedent, goal)


def badpath_params(g: GridSpec, p: BadPath) -> BadPathParams:
    return _badpath_data(g, p).params


def synth_badpath(g: GridSpec, p: BadPath) -> Formula:
    return _badpath_formula(_badpath_data(g, p).params)


def countermodel_badpath(g: GridSpec, p: BadPath) -> tuple[Model, int]:
    data = _badpath_data(g, p)
    params = data.params
    am, bm = params.start_axis, params.start_axis.other
    ctx = _Realized(g)
    frame = ctx.frame

    a_pts = ctx.cell_worlds(*data.strict_cell)
    assert len(a_pts) == params.n_p
    val: dict[str, frozenset[int]] = {"a": _closure(frame, am, a_pts[0])}
    for i, w in enumerate(a_pts, start=1):
        val[f"a{i}"] = _succs(frame, am, w)

    c_pts = []
    for j, ((_, _, tname), cell) in enumerate(zip(params.steps, data.edge_cells), start=1):
        t = BiClusterType(tname)
        w = ctx.cell_worlds(*cell, kinds=(_SWITCH_POINT[t],))[0]
        c_pts.append(w)
        marked: frozenset[int] = frozenset()
        for ax in _chat_axes(t):
            marked |= _succs(frame, ax, w)
        val[f"c{j}"] = marked

    if params.end[0] == "finite":
        _, m_axis, r_p, i_p = params.end
        b_refl = ctx.cell_worlds(*data.end_cell, kinds=_kinds_reflexive(m_axis))[:r_p]
        b_irr = ctx.cell_worlds(*data.end_cell, kinds=_kinds_irreflexive(m_axis))[:i_p]
        for j, w in enumerate(b_refl, start=1):
            val[f"bo{j}"] = frozenset({w})
        for s, w in enumerate(b_irr, start=1):
            val[f"bu{s}"] = frozenset({w})
        if params.steps:
            val["b"] = _succs(frame, bm, c_pts[0])
        else:
            b_ext: frozenset[int] = frozenset()
            for w in b_refl + b_irr:
                b_ext |= _succs(frame, bm, w)
            val["b"] = b_ext
    else:
        _, top, _ = params.end
        top_kind, other_kind = data.gen_kinds
        c_w = ctx.cell_worlds(*data.end_cell, kinds=(top_kind,))[0]
        d_w = ctx.cell_worlds(*data.end_cell, kinds=(other_kind,))[0]
        val["c"] = _succs(frame, top, c_w)
        val["d"] = _succs(frame, top.other, d_w)
        if params.steps:
            val["b"] = _succs(frame, bm, c_pts[0])
        else:
            # the path bottom is carried by the partner point
            val["b"] = _succs(frame, bm, d_w)
    return Model(frame, val), a_pts[0]


# ---------------------------------------------------------------------------
# square-bad grids


@dataclass
class _TreeNode:
    node: str
    children: tuple


@dataclass
class _SquareData:
    grid: GridSpec
    con: ConstraintSet
    status: dict[str, NodeStatus]
    hedges: frozenset[tuple[str, int, str]]
    yb: tuple[str, ...]
    sw_pairs: tuple[tuple[str, str], ...]
    roots: tuple[str, ...]
    trees: tuple
    strict_cells: dict[str, tuple[str, str]]
    lb_nodes: tuple[str, ...]
    lb_cells: dict[str, tuple[str, str]]
    lb_counts: dict[str, tuple[int, int]]


def _build_h_graph(
    con: ConstraintSet, status: dict[str, NodeStatus]
) -> frozenset[tuple[str, int, str]]:
    """Acyclic subgraph: all 2-labelled edges, plus an acyclic spanning
    selection of the 1-labelled edges in each bounded strongly connected
    component, grown from a strict node (or from a node entered by a
    2-labelled edge from a bounded node)."""
    graph = build_graph(con)
    two_edges = {e for e in graph.edges if e[1] == 2}
    succ: dict[str, list[str]] = {z: [] for z in graph.nodes}
    for z, _, w in sorted(graph.edges):
        succ[z].append(w)
    keep: set[tuple[str, int, str]] = set(two_edges)
    for comp in _tarjan_sccs(graph.nodes, succ):
        members = set(comp)
        if len(members) == 1 or not all(status[z].bounded for z in members):
            continue
        intra = sorted(e for e in graph.edges if e[0] in members and e[2] in members)
        assert all(lam == 1 for (_, lam, _) in intra), "2-cycle inside a component"
        stricts = sorted(z for z in members if status[z].kind == "strict")
        if stricts:
            z_s = stricts[0]
        else:
            entered = sorted(
                w for (z, lam, w) in two_edges if w in members and status[z].bounded
            )
            assert entered, "no anchor node for the component"
            z_s = entered[0]
        covered = {z_s}
        adj: dict[str, list[tuple[str, int, str]]] = {z: [] for z in members}
        for e in intra:
            adj[e[0]].append(e)
        while covered != members:
            target = min(members - covered)
            parent: dict[str, tuple[str, int, str]] = {}
            frontier = sorted(covered)
            seen = set(covered)
            found = None
            while frontier and found is None:
                nxt = []
                for z in frontier:
                    for e in adj[z]:
                        w = e[2]
                        if w in seen:
                            continue
                        seen.add(w)
                        parent[w] = e
                        if w == target:
                            found = w
                            break
                        nxt.append(w)
                    if found:
                        break
                frontier = sorted(nxt)
            assert found is not None
            node = found
            while node not in covered:
                e = parent[node]
                keep.add(e)
                covered.add(node)
                node = e[0]
    return frozenset(keep)


def _unravel(
    hedges_b: frozenset[tuple[str, int, str]], stop: set[str], root: str
) -> _TreeNode:
    succ: dict[str, list[str]] = {}
    for z, _, w in sorted(hedges_b):
        succ.setdefault(z, []).append(w)

    def expand(z: str) -> _TreeNode:
        kids = tuple(
            _TreeNode(w, ()) if w in stop else expand(w) for w in succ.get(z, ())
        )
        return _TreeNode(z, kids)

    return expand(root)


def _square_data(g: GridSpec) -> _SquareData:
    con = extract_constraints(g)
    assert isinstance(con, ConstraintSet)
    status = node_status(con)
    assert all(status[x].bounded for x in g.xs), "x side must be fully bounded"
    hedges = _build_h_graph(con, status)
    yb = tuple(y for y in g.ys if status[y].bounded)
    sw_pairs = tuple(
        sorted({(z, w) if z in g.xs else (w, z) for (z, _, w) in hedges})
    )
    strict = {z for z in g.nodes() if status[z].kind == "strict"}
    bounded = set(g.xs) | set(yb)
    hedges_b = frozenset(e for e in hedges if e[0] in bounded and e[2] in bounded)
    roots = tuple(sorted(strict & bounded))
    trees = tuple(_unravel(hedges_b, strict - {r}, r) for r in roots)
    strict_cells = {z: _strictness_cell(g, z, status[z].strict_value) for z in roots}

    _, xi_min = compute_solution(con)
    lb_nodes = []
    for x in g.xs:
        if status[x].kind != "strict" and node_bounds(con, x)[1] == xi_min[x]:
            lb_nodes.append(x)
    for y in g.ys:
        if y not in yb:
            lb_nodes.append(y)
        elif status[y].kind != "strict" and node_bounds(con, y)[1] == xi_min[y]:
            lb_nodes.append(y)
    lb_cells: dict[str, tuple[str, str]] = {}
    lb_counts: dict[str, tuple[int, int]] = {}
    for z in lb_nodes:
        mn = node_bounds(con, z)[1].finite
        if z in g.xs:
            cands = [(z, y) for y in sorted(g.ys)]
            axis = Axis.H
        else:
            cands = [(x, z) for x in sorted(g.xs)]
            axis = Axis.V
        for cx, cy in cands:
            c = g.cell(cx, cy)
            size = sizes(c)[0] if axis is Axis.H else sizes(c)[1]
            if c.is_finite() and size == ExtNat(mn):
                lb_cells[z] = (cx, cy)
                refl = sum(c.count(k).finite for k in _kinds_reflexive(axis))
                irr = sum(c.count(k).finite for k in _kinds_irreflexive(axis))
                lb_counts[z] = (refl, irr)
                break
        assert z in lb_cells, f"no lower-bound witness cell for {z}"
    return _SquareData(
        g, con, status, hedges, yb, sw_pairs, roots, trees,
        strict_cells, tuple(lb_nodes), lb_cells, lb_counts,
    )


def _xvar(z: str) -> str:
    return f"n_{z}"


def _cvar(x: str, y: str) -> str:
    return f"c_{x}_{y}"


def _hvar(z: str, i: int) -> str:
    return f"h_{z}_{i}"


def _bovar(z: str, j: int) -> str:
    return f"bo_{z}_{j}"


def _buvar(z: str, s: int) -> str:
    return f"bu_{z}_{s}"


def _bar(data: _SquareData, z: str) -> Formula:
    g = data.grid
    if z in g.xs:
        others = [Not(_v(_xvar(x))) for x in g.xs if x != z]
        return conj([box_plus(Axis.V, _v(_xvar(z)))] + others)
    others = [Not(_v(_xvar(y))) for y in g.ys if y != z]
    return conj([box_plus(Axis.H, _v(_xvar(z)))] + others)


def _pair_direction(data: _SquareData, x: str, y: str) -> tuple[int, Optional[str]]:
    if (x, 2, y) in data.hedges:
        return 2, "x"
    if (y, 2, x) in data.hedges:
        return 2, "y"
    if (x, 1, y) in data.hedges or (y, 1, x) in data.hedges:
        return 1, None
    raise KeyError((x, y))


def _chat_xy(data: _SquareData, x: str, y: str) -> Formula:
    lam, src = _pair_direction(data, x, y)
    c = _v(_cvar(x, y))
    bars = [_bar(data, x), _bar(data, y)]
    if lam == 2 and src == "x":
        core = conj(bars + [Not(c), Box(Axis.V, c)])
        return conj([core, Diamond(Axis.H, core)])
    if lam == 2 and src == "y":
        core = conj(bars + [Not(c), Box(Axis.H, c)])
        return conj([core, Diamond(Axis.V, core)])
    return conj(bars + [Not(c), Box(Axis.H, c), Box(Axis.V, c)])


def _in_edges(data: _SquareData, z: str) -> list[str]:
    return sorted({e[0] for e in data.hedges if e[2] == z})


def _out_edges(data: _SquareData, z: str) -> list[str]:
    return sorted({e[2] for e in data.hedges if e[0] == z})


def _copy_extras(data: _SquareData, z: str, parent: Optional[str]) -> list[Formula]:
    """The side conjuncts keeping track of switch partners of z other
    than its tree parent."""
    if z in data.grid.xs:
        out = []
        for y1 in _in_edges(data, z):
            if y1 == parent:
                continue
            if y1 in data.yb:
                out.append(Diamond(Axis.V, Not(_v(_cvar(z, y1)))))
            else:
                out.append(Diamond(Axis.V, _chat_xy(data, z, y1)))
        return out
    return [
        Diamond(Axis.H, Not(_v(_cvar(x1, z))))
        for x1 in _in_edges(data, z)
        if x1 != parent
    ]


def _tree_formula(data: _SquareData, t: _TreeNode, parent: Optional[str]) -> Formula:
    g = data.grid
    z = t.node
    spread = Axis.V if z in g.xs else Axis.H  # children live on z's own line
    kid_fs = [Diamond(spread, _tree_formula(data, kid, z)) for kid in t.children]
    extras = _copy_extras(data, z, parent)
    if parent is not None:
        head = _chat_xy(data, z, parent) if z in g.xs else _chat_xy(data, parent, z)
        return conj([head] + kid_fs + extras)
    # root: strict node with its h-markers
    n = data.status[z].strict_value
    mark_axis = Axis.H if z in g.xs else Axis.V
    parts = []
    for i in range(1, n + 1):
        h = _v(_hvar(z, i))
        tree_i = conj([_bar(data, z), Not(h), Box(mark_axis, h)] + kid_fs + extras)
        parts.append(dia_plus(mark_axis, tree_i))
    return conj(parts)


def _upper_bound(data: _SquareData) -> Formula:
    return conj(
        [dia_plus(Axis.H, dia_plus(Axis.V, _tree_formula(data, t, None))) for t in data.trees]
    )


def _switch(data: _SquareData) -> Formula:
    g, status = data.grid, data.status
    parts = []
    for z in list(g.xs) + list(data.yb):
        box_axis = Axis.V if z in g.xs else Axis.H

        def cvar_of(w: str) -> str:
            return _cvar(z, w) if z in g.xs else _cvar(w, z)

        if status[z].kind == "strict":
            neighbours = sorted(set(_in_edges(data, z)) | set(_out_edges(data, z)))
            if not neighbours:
                continue
            n = status[z].strict_value
            ant = conj([_v(_hvar(z, i)) for i in range(1, n + 1)])
            cons = conj([box_plus(box_axis, _v(cvar_of(w))) for w in neighbours])
            inner: Formula = Implies(ant, cons)
        else:
            pairs = [(w1, w2) for w1 in _in_edges(data, z) for w2 in _out_edges(data, z)]
            if not pairs:
                continue
            inner = conj(
                [
                    Implies(
                        box_plus(box_axis, _v(cvar_of(w1))),
                        box_plus(box_axis, _v(cvar_of(w2))),
                    )
                    for w1, w2 in pairs
                ]
            )
        parts.append(box_plus(Axis.H, box_plus(Axis.V, inner)))
    return conj(parts)


def _lower_bound(data: _SquareData) -> Formula:
    g = data.grid
    parts = []
    for z in data.lb_nodes:
        nor, noi = data.lb_counts[z]
        spread = Axis.H if z in g.xs else Axis.V
        if z in g.xs:
            escapes = [
                dia_plus(Axis.V, Not(_v(_cvar(z, y1))))
                for y1 in _in_edges(data, z)
                if y1 in data.yb
            ]
        else:
            escapes = [
                dia_plus(Axis.H, Not(_v(_cvar(x1, z)))) for x1 in _in_edges(data, z)
            ]
        lbz = []
        for j in range(1, nor + 1):
            bo = conj(
                [_bar(data, z), _v(_bovar(z, j))]
                + [Not(_v(_bovar(z, t))) for t in range(1, nor + 1) if t != j]
                + [Not(_v(_buvar(z, t))) for t in range(1, noi + 1)]
            )
            body = conj([bo] + escapes)
            lbz.append(dia_plus(spread, conj([body, Diamond(spread, body)])))
        for s in range(1, noi + 1):
            bu = conj(
                [_bar(data, z), _v(_buvar(z, s))]
                + [Not(_v(_buvar(z, t))) for t in range(1, noi + 1) if t != s]
                + [Not(_v(_bovar(z, t))) for t in range(1, nor + 1)]
            )
            lbz.append(dia_plus(spread, conj([bu] + escapes)))
        parts.append(dia_plus(Axis.H, dia_plus(Axis.V, conj(lbz))))
    return conj(parts)


def _final(data: _SquareData, z: str) -> Formula:
    g, status = data.grid, data.status
    if status[z].kind == "strict":
        n = status[z].strict_value
        axis = Axis.V if z in g.xs else Axis.H
        return dia_plus(axis, conj([_v(_hvar(z, i)) for i in range(1, n + 1)]))
    if z in g.xs:
        ys = [y for y in _in_edges(data, z) if y in data.yb]
        assert ys, f"non-strict bounded {z} has no bounded switch partner"
        return conj([box_plus(Axis.V, _v(_cvar(z, y))) for y in ys])
    xs = _in_edges(data, z)
    assert xs, f"non-strict bounded {z} has no switch partner"
    return conj([box_plus(Axis.H, _v(_cvar(x, z))) for x in xs])


def _solution_formula(data: _SquareData) -> Formula:
    return conj([_upper_bound(data), _switch(data), _lower_bound(data)])


def _out_formula(data: _SquareData, force_x_only: bool = False) -> Formula:
    g = data.grid
    finals_x = dia_plus(Axis.H, conj([_final(data, x) for x in g.xs]))
    if force_x_only or len(data.yb) < len(g.ys):
        return finals_x
    finals_y = dia_plus(Axis.V, conj([_final(data, y) for y in data.yb]))
    return disj([finals_x, finals_y])


def _square_case(g: GridSpec) -> tuple[str, SquareVerdict]:
    verdict = square_diagnose(g)
    if isinstance(verdict, SquareBadCaseI):
        return "direct", verdict
    if isinstance(verdict, SquareBadCaseII):
        return ("direct" if verdict.bounded_side == "x" else "transposed"), verdict
    if isinstance(verdict, SquareBadCaseIII):
        return ("direct" if verdict.open_side == "y" else "transposed"), verdict
    raise ValueError(f"grid is not square-bad: {type(verdict).__name__}")


def square_params(g: GridSpec) -> "SquareBadKind":
    orient, verdict = _square_case(g)
    if isinstance(verdict, SquareBadCaseIII):
        work = verdict.witness_subgrid if orient == "direct" else verdict.witness_subgrid.transposed()
    else:
        work = g if orient == "direct" else g.transposed()
    data = _square_data(work)
    bits = [
        orient,
        "case3" if isinstance(verdict, SquareBadCaseIII) else "fin",
        ";".join(f"{a}-{lam}-{b}" for (a, lam, b) in sorted(data.hedges)),
        ";".join(f"{z}={data.status[z].strict_value}" for z in data.roots),
        ";".join(
            f"{z}:{node_bounds(data.con, z)[1]}" for z in sorted(data.con.nodes())
        ),
    ]
    return SquareBadKind("|".join(bits))


def synth_square_bad(g: GridSpec) -> Formula:
    orient, verdict = _square_case(g)
    if isinstance(verdict, SquareBadCaseIII):
        sub = verdict.witness_subgrid
        work = sub if orient == "direct" else sub.transposed()
        data = _square_data(work)
        f = Implies(_solution_formula(data), _out_formula(data, force_x_only=True))
    else:
        work = g if orient == "direct" else g.transposed()
        data = _square_data(work)
        f = Implies(_solution_formula(data), _out_formula(data))
    return f if orient == "direct" else transpose_formula(f)


def _square_model(data: _SquareData, ctx: _Realized) -> dict[str, frozenset[int]]:
    """The refuting valuation.  Each h-variable excludes, besides its
    marked point, the rest of the strict node's line outside the witness
    cell (a pointwise exclusion would fail the switch conjunct; see the
    decisions log)."""
    g = data.grid
    frame = ctx.frame
    full = frozenset(range(frame.n))
    val: dict[str, frozenset[int]] = {}
    for z in list(g.xs) + list(g.ys):
        val[_xvar(z)] = ctx.line_worlds(z)
    for (x, y) in data.sw_pairs:
        lam, src = _pair_direction(data, x, y)
        if lam == 2 and src == "x":
            kind = PointKind.RI
        elif lam == 2 and src == "y":
            kind = PointKind.IR
        else:
            kind = PointKind.II
        w = ctx.cell_worlds(x, y, kinds=(kind,))[0]
        val[_cvar(x, y)] = full - {w}
    for z in data.roots:
        pts = ctx.cell_worlds(*data.strict_cells[z])
        outside = ctx.line_worlds(z) - frozenset(pts)
        for i, w in enumerate(pts, start=1):
            val[_hvar(z, i)] = full - ({w} | outside)
    for z in data.lb_nodes:
        cell = data.lb_cells[z]
        axis = Axis.H if z in g.xs else Axis.V
        refl = ctx.cell_worlds(*cell, kinds=_kinds_reflexive(axis))
        irr = ctx.cell_worlds(*cell, kinds=_kinds_irreflexive(axis))
        for j, w in enumerate(refl, start=1):
            val[_bovar(z, j)] = frozenset({w})
        for s, w in enumerate(irr, start=1):
            val[_buvar(z, s)] = frozenset({w})
    return val


def _host_with_rows(base: GridSpec, sub: GridSpec) -> GridSpec:
    """base extended with sub's extra rows (sub shares base's xs)."""
    extra = [y for y in sub.ys if y not in base.ys]
    cells = dict(base.cells)
    for y in extra:
        for x in base.xs:
            cells[(x, y)] = sub.cell(x, y)
    return GridSpec(base.xs, tuple(list(base.ys) + extra), cells)


def countermodel_square(g: GridSpec) -> tuple[Model, int]:
    orient, verdict = _square_case(g)
    if isinstance(verdict, SquareBadCaseIII):
        sub = verdict.witness_subgrid
        if orient == "direct":
            host = _host_with_rows(GridSpec(g.xs, g.ys, dict(g.cells)), sub)
            data = _square_data(sub)
            ctx = _Realized(host)
            return Model(ctx.frame, _square_model(data, ctx)), 0
        gt = g.transposed()
        host = _host_with_rows(GridSpec(gt.xs, gt.ys, dict(gt.cells)), sub.transposed())
        data = _square_data(sub.transposed())
        ctx = _Realized(host)
        val = _square_model(data, ctx)
        perm = transpose_world_map(host)
        moved = {p: frozenset(perm[w] for w in ws) for p, ws in val.items()}
        tf, _ = realize_grid(host.transposed())
        return Model(tf, moved), perm[0]
    work = g if orient == "direct" else g.transposed()
    data = _square_data(work)
    ctx = _Realized(work)
    val = _square_model(data, ctx)
    if orient == "direct":
        return Model(ctx.frame, val), 0
    perm = transpose_world_map(work)
    moved = {p: frozenset(perm[w] for w in ws) for p, ws in val.items()}
    tf, _ = realize_grid(g)
    return Model(tf, moved), perm[0]


# ---------------------------------------------------------------------------
# recognizers


def alpha_equal(f: Formula, g: Formula) -> bool:
    """Structural equality up to a bijective renaming of variables."""
    fwd: dict[str, str] = {}
    bwd: dict[str, str] = {}

    def go(a: Formula, b: Formula) -> bool:
        if type(a) is not type(b):
            return False
        if isinstance(a, Var):
            if fwd.setdefault(a.name, b.name) != b.name:
                return False
            return bwd.setdefault(b.name, a.name) == a.name
        if isinstance(a, (Top, Bot)):
            return True
        if isinstance(a, Not):
            return go(a.child, b.child)
        if isinstance(a, (And, Or)):
            return len(a.children) == len(b.children) and all(
                go(x, y) for x, y in zip(a.children, b.children)
            )
        if isinstance(a, (Box, Diamond)):
            return a.axis == b.axis and go(a.child, b.child)
        return go(a.antecedent, b.antecedent) and go(a.consequent, b.consequent)

    return go(f, g)


@dataclass(frozen=True)
class CommPseKind:
    pass


@dataclass(frozen=True)
class SquareBadKind:
    fingerprint: str


AxiomKind = Union[CommPseKind, ImpossibleParams, BadPathParams, SquareBadKind]


def _strip_dia_plus(f: Formula, axis: Axis) -> Optional[Formula]:
    """Inverse of dia_plus(axis, X), aware of Or-flattening."""
    if not isinstance(f, Or) or len(f.children) < 2:
        return None
    last = f.children[-1]
    if not (isinstance(last, Diamond) and last.axis is axis):
        return None
    inner = last.child
    if isinstance(inner, Or):
        if f.children[:-1] == inner.children:
            return inner
    elif len(f.children) == 2 and f.children[0] == inner:
        return inner
    return None


def _recognize_impossible(f: Formula) -> Optional[ImpossibleParams]:
    if not isinstance(f, Implies) or not isinstance(f.antecedent, And):
        return None
    inner = _strip_dia_plus(f.consequent, Axis.H)
    if inner is not None:
        inner = _strip_dia_plus(inner, Axis.V)
    if inner is None:
        return None
    ant = f.antecedent
    bare = sum(isinstance(c, Var) for c in ant.children)
    for axis in (Axis.V, Axis.H):
        diam_b = sum(
            isinstance(c, Diamond) and c.axis is axis.other for c in ant.children
        )
        k, l = diam_b - bare, bare
        if k >= 1 and l >= 1:
            params = ImpossibleParams(k, l, axis)
            if alpha_equal(f, _impossible_formula(params)):
                return params
    return None


def _parse_path(p: Formula) -> Optional[list[tuple[Axis, int, str]]]:
    """Read a path formula back into its step list (wrapper axes of
    consecutive steps alternate, which keeps the walk unambiguous)."""
    steps: list[tuple[Axis, int, str]] = []
    guard = 0
    while isinstance(p, Diamond):
        guard += 1
        if guard > 64:
            return None
        wrap = p.axis
        body = p.child
        if not isinstance(body, And):
            return None
        boxes = {c.axis for c in body.children if isinstance(c, Box)}
        if boxes == {Axis.H}:
            t = BiClusterType.V2H_SWITCH
        elif boxes == {Axis.V}:
            t = BiClusterType.H2V_SWITCH
        elif boxes == {Axis.H, Axis.V}:
            t = BiClusterType.EQ_SWITCH
        else:
            return None
        dup = any(isinstance(c, Diamond) and c.axis is wrap for c in body.children)
        steps.append((wrap, 2 if dup else 1, t.value))
        nxt = [c for c in body.children if isinstance(c, Diamond) and c.axis is wrap.other]
        if nxt:
            p = nxt[0]
        else:
            return list(reversed(steps))
    if isinstance(p, And):
        return list(reversed(steps))
    return None


def _last_candidates(last: Formula, am: Axis, n_p: int) -> Iterator[BadPathParams]:
    blocks = list(last.children) if isinstance(last, And) else [last]
    for m_axis in (Axis.V, Axis.H):
        inners = [_strip_dia_plus(b, m_axis) for b in blocks]
        if not all(i is not None for i in inners):
            continue
        r_p = sum(
            1
            for i in inners
            if isinstance(i, And)
            and any(isinstance(c, Diamond) and c.axis is m_axis for c in i.children)
        )
        i_p = len(inners) - r_p
        probe = inners[0]
        path_cands: list[Formula] = []
        if isinstance(probe, And):
            path_cands = [
                c for c in probe.children if isinstance(c, Diamond) and c.axis is not m_axis
            ] or [probe]
        for pc in path_cands:
            steps = _parse_path(pc)
            if steps is not None:
                yield BadPathParams(am, n_p, tuple(steps), ("finite", m_axis, r_p, i_p))
    # generated endpoint: walk the nesting
    for top in (Axis.H, Axis.V):
        cur = last
        for k_p in range(1, 9):
            if not isinstance(cur, And):
                break
            dias = [c for c in cur.children if isinstance(c, Diamond) and c.axis is top]
            if len(dias) != 1 or not isinstance(dias[0].child, And):
                break
            body = dias[0].child
            for pc in body.children:
                if isinstance(pc, Diamond):
                    steps = _parse_path(pc)
                    if steps is not None:
                        yield BadPathParams(
                            am, n_p, tuple(steps), ("generated", top, k_p)
                        )
            if not any(isinstance(c, Diamond) for c in body.children):
                steps = _parse_path(body)
                if steps is not None:
                    yield BadPathParams(am, n_p, tuple(steps), ("generated", top, k_p))
            nested = [
                c for c in body.children if isinstance(c, Diamond) and c.axis is top.other
            ]
            nxt = None
            for d in nested:
                if isinstance(d.child, And):
                    nxt = d.child
            if nxt is None:
                break
            cur = nxt


def _recognize_badpath(f: Formula) -> Optional[BadPathParams]:
    if not isinstance(f, Implies) or not isinstance(f.antecedent, And):
        return None
    for am in (Axis.V, Axis.H):
        core = _strip_dia_plus(f.consequent, am)
        if core is None or not isinstance(core, And):
            continue
        n_p = len(core.children) - 1
        if n_p < 1:
            continue
        for c in f.antecedent.children:
            inner_h = _strip_dia_plus(c, Axis.H)
            if inner_h is None:
                continue
            inner_v = _strip_dia_plus(inner_h, Axis.V)
            if inner_v is None:
                continue
            for params in _last_candidates(inner_v, am, n_p):
                if alpha_equal(f, _badpath_formula(params)):
                    return params
    return None


def recognize_axiom(f: Formula) -> Optional[AxiomKind]:
    if alpha_equal(f, axiom_comm_pse()):
        return CommPseKind()
    imp = _recognize_impossible(f)
    if imp is not None:
        return imp
    return _recognize_badpath(f)
