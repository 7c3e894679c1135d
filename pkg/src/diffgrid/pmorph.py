"""Constructive p-morphisms onto bi-clusters and grids, and the
network-extension game played on a single bi-cluster.

The constructions all reduce to Latin squares over a point multiset:
strict types use the points themselves, switch and free types use a
multiset with two copies of every doubly-reflexive point, and relaxed
(inequality) sizes are absorbed by collapsing the slack side modulo the
square size.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .extnat import ALEPH0, ExtNat, ext_sum
from .frames import (
    Frame,
    PMorphismMap,
    difference_product,
    verify_pmorphism,
)
from .grids import (
    BiCluster,
    BiClusterType,
    GridSpec,
    PointKind,
    classify_bicluster,
    realize_grid,
    sizes,
    world_kinds,
)
from .constraints import ConstraintSet, Solution, check_solution, extract_constraints


@dataclass(frozen=True)
class LatinSquare:
    symbols: tuple
    rows: tuple[tuple[int, ...], ...]  # entries index into symbols

    @property
    def n(self) -> int:
        return len(self.symbols)

    def entry(self, i: int, j: int):
        return self.symbols[self.rows[i][j]]

    def is_latin(self) -> bool:
        n = self.n
        want = set(range(n))
        return all(set(r) == want for r in self.rows) and all(
            {self.rows[i][j] for i in range(n)} == want for j in range(n)
        )


def cyclic_latin_square(symbols: Sequence, n: int) -> LatinSquare:
    if len(symbols) != n or n < 1:
        raise ValueError("need exactly n symbols")
    rows = tuple(tuple((i + j) % n for j in range(n)) for i in range(n))
    return LatinSquare(tuple(symbols), rows)


def _single_cell_grid(c: BiCluster) -> GridSpec:
    return GridSpec(("x1",), ("y1",), {("x1", "y1"): c})


def _cell_point_worlds(c: BiCluster) -> dict[PointKind, list[int]]:
    """World indices of realize_grid(single cell) grouped by kind."""
    kinds = world_kinds(_single_cell_grid(c))
    out: dict[PointKind, list[int]] = {k: [] for k in PointKind}
    for w, (_, _, kind) in enumerate(kinds):
        out[kind].append(w)
    return out


def _padded_multiset(points: list[int], doubled: list[int], size: int) -> list[int]:
    """All of `points`, two copies of each of `doubled`, padded with more
    copies of the first doubled point up to `size`."""
    out = list(points)
    for p in doubled:
        out.extend((p, p))
    if len(out) > size:
        raise ValueError("multiset exceeds requested size")
    while len(out) < size:
        out.append(doubled[0] if doubled else points[0])
    return out


def bicluster_preimage(c: BiCluster, x: int, y: int) -> PMorphismMap:
    """Onto p-morphism from diff(x) x diff(y) to the one-cell realization
    of c, for any (x, y) meeting the cluster type's size constraints.
    World (u, v) of the product has index u * y + v."""
    t = classify_bicluster(c)
    h, v, n = sizes(c)
    by_kind = _cell_point_worlds(c)
    if t.impossible:
        raise ValueError(f"no product maps onto an impossible bi-cluster ({t.value})")
    if t.infinity or t is BiClusterType.COUNTABLY_INFINITE:
        raise ValueError(f"type {t.value} needs an infinite product")

    def fail(msg: str):
        raise ValueError(f"type {t.value} requires {msg}; got x={x}, y={y}")

    card = n.finite
    if t is BiClusterType.HV_STRICT:
        if x != card or y != card:
            fail(f"x = y = {card}")
        ls = cyclic_latin_square(by_kind[PointKind.II], card)
        table = [[ls.entry(u, v) for v in range(y)] for u in range(x)]
    elif t is BiClusterType.H_STRICT:
        if x != card or y < v.finite:
            fail(f"x = {card} and y >= {v.finite}")
        ls = cyclic_latin_square(by_kind[PointKind.IR], card)
        table = [[ls.entry(u, vv % card) for vv in range(y)] for u in range(x)]
    elif t is BiClusterType.V_STRICT:
        if y != card or x < h.finite:
            fail(f"y = {card} and x >= {h.finite}")
        ls = cyclic_latin_square(by_kind[PointKind.RI], card)
        table = [[ls.entry(u % card, vv) for vv in range(y)] for u in range(x)]
    elif t is BiClusterType.FREE:
        if x < h.finite or y < v.finite:
            fail(f"x >= {h.finite} and y >= {v.finite}")
        ls = cyclic_latin_square(by_kind[PointKind.RR], card)
        table = [[ls.entry(u % card, vv % card) for vv in range(y)] for u in range(x)]
    elif t is BiClusterType.H2V_SWITCH:
        if y < v.finite or x < 2 * y:
            fail(f"y >= {v.finite} and x >= 2y")
        sym = _padded_multiset(by_kind[PointKind.RI], by_kind[PointKind.RR], y)
        ls = cyclic_latin_square(sym, y)
        table = [[ls.entry(u % y, vv) for vv in range(y)] for u in range(x)]
    elif t is BiClusterType.V2H_SWITCH:
        if x < h.finite or y < 2 * x:
            fail(f"x >= {h.finite} and y >= 2x")
        sym = _padded_multiset(by_kind[PointKind.IR], by_kind[PointKind.RR], x)
        ls = cyclic_latin_square(sym, x)
        table = [[ls.entry(u, vv % x) for vv in range(y)] for u in range(x)]
    elif t is BiClusterType.EQ_SWITCH:
        if x != y or x < h.finite:
            fail(f"x = y >= {h.finite}")
        sym = _padded_multiset(by_kind[PointKind.II], by_kind[PointKind.RR], x)
        ls = cyclic_latin_square(sym, x)
        table = [[ls.entry(u, vv) for vv in range(y)] for u in range(x)]
    else:  # pragma: no cover
        raise AssertionError(t)
    return tuple(table[u][vv] for u in range(x) for vv in range(y))


def assemble_product_pmorphism(
    g: GridSpec, xi: Solution
) -> tuple[PMorphismMap, Frame, Frame]:
    """Block construction: disjoint horizontal segments U_x of size xi(x),
    vertical segments V_y of size xi(y), the cellwise preimage map on each
    block.  Returns (map, product frame, realized grid frame)."""
    con = extract_constraints(g)
    if not isinstance(con, ConstraintSet):
        raise ValueError(f"grid has an impossible cell at ({con.x},{con.y})")
    ok, violated = check_solution(con, xi)
    if not ok:
        raise ValueError(f"assignment violates {violated}")
    for z in g.nodes():
        if xi[z].is_infinite:
            raise ValueError(f"cannot materialize infinite value at {z}")
    target, cell_of = realize_grid(g)
    kinds = world_kinds(g)

    # world offsets of each cell inside the realized grid
    offsets: dict[tuple[str, str], dict[int, int]] = {}
    for w, (x, y, _) in enumerate(kinds):
        offsets.setdefault((x, y), {})
        offsets[(x, y)][len(offsets[(x, y)])] = w

    x_sizes = [xi[x].finite for x in g.xs]
    y_sizes = [xi[y].finite for y in g.ys]
    x_offsets = dict(zip(g.xs, itertools.accumulate([0] + x_sizes[:-1])))
    y_offsets = dict(zip(g.ys, itertools.accumulate([0] + y_sizes[:-1])))
    total_u, total_v = sum(x_sizes), sum(y_sizes)
    product = difference_product(total_u, total_v)

    mapping = [0] * (total_u * total_v)
    for x in g.xs:
        for y in g.ys:
            cell = g.cell(x, y)
            local = bicluster_preimage(cell, xi[x].finite, xi[y].finite)
            tr = offsets[(x, y)]
            for u in range(xi[x].finite):
                for vv in range(xi[y].finite):
                    uu = x_offsets[x] + u
                    vvv = y_offsets[y] + vv
                    mapping[uu * total_v + vvv] = tr[local[u * xi[y].finite + vv]]
    mapping = tuple(mapping)
    ok, witness = verify_pmorphism(product, target, mapping, surjective=True)
    if not ok:
        raise AssertionError(f"assembled map fails verification: {witness}")
    return mapping, product, target


def pmorphism_profile(
    g: GridSpec, h: Sequence[int], product: Frame, nv: int
) -> Solution:
    """Fiber sizes of a verified onto p-morphism from a product (second
    side size nv) onto realize_grid(g): xi(x) = number of u-rows whose
    image meets column x, and symmetrically for rows."""
    target, _ = realize_grid(g)
    ok, witness = verify_pmorphism(product, target, h, surjective=True)
    if not ok:
        raise ValueError(f"map is not a verified onto p-morphism: {witness}")
    kinds = world_kinds(g)
    nu = product.n // nv
    profile: Solution = {}
    for xid in g.xs:
        us = {
            u
            for u in range(nu)
            for v in range(nv)
            if kinds[h[u * nv + v]][0] == xid
        }
        profile[xid] = ExtNat(len(us))
    for yid in g.ys:
        vs = {
            v
            for u in range(nu)
            for v in range(nv)
            if kinds[h[u * nv + v]][1] == yid
        }
        profile[yid] = ExtNat(len(vs))
    return profile


# ---------------------------------------------------------------------------
# the network-extension game


@dataclass(frozen=True)
class GameState:
    """A network: homomorphism from diff(U) x diff(V) into the cluster,
    stored as a tuple of rows of point indices."""

    table: tuple[tuple[int, ...], ...]

    @property
    def nu(self) -> int:
        return len(self.table)

    @property
    def nv(self) -> int:
        return len(self.table[0])


def _is_network(c: BiCluster, table: Sequence[Sequence[int]]) -> bool:
    """Homomorphism check against the single-cell realization."""
    frame, _ = realize_grid(_single_cell_grid(c))
    for u, row in enumerate(table):
        for v, p in enumerate(row):
            for u2, row2 in enumerate(table):
                if u2 != u and not (frame.succ_h[p] >> row2[v]) & 1:
                    return False
            for v2 in range(len(row)):
                if v2 != v and not (frame.succ_v[p] >> row[v2]) & 1:
                    return False
    return True


@dataclass(frozen=True)
class GameOutcome:
    survived: bool
    rounds_played: int
    state: Optional[GameState] = None
    stuck_move: Optional[tuple] = None
    note: str = ""


def _reuse_applies(c_frame: Frame, table, c_star: int, z: tuple[str, int]) -> bool:
    side, idx = z
    h_refl = bool(c_frame.succ_h[c_star] >> c_star & 1)
    v_refl = bool(c_frame.succ_v[c_star] >> c_star & 1)
    if side == "v":
        col = [row[idx] for row in table]
        hits = col.count(c_star)
        return hits >= (2 if h_refl else 1)
    row = table[idx]
    hits = row.count(c_star)
    return hits >= (2 if v_refl else 1)


def _extensions(c: BiCluster, table, c_star: int, z: tuple[str, int]):
    """All legal single-row/column extensions answering (c_star, z)."""
    frame, _ = realize_grid(_single_cell_grid(c))
    npts = frame.n
    side, idx = z
    if side == "v":
        # add a fresh u-row holding c_star at column idx
        others = [v for v in range(len(table[0])) if v != idx]
        for fill in itertools.product(range(npts), repeat=len(others)):
            new_row = [0] * len(table[0])
            new_row[idx] = c_star
            for v, p in zip(others, fill):
                new_row[v] = p
            cand = tuple(table) + (tuple(new_row),)
            if _is_network(c, cand):
                yield cand
    else:
        others = [u for u in range(len(table)) if u != idx]
        for fill in itertools.product(range(npts), repeat=len(others)):
            cand = []
            for u, row in enumerate(table):
                val = c_star if u == idx else fill[others.index(u)]
                cand.append(tuple(row) + (val,))
            cand = tuple(cand)
            if _is_network(c, cand):
                yield cand


def _strategy_from_pmorphism(c: BiCluster, x: int, y: int):
    """Answer moves by embedding the network into a concrete preimage."""
    h = bicluster_preimage(c, x, y)

    def lookup(u: int, v: int) -> int:
        return h[u * y + v]

    class St:
        def __init__(self):
            self.embed_u: list[int] = [0]
            self.embed_v: list[int] = [0]

        def start(self, r: int) -> Optional[tuple[tuple[int, ...], ...]]:
            for u in range(x):
                for v in range(y):
                    if lookup(u, v) == r:
                        self.embed_u, self.embed_v = [u], [v]
                        return ((r,),)
            return None

        def respond(self, table, c_star: int, z):
            side, idx = z
            if side == "v":
                v_star = self.embed_v[idx]
                for u in range(x):
                    if u in self.embed_u:
                        continue
                    if lookup(u, v_star) == c_star:
                        self.embed_u.append(u)
                        new_row = tuple(lookup(u, vv) for vv in self.embed_v)
                        return tuple(table) + (new_row,)
                return None
            u_star = self.embed_u[idx]
            for v in range(y):
                if v in self.embed_v:
                    continue
                if lookup(u_star, v) == c_star:
                    self.embed_v.append(v)
                    return tuple(
                        tuple(row) + (lookup(self.embed_u[i], v),)
                        for i, row in enumerate(table)
                    )
            return None

    return St()


def _strategy_greedy_rr(c: BiCluster):
    """Fill every new row/column with a doubly-reflexive point."""
    by_kind = _cell_point_worlds(c)
    if not by_kind[PointKind.RR]:
        raise ValueError("greedy strategy needs a doubly-reflexive point")
    a = by_kind[PointKind.RR][0]

    class St:
        def start(self, r: int):
            return ((r,),)

        def respond(self, table, c_star: int, z):
            side, idx = z
            if side == "v":
                new_row = tuple(c_star if v == idx else a for v in range(len(table[0])))
                cand = tuple(table) + (new_row,)
            else:
                cand = tuple(
                    tuple(row) + (c_star if u == idx else a,)
                    for u, row in enumerate(table)
                )
            return cand if _is_network(c, cand) else None

    return St()


def _exhaustive_survives(c: BiCluster, table, depth: int, memo: dict) -> bool:
    """Can the builder answer every adversary move for `depth` rounds,
    choosing her extensions freely?"""
    if depth == 0:
        return True
    key = (table, depth)
    if key in memo:
        return memo[key]
    frame, _ = realize_grid(_single_cell_grid(c))
    npts = frame.n
    moves = [("v", v) for v in range(len(table[0]))] + [
        ("u", u) for u in range(len(table))
    ]
    ok = True
    for c_star in range(npts):
        for z in moves:
            if _reuse_applies(frame, table, c_star, z):
                if not _exhaustive_survives(c, table, depth - 1, memo):
                    ok = False
                    break
                continue
            if not any(
                _exhaustive_survives(c, ext, depth - 1, memo)
                for ext in _extensions(c, table, c_star, z)
            ):
                ok = False
                break
        if not ok:
            break
    memo[key] = ok
    return ok


def game_play(
    c: BiCluster,
    adversary,
    strategy=None,
    rounds: int = 10,
    preimage_size: Optional[tuple[int, int]] = None,
) -> GameOutcome:
    """Play the network-extension game on a finite bi-cluster.

    adversary: "exhaustive" (the builder may also search; outcome is the
    game value to the given depth) or a script: a list of (c_star, side,
    index) moves, side "u"/"v", preceded by the starting point index.
    strategy: None (exhaustive builder), "greedy_rr", or
    "from_pmorphism" with preimage_size=(x, y).
    Every intermediate state is re-verified as a homomorphism.
    """
    frame, _ = realize_grid(_single_cell_grid(c))
    npts = frame.n

    if adversary == "exhaustive" and strategy is None:
        for r in range(npts):
            if not _exhaustive_survives(c, ((r,),), rounds, {}):
                return GameOutcome(False, 0, stuck_move=("start", r))
        return GameOutcome(True, rounds, note=f"game value to depth {rounds}")

    if strategy == "greedy_rr":
        st = _strategy_greedy_rr(c)
    elif strategy == "from_pmorphism":
        if preimage_size is None:
            raise ValueError("from_pmorphism needs preimage_size")
        st = _strategy_from_pmorphism(c, *preimage_size)
    elif strategy is None:
        raise ValueError("scripted adversary needs a strategy")
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    if adversary == "exhaustive":
        # adversary searches, builder follows the fixed strategy
        def run(table, emb, depth):
            if depth == 0:
                return None
            moves = [("v", v) for v in range(len(table[0]))] + [
                ("u", u) for u in range(len(table))
            ]
            for c_star in range(npts):
                for z in moves:
                    if _reuse_applies(frame, table, c_star, z):
                        bad = run(table, emb, depth - 1)
                        if bad is not None:
                            return bad
                        continue
                    snap = (list(st.embed_u), list(st.embed_v)) if emb else None
                    nxt = st.respond(table, c_star, z)
                    if nxt is None or not _is_network(c, nxt):
                        return (c_star, z)
                    bad = run(nxt, emb, depth - 1)
                    if emb:
                        st.embed_u, st.embed_v = snap
                        if z[0] == "v":
                            st.embed_u = st.embed_u[: len(table)]
                        else:
                            st.embed_v = st.embed_v[: len(table[0])]
                    if bad is not None:
                        return bad
            return None

        has_embedding = strategy == "from_pmorphism"
        for r in range(npts):
            start = st.start(r) if has_embedding else st.start(r)
            if start is None:
                return GameOutcome(False, 0, stuck_move=("start", r))
            bad = run(start, has_embedding, rounds)
            if bad is not None:
                return GameOutcome(False, rounds, stuck_move=bad)
        return GameOutcome(True, rounds, note=f"strategy survives to depth {rounds}")

    # scripted adversary
    script = list(adversary)
    if not script or not isinstance(script[0], int):
        raise ValueError("script starts with the initial point index")
    table = st.start(script[0])
    if table is None:
        return GameOutcome(False, 0, stuck_move=("start", script[0]))
    played = 0
    for step, (c_star, side, idx) in enumerate(script[1:], start=1):
        if not (0 <= c_star < npts):
            raise ValueError(f"script move {step}: bad point {c_star}")
        bound = len(table[0]) if side == "v" else len(table)
        if not (0 <= idx < bound):
            raise ValueError(f"script move {step}: index {idx} out of range")
        if _reuse_applies(frame, table, c_star, (side, idx)):
            played = step
            continue
        nxt = st.respond(table, c_star, (side, idx))
        if nxt is None or not _is_network(c, nxt):
            return GameOutcome(False, step, stuck_move=(c_star, side, idx))
        table = nxt
        played = step
    return GameOutcome(True, played, state=GameState(tuple(map(tuple, table))))
