"""Grids of bi-clusters: classification, frame decomposition, realization.

A bi-cluster is a bimodal frame whose both relations contain all pairs of
distinct points; its points differ only in per-axis reflexivity, so it is
stored as a count per point kind.  A grid places one bi-cluster in every
cell of an abstract X x Y array, with full horizontal relations within
rows and vertical ones within columns.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .extnat import ALEPH0, ExtNat, ext_sum
from .frames import (
    Frame,
    check_commuting_pseudo_equivalences,
    find_root,
)


class PointKind(enum.Enum):
    """Reflexivity marks: first letter for the horizontal relation,
    second for the vertical one (R reflexive / I irreflexive)."""

    RR = "rr"
    RI = "ri"
    IR = "ir"
    II = "ii"

    @property
    def h_reflexive(self) -> bool:
        return self in (PointKind.RR, PointKind.RI)

    @property
    def v_reflexive(self) -> bool:
        return self in (PointKind.RR, PointKind.IR)

    @property
    def transposed(self) -> "PointKind":
        if self is PointKind.RI:
            return PointKind.IR
        if self is PointKind.IR:
            return PointKind.RI
        return self


_KIND_ORDER = (PointKind.RR, PointKind.RI, PointKind.IR, PointKind.II)


class BiClusterType(enum.Enum):
    IMPOSSIBLE_1 = "impossible1"
    IMPOSSIBLE_2 = "impossible2"
    IMPOSSIBLE_3 = "impossible3"
    IMPOSSIBLE_4 = "impossible4"
    INFINITY_1 = "infinity1"
    INFINITY_2 = "infinity2"
    INFINITY_3 = "infinity3"
    INFINITY_4 = "infinity4"
    H2V_SWITCH = "h2vsw"
    V2H_SWITCH = "v2hsw"
    EQ_SWITCH = "eqsw"
    H_STRICT = "hstrict"
    V_STRICT = "vstrict"
    HV_STRICT = "hvstrict"
    FREE = "free"
    COUNTABLY_INFINITE = "countably_infinite"

    @property
    def impossible(self) -> bool:
        return self.value.startswith("impossible")

    @property
    def infinity(self) -> bool:
        return self.value.startswith("infinity")

    @property
    def switch(self) -> bool:
        return self in (
            BiClusterType.H2V_SWITCH,
            BiClusterType.V2H_SWITCH,
            BiClusterType.EQ_SWITCH,
        )


# presence pattern (ii, ri, ir, rr) -> finite type, per the 15-row table
_PATTERNS: dict[tuple[bool, bool, bool, bool], BiClusterType] = {
    (False, True, True, False): BiClusterType.IMPOSSIBLE_1,
    (True, False, True, False): BiClusterType.IMPOSSIBLE_2,
    (True, True, False, False): BiClusterType.IMPOSSIBLE_3,
    (True, True, True, False): BiClusterType.IMPOSSIBLE_4,
    (False, True, True, True): BiClusterType.INFINITY_1,
    (True, False, True, True): BiClusterType.INFINITY_2,
    (True, True, False, True): BiClusterType.INFINITY_3,
    (True, True, True, True): BiClusterType.INFINITY_4,
    (False, True, False, True): BiClusterType.H2V_SWITCH,
    (False, False, True, True): BiClusterType.V2H_SWITCH,
    (True, False, False, True): BiClusterType.EQ_SWITCH,
    (False, False, True, False): BiClusterType.H_STRICT,
    (False, True, False, False): BiClusterType.V_STRICT,
    (True, False, False, False): BiClusterType.HV_STRICT,
    (False, False, False, True): BiClusterType.FREE,
}


@dataclass(frozen=True)
class BiCluster:
    """Counts per point kind; at least one kind positive, aleph-0 allowed."""

    rr: ExtNat = ExtNat(0)
    ri: ExtNat = ExtNat(0)
    ir: ExtNat = ExtNat(0)
    ii: ExtNat = ExtNat(0)

    def __post_init__(self):
        for name in ("rr", "ri", "ir", "ii"):
            object.__setattr__(self, name, ExtNat.of(getattr(self, name)))
        if self.total() == ExtNat(0):
            raise ValueError("bi-cluster must contain at least one point")

    @staticmethod
    def of(**counts) -> "BiCluster":
        return BiCluster(**{k: ExtNat.of(v) for k, v in counts.items()})

    def count(self, kind: PointKind) -> ExtNat:
        return getattr(self, kind.value)

    def total(self) -> ExtNat:
        return ext_sum([self.rr, self.ri, self.ir, self.ii])

    def is_finite(self) -> bool:
        return not self.total().is_infinite

    def transposed(self) -> "BiCluster":
        return BiCluster(rr=self.rr, ri=self.ir, ir=self.ri, ii=self.ii)


def classify_bicluster(c: BiCluster) -> BiClusterType:
    if not c.is_finite():
        return BiClusterType.COUNTABLY_INFINITE
    pattern = (
        c.ii > ExtNat(0),
        c.ri > ExtNat(0),
        c.ir > ExtNat(0),
        c.rr > ExtNat(0),
    )
    return _PATTERNS[pattern]


def sizes(c: BiCluster) -> tuple[ExtNat, ExtNat, ExtNat]:
    """(h_size, v_size, cardinality): a size doubles the count of points
    reflexive along its axis."""
    h = ExtNat(2) * (c.rr + c.ri) + (c.ir + c.ii)
    v = ExtNat(2) * (c.rr + c.ir) + (c.ri + c.ii)
    return h, v, c.total()


@dataclass(frozen=True)
class GridSpec:
    """Abstract grid; `open_x`/`open_y` mark a side that continues with
    countably many further columns/rows, each a copy of a listed one (the
    listed cells stay the only constraint content)."""

    xs: tuple[str, ...]
    ys: tuple[str, ...]
    cells: dict[tuple[str, str], BiCluster]
    open_x: bool = False
    open_y: bool = False

    def __post_init__(self):
        if not self.xs or not self.ys:
            raise ValueError("grid needs at least one row and one column")
        if len(set(self.xs) | set(self.ys)) != len(self.xs) + len(self.ys):
            raise ValueError("grid node ids must be pairwise distinct")
        for x in self.xs:
            for y in self.ys:
                if (x, y) not in self.cells:
                    raise ValueError(f"missing cell ({x},{y})")
        if len(self.cells) != len(self.xs) * len(self.ys):
            raise ValueError("cells outside xs*ys")
        object.__setattr__(self, "cells", dict(self.cells))

    def cell(self, x: str, y: str) -> BiCluster:
        return self.cells[(x, y)]

    def nodes(self) -> tuple[str, ...]:
        return self.xs + self.ys

    def transposed(self) -> "GridSpec":
        cells = {(y, x): c.transposed() for (x, y), c in self.cells.items()}
        return GridSpec(self.ys, self.xs, cells, open_x=self.open_y, open_y=self.open_x)

    def subgrid(self, xs=None, ys=None) -> "GridSpec":
        xs = tuple(xs) if xs is not None else self.xs
        ys = tuple(ys) if ys is not None else self.ys
        cells = {(x, y): self.cells[(x, y)] for x in xs for y in ys}
        return GridSpec(xs, ys, cells)

    def with_copied_rows(self, copies: list[tuple[str, str]]) -> "GridSpec":
        """Extend with fresh rows, each copying an existing row's cells."""
        ys = list(self.ys)
        cells = dict(self.cells)
        for new_id, src in copies:
            if src not in self.ys or new_id in ys or new_id in self.xs:
                raise ValueError(f"bad row copy {new_id!r} of {src!r}")
            ys.append(new_id)
            for x in self.xs:
                cells[(x, new_id)] = self.cells[(x, src)]
        return GridSpec(self.xs, tuple(ys), cells, open_x=self.open_x, open_y=False)


class GridError(ValueError):
    def __init__(self, message: str, witness=None):
        super().__init__(message if witness is None else f"{message}: {witness}")
        self.witness = witness


def realize_grid(g: GridSpec) -> tuple[Frame, dict[int, tuple[str, str]]]:
    """Concrete frame with one world per bi-cluster point.  Worlds are laid
    out cell by cell (xs outer, ys inner, kinds in RR,RI,IR,II order).
    Returns the frame and the world -> cell map."""
    if g.open_x or g.open_y:
        raise GridError("cannot realize a grid with an open side")
    worlds: list[tuple[str, str, PointKind]] = []
    for x in g.xs:
        for y in g.ys:
            c = g.cell(x, y)
            for kind in _KIND_ORDER:
                cnt = c.count(kind)
                if cnt.is_infinite:
                    raise GridError(f"cannot realize infinite cell ({x},{y})")
                worlds.extend((x, y, kind) for _ in range(cnt.finite))
    n = len(worlds)
    rh: set[tuple[int, int]] = set()
    rv: set[tuple[int, int]] = set()
    # all distinct same-row pairs are horizontal edges and all distinct
    # same-column pairs vertical ones; within a cell both apply, which is
    # the bi-cluster condition, and across cells this is (gc1)/(gc2)
    for i, (xi, yi, ki) in enumerate(worlds):
        for j, (xj, yj, _) in enumerate(worlds):
            if i == j:
                if ki.h_reflexive:
                    rh.add((i, i))
                if ki.v_reflexive:
                    rv.add((i, i))
                continue
            if yi == yj:
                rh.add((i, j))
            if xi == xj:
                rv.add((i, j))
    frame = Frame(n, frozenset(rh), frozenset(rv))
    cell_map = {i: (x, y) for i, (x, y, _) in enumerate(worlds)}
    return frame, cell_map


def world_kinds(g: GridSpec) -> list[tuple[str, str, PointKind]]:
    """Kind layout matching realize_grid's world numbering."""
    out = []
    for x in g.xs:
        for y in g.ys:
            c = g.cell(x, y)
            for kind in _KIND_ORDER:
                cnt = c.count(kind)
                out.extend((x, y, kind) for _ in range(cnt.finite))
    return out


def transpose_world_map(g: GridSpec) -> list[int]:
    """Permutation taking world i of realize_grid(g) to the corresponding
    world of realize_grid(g.transposed()); realize(g.transposed()) is the
    transposed frame of realize(g) under this bijection."""
    gt = g.transposed()
    src = world_kinds(g)
    dst = world_kinds(gt)
    pos: dict[tuple[str, str, PointKind], list[int]] = {}
    for w, key in enumerate(dst):
        pos.setdefault(key, []).append(w)
    out = []
    taken: dict[tuple[str, str, PointKind], int] = {}
    for x, y, kind in src:
        key = (y, x, kind.transposed)
        k = taken.get(key, 0)
        taken[key] = k + 1
        out.append(pos[key][k])
    return out


def decompose_frame(frame: Frame) -> tuple[GridSpec, dict[int, tuple[str, str]]]:
    """Represent a rooted frame with commuting pseudo-equivalences as a
    grid of bi-clusters; raises GridError with a witness otherwise.

    X collects the equivalence classes met along the root's horizontal
    row, Y those along its vertical column; the cell at (x, y) is the
    class reachable horizontally from y's and vertically from x's."""
    root = find_root(frame)
    if root is None:
        raise GridError("frame is not rooted")
    ok, witness = check_commuting_pseudo_equivalences(frame)
    if not ok:
        raise GridError("relations are not commuting pseudo-equivalences", witness)

    n = frame.n
    hplus = [frame.succ_h[w] | (1 << w) for w in range(n)]
    vplus = [frame.succ_v[w] | (1 << w) for w in range(n)]
    sim = [hplus[w] & vplus[w] for w in range(n)]

    def class_of(table, w):
        return table[w]

    # ~ classes, identified by their minimal member
    class_rep: dict[int, int] = {}
    for w in range(n):
        rep = (sim[w] & -sim[w]).bit_length() - 1
        class_rep[w] = rep

    def reps_in(mask: int) -> list[int]:
        out = []
        seen = set()
        while mask:
            w = (mask & -mask).bit_length() - 1
            mask &= mask - 1
            r = class_rep[w]
            if r not in seen:
                seen.add(r)
                out.append(r)
        return sorted(out)

    x_reps = reps_in(hplus[root])
    y_reps = reps_in(vplus[root])
    x_ids = {rep: f"x{i + 1}" for i, rep in enumerate(x_reps)}
    y_ids = {rep: f"y{i + 1}" for i, rep in enumerate(y_reps)}

    cells: dict[tuple[str, str], list[int]] = {}
    covered: set[int] = set()
    for xr in x_reps:
        for yr in y_reps:
            mask = vplus[xr] & hplus[yr]
            if not mask:
                raise GridError("grid map undefined", (x_ids[xr], y_ids[yr]))
            members = []
            while mask:
                w = (mask & -mask).bit_length() - 1
                mask &= mask - 1
                members.append(w)
            reps = {class_rep[w] for w in members}
            if len(reps) != 1:
                raise GridError("grid map not well-defined", (x_ids[xr], y_ids[yr]))
            rep = reps.pop()
            if rep in covered:
                raise GridError("grid map not injective", rep)
            covered.add(rep)
            cells[(x_ids[xr], y_ids[yr])] = members
    all_reps = {class_rep[w] for w in range(n)}
    if covered != all_reps:
        raise GridError("grid map not surjective", sorted(all_reps - covered))

    # (gc1)/(gc2): full horizontal relations within rows, vertical within
    # columns, between distinct cells
    world_cell: dict[int, tuple[str, str]] = {}
    for key, members in cells.items():
        for w in members:
            world_cell[w] = key
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            xu, yu = world_cell[u]
            xv, yv = world_cell[v]
            if yu == yv and xu != xv and (u, v) not in frame.rh:
                raise GridError("(gc1) fails", (u, v))
            if xu == xv and yu != yv and (u, v) not in frame.rv:
                raise GridError("(gc2) fails", (u, v))

    spec_cells: dict[tuple[str, str], BiCluster] = {}
    for key, members in cells.items():
        counts = {k: 0 for k in _KIND_ORDER}
        for w in members:
            hrefl = bool(frame.succ_h[w] >> w & 1)
            vrefl = bool(frame.succ_v[w] >> w & 1)
            kind = {
                (True, True): PointKind.RR,
                (True, False): PointKind.RI,
                (False, True): PointKind.IR,
                (False, False): PointKind.II,
            }[(hrefl, vrefl)]
            counts[kind] += 1
        spec_cells[key] = BiCluster(
            rr=ExtNat(counts[PointKind.RR]),
            ri=ExtNat(counts[PointKind.RI]),
            ir=ExtNat(counts[PointKind.IR]),
            ii=ExtNat(counts[PointKind.II]),
        )
    grid = GridSpec(
        tuple(x_ids[r] for r in x_reps),
        tuple(y_ids[r] for r in y_reps),
        spec_cells,
    )
    return grid, world_cell


def build_family(kind: str, k: int) -> GridSpec:
    """The three two-cell families used by the non-finite-axiomatisability
    experiments: two bi-clusters sharing one row."""
    if k < 2:
        raise ValueError("family parameter must be >= 2")
    if kind == "F_k":
        c1 = BiCluster(ri=ExtNat(k))
        c2 = BiCluster(ri=ExtNat(k + 1))
    elif kind == "G_k":
        c1 = BiCluster(ri=ExtNat(k - 2), rr=ExtNat(1))
        c2 = BiCluster(ri=ExtNat(k - 2), rr=ExtNat(1))
    elif kind == "H_k":
        c1 = BiCluster(ri=ExtNat(k))
        c2 = BiCluster(ri=ExtNat(k))
    else:
        raise ValueError(f"unknown family {kind!r}")
    return GridSpec(
        ("x1", "x2"),
        ("y1",),
        {("x1", "y1"): c1, ("x2", "y1"): c2},
    )


GRID_SQBAD = GridSpec(
    ("x1", "x2"),
    ("y1", "y2"),
    {
        ("x1", "y1"): BiCluster(rr=ExtNat(1), ir=ExtNat(1)),
        ("x1", "y2"): BiCluster(rr=ExtNat(1), ir=ExtNat(1)),
        ("x2", "y1"): BiCluster(ii=ExtNat(6)),
        ("x2", "y2"): BiCluster(rr=ExtNat(2)),
    },
)
