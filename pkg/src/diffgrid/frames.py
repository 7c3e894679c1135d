"""Finite bimodal Kripke frames, frame constructions, and p-morphisms.

Worlds are dense integer indices 0..n-1; relations are sets of ordered
pairs with per-world successor bitmasks precomputed for the checkers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .formula import Axis

Pair = tuple[int, int]
PMorphismMap = tuple[int, ...]


def _succ_masks(n: int, pairs: frozenset[Pair]) -> tuple[int, ...]:
    masks = [0] * n
    for i, j in pairs:
        masks[i] |= 1 << j
    return tuple(masks)


def _check_pairs(n: int, pairs: Iterable[Pair]) -> frozenset[Pair]:
    ps = frozenset((int(i), int(j)) for i, j in pairs)
    for i, j in ps:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"pair ({i},{j}) out of range for {n} worlds")
    return ps


@dataclass(frozen=True)
class UnimodalFrame:
    n: int
    r: frozenset[Pair]
    succ: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("frame needs at least one world")
        object.__setattr__(self, "r", _check_pairs(self.n, self.r))
        object.__setattr__(self, "succ", _succ_masks(self.n, self.r))


@dataclass(frozen=True)
class Frame:
    n: int
    rh: frozenset[Pair]
    rv: frozenset[Pair]
    succ_h: tuple[int, ...] = field(init=False, repr=False, compare=False)
    succ_v: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("frame needs at least one world")
        object.__setattr__(self, "rh", _check_pairs(self.n, self.rh))
        object.__setattr__(self, "rv", _check_pairs(self.n, self.rv))
        object.__setattr__(self, "succ_h", _succ_masks(self.n, self.rh))
        object.__setattr__(self, "succ_v", _succ_masks(self.n, self.rv))

    def succ(self, axis: Axis) -> tuple[int, ...]:
        return self.succ_h if axis is Axis.H else self.succ_v

    def rel(self, axis: Axis) -> frozenset[Pair]:
        return self.rh if axis is Axis.H else self.rv

    def transpose(self) -> "Frame":
        return Frame(self.n, self.rv, self.rh)


def make_difference_frame(n: int) -> UnimodalFrame:
    if n < 1:
        raise ValueError("difference frame needs n >= 1")
    return UnimodalFrame(n, frozenset((i, j) for i in range(n) for j in range(n) if i != j))


def make_universal_frame(n: int) -> UnimodalFrame:
    if n < 1:
        raise ValueError("universal frame needs n >= 1")
    return UnimodalFrame(n, frozenset((i, j) for i in range(n) for j in range(n)))


def product_frame(fh: UnimodalFrame, fv: UnimodalFrame) -> Frame:
    """Product: the horizontal relation moves the first coordinate along
    fh.r keeping the second fixed, and symmetrically for the vertical one.
    World (x, y) has index x * fv.n + y."""
    nh, nv = fh.n, fv.n
    rh = frozenset(
        (x * nv + y, x2 * nv + y) for (x, x2) in fh.r for y in range(nv)
    )
    rv = frozenset(
        (x * nv + y, x * nv + y2) for (y, y2) in fv.r for x in range(nh)
    )
    return Frame(nh * nv, rh, rv)


def difference_product(nh: int, nv: int) -> Frame:
    return product_frame(make_difference_frame(nh), make_difference_frame(nv))


def _closure_mask(frame: Frame, start: int) -> int:
    seen = 1 << start
    frontier = [start]
    while frontier:
        w = frontier.pop()
        nxt = (frame.succ_h[w] | frame.succ_v[w]) & ~seen
        while nxt:
            v = (nxt & -nxt).bit_length() - 1
            seen |= 1 << v
            frontier.append(v)
            nxt &= nxt - 1
    return seen


def generated_subframe(frame: Frame, x: int) -> tuple[Frame, dict[int, int]]:
    """Subframe generated by x; returns it with the old-world -> new-world map."""
    if not (0 <= x < frame.n):
        raise ValueError(f"world {x} out of range")
    mask = _closure_mask(frame, x)
    worlds = [w for w in range(frame.n) if mask >> w & 1]
    index = {w: i for i, w in enumerate(worlds)}
    rh = frozenset((index[i], index[j]) for (i, j) in frame.rh if i in index and j in index)
    rv = frozenset((index[i], index[j]) for (i, j) in frame.rv if i in index and j in index)
    return Frame(len(worlds), rh, rv), index


def find_root(frame: Frame) -> Optional[int]:
    """Minimal world generating the whole frame, or None."""
    full = (1 << frame.n) - 1
    for w in range(frame.n):
        if _closure_mask(frame, w) == full:
            return w
    return None


def check_pseudo_equivalence(n: int, r: frozenset[Pair]) -> tuple[bool, Optional[tuple]]:
    """Symmetric and pseudo-transitive: R(x,y) & R(y,z) -> x=z or R(x,z)."""
    succ = _succ_masks(n, r)
    for i, j in r:
        if (j, i) not in r:
            return False, ("not symmetric", i, j)
    for x in range(n):
        ys = succ[x]
        while ys:
            y = (ys & -ys).bit_length() - 1
            ys &= ys - 1
            # successors of y must be x itself or successors of x
            bad = succ[y] & ~succ[x] & ~(1 << x)
            if bad:
                z = (bad & -bad).bit_length() - 1
                return False, ("not pseudo-transitive", x, y, z)
    return True, None


def _reflexive_closure_masks(n: int, succ: Sequence[int]) -> list[int]:
    return [succ[w] | (1 << w) for w in range(n)]


def check_commuting_pseudo_equivalences(frame: Frame) -> tuple[bool, Optional[tuple]]:
    """Both relations pseudo-equivalences whose reflexive closures commute."""
    ok, witness = check_pseudo_equivalence(frame.n, frame.rh)
    if not ok:
        return False, ("rh",) + witness
    ok, witness = check_pseudo_equivalence(frame.n, frame.rv)
    if not ok:
        return False, ("rv",) + witness
    hplus = _reflexive_closure_masks(frame.n, frame.succ_h)
    vplus = _reflexive_closure_masks(frame.n, frame.succ_v)

    def compose(first: Sequence[int], second: Sequence[int], x: int) -> int:
        out = 0
        mids = first[x]
        while mids:
            y = (mids & -mids).bit_length() - 1
            mids &= mids - 1
            out |= second[y]
        return out

    for x in range(frame.n):
        hv = compose(hplus, vplus, x)
        vh = compose(vplus, hplus, x)
        if hv != vh:
            diff = hv ^ vh
            z = (diff & -diff).bit_length() - 1
            return False, ("not commuting", x, z)
    return True, None


# ---------------------------------------------------------------------------
# p-morphisms


def verify_pmorphism(
    src: Frame,
    dst: Frame,
    f: Sequence[int],
    surjective: bool = True,
) -> tuple[bool, Optional[tuple]]:
    """Check f: src -> dst for the homomorphism and backward conditions
    (per axis) and, if requested, surjectivity.  Returns a witness of the
    first failure found."""
    if len(f) != src.n:
        return False, ("not total", len(f), src.n)
    for u, y in enumerate(f):
        if not (0 <= y < dst.n):
            return False, ("value out of range", u, y)
    fibers = [0] * dst.n
    for u, y in enumerate(f):
        fibers[y] |= 1 << u
    if surjective and any(m == 0 for m in fibers):
        missing = next(y for y, m in enumerate(fibers) if m == 0)
        return False, ("not onto", missing)
    for axis in (Axis.H, Axis.V):
        ssucc, dsucc = src.succ(axis), dst.succ(axis)
        for u in range(src.n):
            vs = ssucc[u]
            while vs:
                v = (vs & -vs).bit_length() - 1
                vs &= vs - 1
                if not (dsucc[f[u]] >> f[v]) & 1:
                    return False, ("homomorphism fails", axis.value, u, v)
            needed = dsucc[f[u]]
            while needed:
                y = (needed & -needed).bit_length() - 1
                needed &= needed - 1
                if not ssucc[u] & fibers[y]:
                    return False, ("backward fails", axis.value, u, y)
    return True, None


def compose_maps(f: Sequence[int], g: Sequence[int]) -> PMorphismMap:
    return tuple(g[y] for y in f)


def product_pmorphism(
    fh: Sequence[int], fv: Sequence[int], src_nv: int, dst_nv: int
) -> PMorphismMap:
    """Componentwise maps induce a map between product frames."""
    out = []
    for x in range(len(fh)):
        for y in range(src_nv):
            out.append(fh[x] * dst_nv + fv[y])
    return tuple(out)


@dataclass(frozen=True)
class SearchResult:
    status: str  # "found" | "none" | "inconclusive"
    map: Optional[PMorphismMap] = None

    @property
    def found(self) -> bool:
        return self.status == "found"


def search_pmorphism(src: Frame, dst: Frame, bound: int = 16) -> SearchResult:
    """Exhaustive backtracking search for an onto p-morphism src -> dst.

    Worlds are assigned in BFS order from a root (backward-condition
    failures surface early near roots).  Pruning: local homomorphism
    checks, per-world successor-coverage feasibility, and surjectivity
    counting.  Definitive within the bound; 'inconclusive' beyond it.
    """
    if src.n > bound:
        return SearchResult("inconclusive")
    if dst.n > src.n:
        return SearchResult("none")

    root = find_root(src)
    order: list[int] = []
    seen: set[int] = set()
    queue = [root if root is not None else 0]
    while queue or len(order) < src.n:
        if not queue:
            queue.append(next(w for w in range(src.n) if w not in seen))
        w = queue.pop(0)
        if w in seen:
            continue
        seen.add(w)
        order.append(w)
        nxt = src.succ_h[w] | src.succ_v[w]
        while nxt:
            v = (nxt & -nxt).bit_length() - 1
            nxt &= nxt - 1
            if v not in seen:
                queue.append(v)
    pos = {w: i for i, w in enumerate(order)}

    assign: list[int] = [-1] * src.n
    used = [0] * dst.n  # how many src worlds map to each dst world

    def compatible(w: int, q: int) -> bool:
        for axis in (Axis.H, Axis.V):
            ssucc, dsucc = src.succ(axis), dst.succ(axis)
            ws = ssucc[w]
            while ws:
                v = (ws & -ws).bit_length() - 1
                ws &= ws - 1
                if assign[v] >= 0 and not (dsucc[q] >> assign[v]) & 1:
                    return False
            # reverse edges v -> w
            for v in range(src.n):
                if assign[v] >= 0 and (ssucc[v] >> w) & 1:
                    if not (dsucc[assign[v]] >> q) & 1:
                        return False
        return True

    def feasible(i: int) -> bool:
        remaining = src.n - i
        uncovered = sum(1 for c in used if c == 0)
        if uncovered > remaining:
            return False
        # every fully-assigned world must already satisfy the backward
        # condition; partially assigned ones must be able to cover the rest
        for axis in (Axis.H, Axis.V):
            ssucc, dsucc = src.succ(axis), dst.succ(axis)
            for w in order[:i]:
                needed = dsucc[assign[w]]
                have = 0
                unassigned = 0
                vs = ssucc[w]
                while vs:
                    v = (vs & -vs).bit_length() - 1
                    vs &= vs - 1
                    if assign[v] >= 0:
                        have |= 1 << assign[v]
                    else:
                        unassigned += 1
                missing = needed & ~have
                if bin(missing).count("1") > unassigned:
                    return False
        return True

    def backtrack(i: int) -> bool:
        if i == src.n:
            ok, _ = verify_pmorphism(src, dst, tuple(assign), surjective=True)
            return ok
        w = order[i]
        for q in range(dst.n):
            if not compatible(w, q):
                continue
            assign[w] = q
            used[q] += 1
            if feasible(i + 1) and backtrack(i + 1):
                return True
            used[q] -= 1
            assign[w] = -1
        return False

    if backtrack(0):
        return SearchResult("found", tuple(assign))
    return SearchResult("none")


def is_product_of_difference_frames(frame: Frame) -> bool:
    """Rooted frame isomorphic to a product of difference frames iff both
    relations are commuting irreflexive pseudo-equivalences and every
    bi-cluster of the grid decomposition is a singleton."""
    from .grids import decompose_frame, GridError

    ok, _ = check_commuting_pseudo_equivalences(frame)
    if not ok:
        return False
    if any(i == j for (i, j) in frame.rh) or any(i == j for (i, j) in frame.rv):
        return False
    try:
        grid, _ = decompose_frame(frame)
    except GridError:
        return False
    return all(cell.total() == 1 for cell in grid.cells.values())
