"""Kripke model evaluation and frame validity (exhaustive and sampled).

Extensions of subformulas are computed as bitmasks over worlds; the
validity checkers evaluate whole batches of valuations at once as numpy
boolean matrices (one row per valuation), so a box is a single masked
matrix product per batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

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
    variables,
)
from .frames import Frame, verify_pmorphism


@dataclass(frozen=True)
class Model:
    frame: Frame
    valuation: dict[str, frozenset[int]]

    def __post_init__(self):
        val = {p: frozenset(ws) for p, ws in self.valuation.items()}
        for p, ws in val.items():
            for w in ws:
                if not (0 <= w < self.frame.n):
                    raise ValueError(f"valuation of {p!r} mentions world {w}")
        object.__setattr__(self, "valuation", val)

    def var_mask(self, name: str) -> int:
        mask = 0
        for w in self.valuation.get(name, ()):
            mask |= 1 << w
        return mask


def extension(m: Model, f: Formula) -> int:
    """Bitmask of worlds where f holds; memoized over shared subterms."""
    frame = m.frame
    full = (1 << frame.n) - 1
    memo: dict[int, int] = {}

    def go(g: Formula) -> int:
        key = id(g)
        if key in memo:
            return memo[key]
        if isinstance(g, Var):
            out = m.var_mask(g.name)
        elif isinstance(g, Top):
            out = full
        elif isinstance(g, Bot):
            out = 0
        elif isinstance(g, Not):
            out = full & ~go(g.child)
        elif isinstance(g, And):
            out = full
            for c in g.children:
                out &= go(c)
        elif isinstance(g, Or):
            out = 0
            for c in g.children:
                out |= go(c)
        elif isinstance(g, Implies):
            out = (full & ~go(g.antecedent)) | go(g.consequent)
        elif isinstance(g, Diamond):
            ext = go(g.child)
            succ = frame.succ(g.axis)
            out = 0
            for w in range(frame.n):
                if succ[w] & ext:
                    out |= 1 << w
        elif isinstance(g, Box):
            ext = go(g.child)
            succ = frame.succ(g.axis)
            out = 0
            for w in range(frame.n):
                if succ[w] & ~ext == 0:
                    out |= 1 << w
        else:  # pragma: no cover
            raise TypeError(f"not a formula: {g!r}")
        memo[key] = out
        return out

    return go(f)


def satisfies(m: Model, w: int, f: Formula) -> bool:
    if not (0 <= w < m.frame.n):
        raise ValueError(f"world {w} out of range")
    return bool(extension(m, f) >> w & 1)


# ---------------------------------------------------------------------------
# batched validity


def _succ_matrix(frame: Frame, axis: Axis) -> np.ndarray:
    n = frame.n
    mat = np.zeros((n, n), dtype=np.uint8)
    for i, j in frame.rel(axis):
        mat[i, j] = 1
    return mat


def _eval_batch(frame: Frame, f: Formula, vals: dict[str, np.ndarray]) -> np.ndarray:
    """vals maps variable -> (batch, n) bool matrix; returns same shape for f."""
    n = frame.n
    batch = next(iter(vals.values())).shape[0] if vals else 1
    rh = _succ_matrix(frame, Axis.H)
    rv = _succ_matrix(frame, Axis.V)
    memo: dict[int, np.ndarray] = {}

    def go(g: Formula) -> np.ndarray:
        key = id(g)
        if key in memo:
            return memo[key]
        if isinstance(g, Var):
            out = vals.get(g.name)
            if out is None:
                out = np.zeros((batch, n), dtype=bool)
        elif isinstance(g, Top):
            out = np.ones((batch, n), dtype=bool)
        elif isinstance(g, Bot):
            out = np.zeros((batch, n), dtype=bool)
        elif isinstance(g, Not):
            out = ~go(g.child)
        elif isinstance(g, And):
            out = go(g.children[0]).copy()
            for c in g.children[1:]:
                out &= go(c)
        elif isinstance(g, Or):
            out = go(g.children[0]).copy()
            for c in g.children[1:]:
                out |= go(c)
        elif isinstance(g, Implies):
            out = ~go(g.antecedent) | go(g.consequent)
        elif isinstance(g, Diamond):
            rel = rh if g.axis is Axis.H else rv
            ext = go(g.child)
            out = (ext.astype(np.uint16) @ rel.T) > 0
        elif isinstance(g, Box):
            rel = rh if g.axis is Axis.H else rv
            ext = go(g.child)
            out = ((~ext).astype(np.uint16) @ rel.T) == 0
        else:  # pragma: no cover
            raise TypeError(f"not a formula: {g!r}")
        memo[key] = out
        return out

    return go(f)


@dataclass(frozen=True)
class Valid:
    pass


@dataclass(frozen=True)
class Refuted:
    model: Model
    world: int


@dataclass(frozen=True)
class NoCounterexampleFound:
    trials: int
    seed: int


Verdict = Valid | Refuted | NoCounterexampleFound


def _decode_valuation(frame: Frame, names: Sequence[str], code: int) -> Model:
    n = frame.n
    val = {}
    for k, p in enumerate(names):
        bits = (code >> (k * n)) & ((1 << n) - 1)
        val[p] = frozenset(w for w in range(n) if bits >> w & 1)
    return Model(frame, val)


def valid_in_frame(
    frame: Frame,
    f: Formula,
    mode: str = "exhaustive",
    trials: int = 10000,
    seed: int = 0,
    bit_budget: int = 24,
    batch: int = 4096,
) -> Verdict:
    """Exhaustive mode enumerates every valuation of vars(f) (requires
    |vars| * |worlds| <= bit_budget); sampled mode draws `trials` uniform
    valuations from numpy's PCG64 generator with the given seed.  A
    refutation always carries a re-checkable (model, world) witness."""
    names = sorted(variables(f))
    n = frame.n
    if mode == "exhaustive":
        bits = len(names) * n
        if bits > bit_budget:
            raise ValueError(
                f"exhaustive validity needs {bits} bits > budget {bit_budget}"
            )
        total = 1 << bits
        for start in range(0, total, batch):
            codes = np.arange(start, min(start + batch, total), dtype=np.uint64)
            vals = {}
            for k, p in enumerate(names):
                shifts = (codes[:, None] >> np.uint64(k * n)).astype(np.uint64)
                world_bits = (shifts >> np.arange(n, dtype=np.uint64)) & np.uint64(1)
                vals[p] = world_bits.astype(bool)
            res = _eval_batch(frame, f, vals) if names else _eval_batch(frame, f, {})
            bad = np.argwhere(~res)
            if bad.size:
                row, world = int(bad[0][0]), int(bad[0][1])
                model = _decode_valuation(frame, names, start + row)
                if satisfies(model, world, f):  # pragma: no cover
                    raise AssertionError("refutation witness failed to re-check")
                return Refuted(model, world)
            if not names:
                break
        return Valid()
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        done = 0
        while done < trials:
            size = min(batch, trials - done)
            vals = {p: rng.integers(0, 2, size=(size, n), dtype=np.uint8).astype(bool)
                    for p in names}
            res = _eval_batch(frame, f, vals)
            bad = np.argwhere(~res)
            if bad.size:
                row, world = int(bad[0][0]), int(bad[0][1])
                val = {p: frozenset(int(w) for w in np.flatnonzero(vals[p][row]))
                       for p in names}
                model = Model(frame, val)
                if satisfies(model, world, f):  # pragma: no cover
                    raise AssertionError("refutation witness failed to re-check")
                return Refuted(model, world)
            done += size
            if not names:
                return Valid()
        return NoCounterexampleFound(trials, seed)
    raise ValueError(f"unknown mode {mode!r}")


def verify_model_pmorphism(
    m: Model, n: Model, f: Sequence[int]
) -> tuple[bool, Optional[tuple]]:
    """f must be a verified frame p-morphism; additionally checks
    x in M(p) iff f(x) in N(p) for every variable and world."""
    ok, witness = verify_pmorphism(m.frame, n.frame, f, surjective=True)
    if not ok:
        return False, ("frame p-morphism fails",) + (witness or ())
    for p in set(m.valuation) | set(n.valuation):
        src = m.valuation.get(p, frozenset())
        dst = n.valuation.get(p, frozenset())
        for x in range(m.frame.n):
            if (x in src) != (f[x] in dst):
                return False, ("valuation mismatch", p, x)
    return True, None
