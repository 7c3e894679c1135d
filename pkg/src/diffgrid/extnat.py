"""Naturals extended with a countable infinity, absorbing under + and *."""

from __future__ import annotations

import functools
from typing import Iterable, Union


@functools.total_ordering
class ExtNat:
    """A natural number or aleph-0.  Infinity absorbs addition and
    multiplication by positive scalars and is the maximum of the order."""

    __slots__ = ("value",)

    def __init__(self, value: Union[int, None]):
        if value is not None:
            value = int(value)
            if value < 0:
                raise ValueError("ExtNat values are nonnegative")
        object.__setattr__(self, "value", value)

    def __setattr__(self, *args):
        raise AttributeError("ExtNat is immutable")

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    @property
    def finite(self) -> int:
        if self.value is None:
            raise ValueError("infinite ExtNat has no finite value")
        return self.value

    @staticmethod
    def of(x: Union["ExtNat", int]) -> "ExtNat":
        return x if isinstance(x, ExtNat) else ExtNat(x)

    def __add__(self, other) -> "ExtNat":
        other = ExtNat.of(other)
        if self.is_infinite or other.is_infinite:
            return ALEPH0
        return ExtNat(self.value + other.value)

    __radd__ = __add__

    def __mul__(self, other) -> "ExtNat":
        other = ExtNat.of(other)
        if self.is_infinite or other.is_infinite:
            if self == ExtNat(0) or other == ExtNat(0):
                return ExtNat(0)
            return ALEPH0
        return ExtNat(self.value * other.value)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = ExtNat(other)
        if not isinstance(other, ExtNat):
            return NotImplemented
        return self.value == other.value

    def __lt__(self, other) -> bool:
        if isinstance(other, int):
            other = ExtNat(other)
        if not isinstance(other, ExtNat):
            return NotImplemented
        if self.is_infinite:
            return False
        if other.is_infinite:
            return True
        return self.value < other.value

    def __hash__(self) -> int:
        return hash(("ExtNat", self.value))

    def __repr__(self) -> str:
        return "aleph0" if self.is_infinite else str(self.value)


ALEPH0 = ExtNat(None)
ZERO = ExtNat(0)
ONE = ExtNat(1)


def ext_sum(items: Iterable[Union[ExtNat, int]]) -> ExtNat:
    total = ZERO
    for x in items:
        total = total + ExtNat.of(x)
    return total


def ext_max(items: Iterable[Union[ExtNat, int]], default: ExtNat | None = None) -> ExtNat:
    best = default
    for x in items:
        x = ExtNat.of(x)
        if best is None or x > best:
            best = x
    if best is None:
        raise ValueError("ext_max of empty sequence")
    return best


def ext_min(items: Iterable[Union[ExtNat, int]], default: ExtNat | None = None) -> ExtNat:
    best = default
    for x in items:
        x = ExtNat.of(x)
        if best is None or x < best:
            best = x
    if best is None:
        raise ValueError("ext_min of empty sequence")
    return best
