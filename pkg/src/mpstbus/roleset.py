"""Role sets as immutable bitmasks.

Roles are dense naturals ``0..n-1`` within one session, so a role set fits in
a machine word. Iteration is always ascending.
"""
from __future__ import annotations

import re
from typing import Iterable, Iterator

from .errors import NotSubset, RoleOutOfRange

MAX_ARITY = 16

_TEXT_RE = re.compile(r"^\{\s*(\d+(\s*,\s*\d+)*)?\s*\}$")


class RoleSet:
    __slots__ = ("mask",)

    def __init__(self, roles: Iterable[int] = ()):
        mask = 0
        for r in roles:
            if not 0 <= r < MAX_ARITY:
                raise RoleOutOfRange(f"role {r} outside 0..{MAX_ARITY - 1}")
            mask |= 1 << r
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_mask(cls, mask: int) -> RoleSet:
        rs = cls.__new__(cls)
        object.__setattr__(rs, "mask", mask)
        return rs

    @classmethod
    def full(cls, n: int) -> RoleSet:
        """The contiguous set ``{0..n-1}``."""
        if not 0 <= n <= MAX_ARITY:
            raise RoleOutOfRange(f"arity {n} outside 0..{MAX_ARITY}")
        return cls.from_mask((1 << n) - 1)

    @classmethod
    def parse(cls, text: str) -> RoleSet:
        """Parse the ``{0,1,2}`` textual form."""
        if not _TEXT_RE.match(text.strip()):
            raise ValueError(f"bad role set literal: {text!r}")
        body = text.strip()[1:-1].strip()
        return cls(int(x) for x in body.split(",")) if body else cls()

    def __setattr__(self, name, value):
        raise AttributeError("RoleSet is immutable")

    def __reduce__(self):
        return (RoleSet.from_mask, (self.mask,))

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    def __iter__(self) -> Iterator[int]:
        m, r = self.mask, 0
        while m:
            if m & 1:
                yield r
            m >>= 1
            r += 1

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __bool__(self) -> bool:
        return self.mask != 0

    def __contains__(self, role: int) -> bool:
        return 0 <= role < MAX_ARITY and bool(self.mask >> role & 1)

    def __eq__(self, other) -> bool:
        if isinstance(other, RoleSet):
            return self.mask == other.mask
        if isinstance(other, (set, frozenset)):
            return self.mask == RoleSet(other).mask
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.mask)

    def __or__(self, other: RoleSet) -> RoleSet:
        return RoleSet.from_mask(self.mask | other.mask)

    def __and__(self, other: RoleSet) -> RoleSet:
        return RoleSet.from_mask(self.mask & other.mask)

    def __sub__(self, other: RoleSet) -> RoleSet:
        return RoleSet.from_mask(self.mask & ~other.mask)

    def __le__(self, other: RoleSet) -> bool:
        return self.mask & ~other.mask == 0

    def __ge__(self, other: RoleSet) -> bool:
        return other <= self

    def __str__(self) -> str:
        return "{" + ",".join(str(r) for r in self) + "}"

    def __repr__(self) -> str:
        return f"RoleSet({str(self)})"


def roles(*members: int) -> RoleSet:
    return RoleSet(members)


def union(a: RoleSet, b: RoleSet) -> RoleSet:
    return a | b


def intersect(a: RoleSet, b: RoleSet) -> RoleSet:
    return a & b


def complement(full: RoleSet, s: RoleSet) -> RoleSet:
    """``full \\ s``; ``s`` must be a subset of ``full``."""
    if not s <= full:
        raise NotSubset(f"{s} is not a subset of {full}")
    return full - s


def is_subset(a: RoleSet, b: RoleSet) -> bool:
    return a <= b
