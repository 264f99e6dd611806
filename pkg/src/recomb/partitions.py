"""Set partitions of a finite site set and their refinement lattice.

Partitions are stored in canonical form (each block sorted ascending,
blocks sorted by their minimum element), which makes equality, hashing
and the text encoding ``1,2|3,4`` unambiguous.  The lattice order used
throughout is refinement: ``a`` refines ``b`` when every block of ``a``
lies inside a block of ``b``; the meet is the coarsest common refinement.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Iterator

from .errors import DomainError, SizeCapError

#: largest ground-set size for which exact-lattice methods will enumerate
#: all partitions by default; Bell(8) = 4140 keeps dense matrices small.
DEFAULT_SITE_CAP = 8


def bell_number(n: int) -> int:
    """Number of partitions of an n-element set (Bell triangle recurrence)."""
    if n < 0:
        raise DomainError("bell_number: n must be nonnegative")
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def _canonical_blocks(blocks: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    out = []
    for b in blocks:
        t = tuple(sorted(b))
        if not t:
            raise DomainError("partition blocks must be nonempty")
        out.append(t)
    out.sort(key=lambda b: b[0])
    return tuple(out)


class Partition:
    """A partition of a finite set of integer sites into disjoint blocks."""

    __slots__ = ("blocks", "ground", "_hash")

    def __init__(self, blocks: Iterable[Iterable[int]]):
        cb = _canonical_blocks(blocks)
        seen: set[int] = set()
        for b in cb:
            for s in b:
                if not isinstance(s, int) or isinstance(s, bool) or s < 1:
                    raise DomainError(f"site indices must be positive integers, got {s!r}")
                if s in seen:
                    raise DomainError(f"site {s} appears in more than one block")
                seen.add(s)
        self.blocks: tuple[tuple[int, ...], ...] = cb
        self.ground: tuple[int, ...] = tuple(sorted(seen))
        self._hash = hash(self.blocks)

    # -- constructors -------------------------------------------------

    @classmethod
    def one_block(cls, ground: Iterable[int]) -> "Partition":
        """The coarsest partition of `ground` (a single block)."""
        return cls([tuple(ground)])

    @classmethod
    def singletons(cls, ground: Iterable[int]) -> "Partition":
        """The finest partition of `ground` (every site its own block)."""
        return cls([(s,) for s in ground])

    @classmethod
    def from_text(cls, text: str) -> "Partition":
        """Parse the text encoding: blocks separated by ``|``, sites by ``,``."""
        if not text.strip():
            raise DomainError("empty partition text")
        blocks = []
        for part in text.split("|"):
            sites = []
            for tok in part.split(","):
                tok = tok.strip()
                if not tok.isdigit():
                    raise DomainError(f"bad site token {tok!r} in partition text {text!r}")
                sites.append(int(tok))
            blocks.append(sites)
        return cls(blocks)

    def to_text(self) -> str:
        """Inverse of :meth:`from_text`; canonical, so it round-trips exactly."""
        return "|".join(",".join(str(s) for s in b) for b in self.blocks)

    # -- basic queries -------------------------------------------------

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def block_of(self, site: int) -> tuple[int, ...]:
        for b in self.blocks:
            if site in b:
                return b
        raise DomainError(f"site {site} not in ground set {self.ground}")

    def sort_key(self) -> tuple:
        """Index order key: block count ascending, then lexicographic."""
        return (len(self.blocks), self.blocks)

    # -- lattice operations ---------------------------------------------

    def _check_same_ground(self, other: "Partition") -> None:
        if self.ground != other.ground:
            raise DomainError(
                f"ground mismatch: {self.ground} vs {other.ground}"
            )

    def refines(self, coarse: "Partition") -> bool:
        """True iff every block of self is contained in a block of `coarse`."""
        self._check_same_ground(coarse)
        owner = {s: i for i, b in enumerate(coarse.blocks) for s in b}
        for b in self.blocks:
            first = owner[b[0]]
            for s in b[1:]:
                if owner[s] != first:
                    return False
        return True

    def meet(self, other: "Partition") -> "Partition":
        """Coarsest common refinement: all nonempty pairwise intersections."""
        self._check_same_ground(other)
        blocks = []
        for a in self.blocks:
            sa = set(a)
            for b in other.blocks:
                inter = sa.intersection(b)
                if inter:
                    blocks.append(inter)
        return Partition(blocks)

    def restrict(self, sites: Iterable[int]) -> "Partition":
        """The partition induced on a nonempty subset of the ground set."""
        want = set(sites)
        if not want:
            raise DomainError("restriction target must be nonempty")
        if not want.issubset(self.ground):
            raise DomainError(f"{sorted(want)} is not a subset of {self.ground}")
        blocks = []
        for b in self.blocks:
            inter = want.intersection(b)
            if inter:
                blocks.append(inter)
        return Partition(blocks)

    # -- interval structure ----------------------------------------------

    def is_interval(self) -> bool:
        """True iff every block is a run of consecutive integers."""
        return all(b[-1] - b[0] + 1 == len(b) for b in self.blocks)

    def cut_set(self) -> frozenset[int]:
        """For an interval partition, the cut positions (block maxima except
        the last); inverse of :func:`interval_partition`."""
        if not self.is_interval():
            raise DomainError(f"{self.to_text()} is not an interval partition")
        return frozenset(b[-1] for b in self.blocks[:-1])

    def as_masks(self) -> list[int]:
        """Blocks as bitmasks over positions in the sorted ground set."""
        pos = {s: i for i, s in enumerate(self.ground)}
        return [sum(1 << pos[s] for s in b) for b in self.blocks]

    @classmethod
    def from_masks(cls, masks: Iterable[int], ground: tuple[int, ...]) -> "Partition":
        blocks = []
        for m in masks:
            if m == 0:
                continue
            blocks.append([ground[i] for i in range(len(ground)) if (m >> i) & 1])
        return cls(blocks)

    # -- dunder plumbing ---------------------------------------------------

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Partition) and self.blocks == other.blocks

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Partition({self.to_text()!r})"


def interval_partition(n: int, cuts: Iterable[int]) -> Partition:
    """Interval partition of {1,..,n} with a block boundary after each cut.

    An empty cut set yields the one-block partition; cuts {1,..,n-1} yield
    the finest partition.  Cut positions must lie in {1,..,n-1}.
    """
    cutset = set(cuts)
    for c in cutset:
        if not 1 <= c <= n - 1:
            raise DomainError(f"cut position {c} outside 1..{n - 1}")
    blocks = []
    current = []
    for s in range(1, n + 1):
        current.append(s)
        if s in cutset:
            blocks.append(current)
            current = []
    blocks.append(current)
    return Partition(blocks)


def cut_partition(n: int, k: int) -> Partition:
    """The two-block interval partition {{1..k}, {k+1..n}}."""
    return interval_partition(n, [k])


def all_partitions(ground: Iterable[int]) -> Iterator[Partition]:
    """Yield every partition of `ground` (no particular order)."""
    items = sorted(ground)
    if not items:
        raise DomainError("ground set must be nonempty")

    def rec(rest: list[int]) -> Iterator[list[list[int]]]:
        if not rest:
            yield []
            return
        first, tail = rest[0], rest[1:]
        for sub in rec(tail):
            for i in range(len(sub)):
                yield sub[:i] + [[first] + sub[i]] + sub[i + 1:]
            yield [[first]] + sub

    for blocks in rec(items):
        yield Partition(blocks)


def refinements(p: Partition) -> Iterator[Partition]:
    """Yield every partition refining p, built blockwise (product over blocks)."""
    per_block = [list(all_partitions(b)) for b in p.blocks]
    for combo in itertools.product(*per_block):
        blocks = []
        for sub in combo:
            blocks.extend(sub.blocks)
        yield Partition(blocks)


def two_block_partitions(ground: Iterable[int]) -> list[Partition]:
    """All partitions of `ground` into exactly two blocks, in index order.

    Enumerated directly from the 2^(k-1)-1 proper subsets containing the
    smallest site, so the full lattice never needs to be materialized.
    """
    items = sorted(ground)
    if len(items) < 2:
        return []
    first, rest = items[0], items[1:]
    out = []
    for take in range(2 ** len(rest) - 1):
        b1 = [first] + [s for i, s in enumerate(rest) if (take >> i) & 1]
        b2 = [s for i, s in enumerate(rest) if not (take >> i) & 1]
        out.append(Partition([b1, b2]))
    out.sort(key=Partition.sort_key)
    return out


class PartitionIndex:
    """All partitions of a ground set in a refinement-compatible order.

    The order is block count ascending with lexicographic tie-break on the
    canonical form; strict refinement strictly increases the block count,
    so any matrix whose entries point from coarser to finer partitions is
    triangular with respect to this index.
    """

    __slots__ = ("ground", "partitions", "position")

    def __init__(self, ground: Iterable[int], site_cap: int = DEFAULT_SITE_CAP):
        self.ground = tuple(sorted(ground))
        if not self.ground:
            raise DomainError("ground set must be nonempty")
        if len(self.ground) > site_cap:
            raise SizeCapError(
                f"{len(self.ground)} sites means Bell({len(self.ground)}) = "
                f"{bell_number(len(self.ground))} partitions; cap is {site_cap} sites "
                f"(raise site_cap explicitly if you really want this)"
            )
        plist = sorted(all_partitions(self.ground), key=Partition.sort_key)
        self.partitions: tuple[Partition, ...] = tuple(plist)
        self.position: dict[Partition, int] = {p: i for i, p in enumerate(plist)}

    def __len__(self) -> int:
        return len(self.partitions)

    def __iter__(self) -> Iterator[Partition]:
        return iter(self.partitions)

    def __getitem__(self, i: int) -> Partition:
        return self.partitions[i]

    def index_of(self, p: Partition) -> int:
        try:
            return self.position[p]
        except KeyError:
            raise DomainError(
                f"{p.to_text()} is not a partition of {self.ground}"
            ) from None

    @property
    def one(self) -> Partition:
        return self.partitions[0]

    @property
    def finest(self) -> Partition:
        return self.partitions[-1]

    def refining(self, p: Partition) -> Iterator[Partition]:
        """All partitions refining p, built blockwise (product over blocks)."""
        return refinements(p)

    def interval_partitions(self) -> list[Partition]:
        return [p for p in self.partitions if p.is_interval()]
