"""Finite-population stochastic models.

Forward direction: a constant-size population in continuous time where
each individual dies at rate mu and is replaced by the offspring of one
or two uniformly drawn parents (possibly itself), composed blockwise
along a drawn two-block partition.  Backward direction: the finite-N
ancestry of one present-day individual, where material splits along
drawn partitions and parts land on uniformly drawn parent slots,
coalescing when slots collide.

Both exist to verify the deterministic and lattice limits empirically;
all heavy loops live in :mod:`._kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .errors import DomainError, SizeCapError
from .measure import TypeDistribution, TypeSpace
from .partitions import Partition
from .rates import RecombinationDistribution


class PopulationState:
    """N individuals stored as per-type counts (exchangeable population)."""

    __slots__ = ("space", "counts", "N")

    def __init__(self, space: TypeSpace, counts: np.ndarray | Mapping):
        if not space.dense:
            raise SizeCapError(
                "population states need a dense type space (within the storage cap)"
            )
        if isinstance(counts, Mapping):
            arr = np.zeros(space.cardinality, dtype=np.int64)
            for t, c in counts.items():
                c = int(c)
                if c < 0:
                    raise DomainError(f"negative count {c} for type {t}")
                arr[space.encode(t)] += c
        else:
            arr = np.asarray(counts, dtype=np.int64).copy()
            if arr.shape != (space.cardinality,):
                raise DomainError(
                    f"count array shape {arr.shape} does not match space size"
                )
            if (arr < 0).any():
                raise DomainError("counts must be nonnegative")
        total = int(arr.sum())
        if total < 1:
            raise DomainError("population must contain at least one individual")
        self.space = space
        self.counts = arr
        self.N = total

    @classmethod
    def from_distribution(
        cls, w: TypeDistribution, N: int, mode: str = "round", seed: int = 0
    ) -> "PopulationState":
        """Population of size N approximating w.

        mode 'round' uses largest-remainder rounding of N*w (deterministic);
        mode 'multinomial' draws N individuals iid from w with the package
        RNG, reproducible from the seed.
        """
        if N < 1:
            raise DomainError(f"population size must be >= 1, got {N}")
        if not w.space.dense:
            raise SizeCapError("population initialization needs a dense space")
        weights = w.to_array()
        total = weights.sum()
        if total <= 0:
            raise DomainError("cannot populate from a zero-mass distribution")
        probs = weights / total
        if mode == "round":
            scaled = probs * N
            base = np.floor(scaled).astype(np.int64)
            short = N - int(base.sum())
            if short > 0:
                order = np.argsort(-(scaled - base), kind="stable")
                base[order[:short]] += 1
            return cls(w.space, base)
        if mode == "multinomial":
            u = _kernels.stream_uniforms(seed, 0, N)
            idx = np.searchsorted(np.cumsum(probs), u, side="right")
            counts = np.bincount(
                np.minimum(idx, probs.size - 1), minlength=probs.size
            ).astype(np.int64)
            return cls(w.space, counts)
        raise DomainError(f"unknown initialization mode {mode!r}")

    def count(self, t) -> int:
        return int(self.counts[self.space.encode(t)])

    def frequencies(self) -> TypeDistribution:
        """Empirical type distribution counts/N (a probability measure)."""
        return TypeDistribution._from_dense(self.space, self.counts / self.N)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, PopulationState)
            and self.space == other.space
            and bool((self.counts == other.counts).all())
        )

    def __repr__(self) -> str:
        return f"PopulationState(N={self.N}, types={int((self.counts > 0).sum())})"


def _model_arrays(d: RecombinationDistribution, space: TypeSpace):
    if d.ground != space.sites:
        raise DomainError(
            f"model sites {d.ground} do not match the population's {space.sites}"
        )
    pos = {s: i for i, s in enumerate(d.ground)}
    ordered = sorted(d.entries.items(), key=lambda kv: kv[0].sort_key())
    masks = np.array(
        [sum(1 << pos[s] for s in a.blocks[0]) for a, _ in ordered], dtype=np.int64
    )
    probs = np.array([r for _, r in ordered])
    places = np.array(space.places, dtype=np.int64)
    sizes = np.array(space.alphabet_sizes, dtype=np.int64)
    return masks, probs, places, sizes


# --------------------------------------------------------------------------
# forward model
# --------------------------------------------------------------------------


def simulate_moran(
    d: RecombinationDistribution, z0: PopulationState, t_end: float, seed: int
) -> PopulationState:
    """One forward run; population size is conserved by construction."""
    if t_end < 0:
        raise DomainError(f"time must be nonnegative, got {t_end}")
    masks, probs, places, sizes = _model_arrays(d, z0.space)
    out = _kernels.moran_batch(
        z0.counts, places, sizes, masks, probs, d.mu, [t_end], seed, 1
    )
    return PopulationState(z0.space, out[0, 0])


def simulate_moran_grid(
    d: RecombinationDistribution,
    z0: PopulationState,
    t_grid: Iterable[float],
    seed: int,
    replicates: int = 1,
    multinomial_from: TypeDistribution | None = None,
) -> np.ndarray:
    """Counts at each grid time for each replicate: (reps, times, types).

    Replicate r draws from a stream keyed by (seed, r).  With multinomial_from,
    every replicate redraws its initial population from that distribution
    (size N of z0); otherwise all replicates start exactly at z0.
    """
    times = [float(t) for t in t_grid]
    if not times or any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0:
        raise DomainError("time grid must be nonnegative and strictly increasing")
    if replicates < 1:
        raise DomainError("need at least one replicate")
    masks, probs, places, sizes = _model_arrays(d, z0.space)
    w0 = None
    if multinomial_from is not None:
        if multinomial_from.space != z0.space:
            raise DomainError("initial distribution lives on a different space")
        w0 = multinomial_from.to_array()
        total = w0.sum()
        if total <= 0:
            raise DomainError("cannot initialize from a zero-mass distribution")
        w0 = w0 / total
    return _kernels.moran_batch(
        z0.counts, places, sizes, masks, probs, d.mu, times, seed, replicates,
        multinomial_from=w0,
    )


def moran_event_counts(
    d: RecombinationDistribution, z0: PopulationState, n_events: int, seed: int
) -> np.ndarray:
    """(dying type, offspring type) frequency table of single events.

    The population is reset to z0 before each event, so dividing by
    n_events estimates the per-event transition law out of z0 for
    comparison against the exact jump rates.
    """
    if n_events < 1:
        raise DomainError("need at least one event")
    masks, probs, places, sizes = _model_arrays(d, z0.space)
    return _kernels.moran_event_pairs(
        z0.counts, places, sizes, masks, probs, seed, n_events
    )


@dataclass
class LlnReport:
    """Mean distance of empirical frequencies to the deterministic flow."""

    t: float
    replicates: int
    population_sizes: list[int]
    mean_tv: list[float]
    sd_tv: list[float]
    slope: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "replicates": self.replicates,
            "population_sizes": self.population_sizes,
            "mean_tv": self.mean_tv,
            "sd_tv": self.sd_tv,
            "slope": self.slope,
        }


def lln_report(
    d: RecombinationDistribution,
    w0: TypeDistribution,
    t: float,
    population_sizes: Iterable[int],
    replicates: int,
    seed: int,
) -> LlnReport:
    """Empirical convergence of Z_t/N to the deterministic solution.

    For each population size N, every replicate initializes multinomially
    from w0, runs to time t, and measures the total variation distance of
    its type frequencies to the exactly solved state.  Replicate streams
    are shared across the N values (common random numbers), which makes
    the decrease in N directly comparable.  The slope is the least-squares
    fit of log mean-TV against log N (about -1/2 for sqrt(N) scaling).
    """
    from .dynamics import solve_exact

    sizes_list = [int(n) for n in population_sizes]
    if not sizes_list or any(n < 1 for n in sizes_list):
        raise DomainError("population sizes must be positive")
    if replicates < 1:
        raise DomainError("need at least one replicate")
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    _require_prob(w0)
    target = solve_exact(d, w0, t, method="semigroup").to_array()
    masks, probs, places, sizes = _model_arrays(d, w0.space)
    w0_arr = w0.to_array()
    means: list[float] = []
    sds: list[float] = []
    for n_pop in sizes_list:
        tv = _kernels.moran_tv_batch(
            w0_arr, target, n_pop, places, sizes, masks, probs, d.mu, t, seed, replicates
        )
        means.append(float(tv.mean()))
        sds.append(float(tv.std(ddof=1)) if replicates > 1 else 0.0)
    if len(sizes_list) > 1:
        slope = float(
            np.polyfit(np.log(np.array(sizes_list, float)), np.log(means), 1)[0]
        )
    else:
        slope = math.nan
    return LlnReport(
        t=float(t),
        replicates=replicates,
        population_sizes=sizes_list,
        mean_tv=means,
        sd_tv=sds,
        slope=slope,
    )


def _require_prob(w: TypeDistribution) -> None:
    if not w.is_dense:
        raise SizeCapError("simulation needs a dense type space")
    if abs(w.mass - 1.0) > 1e-9:
        raise DomainError(f"initial distribution has mass {w.mass!r}, expected 1")


# --------------------------------------------------------------------------
# backward model
# --------------------------------------------------------------------------


class AncestralState:
    """Site fragments with the label of the ancestor carrying each.

    The fragments partition the site set and only ever refine over
    backward time; labels merge when fragments coalesce into a shared
    ancestor, so distinct labels count ancestral individuals.
    """

    __slots__ = ("ground", "blocks")

    def __init__(self, ground: tuple[int, ...], blocks: list[tuple[tuple[int, ...], int]]):
        seen: set[int] = set()
        for sites, _ in blocks:
            for s in sites:
                if s in seen:
                    raise DomainError(f"site {s} in two fragments")
                seen.add(s)
        if seen != set(ground):
            raise DomainError("fragments must cover the ground set exactly")
        self.ground = ground
        self.blocks = sorted(
            ((tuple(sorted(sites)), int(label)) for sites, label in blocks),
            key=lambda bl: bl[0][0],
        )

    @property
    def n_ancestors(self) -> int:
        return len({label for _, label in self.blocks})

    def site_partition(self) -> Partition:
        """The fragment partition (ignoring which ancestor holds what)."""
        return Partition([sites for sites, _ in self.blocks])

    def ancestor_partition(self) -> Partition:
        """Sites grouped by the ancestral individual carrying them."""
        merged: dict[int, list[int]] = {}
        for sites, label in self.blocks:
            merged.setdefault(label, []).extend(sites)
        return Partition(merged.values())

    def __repr__(self) -> str:
        body = ", ".join(
            f"{','.join(map(str, sites))}#{label}" for sites, label in self.blocks
        )
        return f"AncestralState({body})"


def simulate_arg(
    d: RecombinationDistribution, N: int, t_end: float, seed: int, replicate: int = 0
) -> AncestralState:
    """One backward run from a single individual carrying every site."""
    if N < 1:
        raise DomainError(f"population size must be >= 1, got {N}")
    if t_end < 0:
        raise DomainError(f"time must be nonnegative, got {t_end}")
    pos = {s: i for i, s in enumerate(d.ground)}
    ordered = sorted(d.entries.items(), key=lambda kv: kv[0].sort_key())
    masks = np.array(
        [sum(1 << pos[s] for s in a.blocks[0]) for a, _ in ordered], dtype=np.int64
    )
    probs = np.array([r for _, r in ordered])
    frag_mask, frag_owner, m = _kernels.arg_state(
        masks, probs, d.mu, d.n_sites, N, t_end, seed, replicate
    )
    # compact owner indices to first-occurrence labels for stable output
    relabel: dict[int, int] = {}
    blocks = []
    order = sorted(range(len(frag_mask)), key=lambda f: int(frag_mask[f] & -frag_mask[f]))
    for f in order:
        owner = int(frag_owner[f])
        label = relabel.setdefault(owner, len(relabel))
        sites = tuple(
            d.ground[i] for i in range(d.n_sites) if (int(frag_mask[f]) >> i) & 1
        )
        blocks.append((sites, label))
    state = AncestralState(d.ground, blocks)
    assert state.n_ancestors == m
    return state


def arg_replicates(
    d: RecombinationDistribution, N: int, t_end: float, seed: int, n_replicates: int
) -> tuple[np.ndarray, np.ndarray]:
    """Batch of backward runs: per-replicate site labels and ancestor counts."""
    if N < 1 or n_replicates < 1:
        raise DomainError("population size and replicate count must be >= 1")
    if t_end < 0:
        raise DomainError(f"time must be nonnegative, got {t_end}")
    pos = {s: i for i, s in enumerate(d.ground)}
    ordered = sorted(d.entries.items(), key=lambda kv: kv[0].sort_key())
    masks = np.array(
        [sum(1 << pos[s] for s in a.blocks[0]) for a, _ in ordered], dtype=np.int64
    )
    probs = np.array([r for _, r in ordered])
    return _kernels.arg_batch(masks, probs, d.mu, d.n_sites, N, t_end, seed, n_replicates)


def arg_partition_frequencies(
    d: RecombinationDistribution, N: int, t_end: float, seed: int, n_replicates: int
) -> dict[Partition, int]:
    """Sample counts of the backward site partition (labels ignored)."""
    rows, _ = arg_replicates(d, N, t_end, seed, n_replicates)
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    out: dict[Partition, int] = {}
    for i in range(uniq.shape[0]):
        groups: dict[int, list[int]] = {}
        for posn, label in enumerate(uniq[i]):
            groups.setdefault(int(label), []).append(d.ground[posn])
        out[Partition(groups.values())] = int(counts[i])
    return out


def ancestry_reconstruct(
    d: RecombinationDistribution, z0: PopulationState, t: float, seed: int
) -> tuple[int, ...]:
    """Type of one present-day individual assembled from its ancestry.

    Runs the backward process over [0, t], assigns each ancestral
    individual a founder drawn without replacement from z0, and copies
    the founder's letters fragment by fragment.
    """
    counts = reconstruct_replicates(d, z0, t, seed, 1)
    return z0.space.decode(int(counts[0]))


def reconstruct_replicates(
    d: RecombinationDistribution, z0: PopulationState, t: float, seed: int, n_replicates: int
) -> np.ndarray:
    """Flat type indices of n_replicates independent reconstructions."""
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    if n_replicates < 1:
        raise DomainError("need at least one replicate")
    masks, probs, places, sizes = _model_arrays(d, z0.space)
    return _kernels.reconstruct_batch(
        masks, probs, d.mu, d.n_sites, z0.N, t, seed, n_replicates,
        z0.counts, places, sizes,
    )
