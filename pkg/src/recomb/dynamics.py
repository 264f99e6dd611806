"""Forward-in-time solution of the recombination dynamics.

Three routes to the same flow on probability distributions:

* ``integrate`` - fixed-step 4th-order integration of the nonlinear
  vector field sum_A rho(A) (recombine_A(w) - w);
* ``solve_exact`` - the convex combination sum_A a_t(A) recombine_A(w0)
  with coefficients from any of the exact routes in :mod:`.ancestral`;
* ``iterate_discrete`` - the per-generation map of probability-style
  models.

``check_duality`` confirms that recombining the solved state along a
partition equals restarting the coefficient process from that partition.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .ancestral import (
    CoefficientVector,
    PartitionIndex,
    build_generator,
    coefficients_recursion,
    coefficients_semigroup,
    coefficients_single_crossover,
    compute_psi_theta,
)
from .errors import DomainError, MassDriftError, SizeCapError
from .measure import TypeDistribution, TypeSpace
from .partitions import Partition
from .rates import RecombinationDistribution

#: hard error threshold for |mass - 1| along integrated trajectories.
MASS_TOL = 1e-9

EXACT_METHODS = ("semigroup", "recursion", "single_crossover")


class Trajectory:
    """Time-aligned sequence of distribution states, first time 0."""

    __slots__ = ("times", "states")

    def __init__(self, times: Sequence[float], states: Sequence[TypeDistribution]):
        if len(times) != len(states):
            raise DomainError("times and states must align")
        if not times or times[0] != 0:
            raise DomainError("trajectories start at time 0")
        for earlier, later in zip(times, times[1:]):
            if not later > earlier:
                raise DomainError("times must be strictly increasing")
        self.times = list(times)
        self.states = list(states)

    @property
    def final(self) -> TypeDistribution:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.states))

    def state_at(self, t: float) -> TypeDistribution:
        for when, state in zip(self.times, self.states):
            if when == t:
                return state
        raise DomainError(f"time {t} not on the trajectory grid")


class SignedIncrement:
    """A signed measure on a type space (the vector field's value)."""

    __slots__ = ("space", "values")

    def __init__(self, space: TypeSpace, values: np.ndarray):
        self.space = space
        self.values = values

    def weight(self, t) -> float:
        return float(self.values[self.space.encode(t)])

    def total(self) -> float:
        return float(self.values.sum())

    def to_array(self) -> np.ndarray:
        return self.values.copy()


def _require_dense(w: TypeDistribution, what: str) -> None:
    if not w.is_dense:
        raise SizeCapError(f"{what} needs a dense type space (within the storage cap)")


def _check_model_space(d: RecombinationDistribution, w: TypeDistribution) -> None:
    if d.ground != w.space.sites:
        raise DomainError(
            f"model sites {d.ground} do not match the distribution's {w.space.sites}"
        )


class _VectorField:
    """Precomputed flat-index maps for the dense right-hand side.

    For each supported event, idx1/idx2 send a flat type index to the
    flat indices of its two block-projections, so block marginals and
    their product are single gather/scatter passes.
    """

    __slots__ = ("space", "rates", "idx1", "idx2", "k1s", "k2s")

    def __init__(self, d: RecombinationDistribution, space: TypeSpace):
        if d.ground != space.sites:
            raise DomainError("model and space site sets differ")
        entries = sorted(d.entries.items(), key=lambda kv: kv[0].sort_key())
        K = space.cardinality
        digits = np.empty((space.n_sites, K), dtype=np.int64)
        flat = np.arange(K, dtype=np.int64)
        for i in range(space.n_sites):
            digits[i] = (flat // space.places[i]) % space.alphabet_sizes[i]
        idx1 = np.zeros((max(1, len(entries)), K), dtype=np.int64)
        idx2 = np.zeros((max(1, len(entries)), K), dtype=np.int64)
        k1s = np.ones(max(1, len(entries)), dtype=np.int64)
        k2s = np.ones(max(1, len(entries)), dtype=np.int64)
        for e, (a, _) in enumerate(entries):
            for block, idx, ks in ((a.blocks[0], idx1, k1s), (a.blocks[1], idx2, k2s)):
                sub = space.subspace(block)
                for pos, site in enumerate(sorted(block)):
                    idx[e] += digits[site - 1] * sub.places[pos]
                ks[e] = sub.cardinality
        self.space = space
        self.rates = np.array([d.mu * r for _, r in entries])
        self.idx1 = idx1
        self.idx2 = idx2
        self.k1s = k1s
        self.k2s = k2s

    def __call__(self, w: np.ndarray) -> np.ndarray:
        return _kernels.rhs_dense(w, self.idx1, self.idx2, self.k1s, self.k2s, self.rates)


def rhs(d: RecombinationDistribution, w: TypeDistribution) -> SignedIncrement:
    """The vector field sum over events of rate * (recombined w - w).

    Always sums to zero: recombination moves mass around, never creates
    or destroys it.
    """
    _check_model_space(d, w)
    _require_dense(w, "the differential right-hand side")
    field = _VectorField(d, w.space)
    return SignedIncrement(w.space, field(w.to_array()))


def _rk4_span(
    field: _VectorField, w: np.ndarray, duration: float, dt: float
) -> np.ndarray:
    """Advance w over `duration` with steps of dt (shorter final step)."""
    remaining = duration
    while remaining > 1e-15 * max(1.0, duration):
        h = dt if dt <= remaining else remaining
        k1 = field(w)
        k2 = field(w + (0.5 * h) * k1)
        k3 = field(w + (0.5 * h) * k2)
        k4 = field(w + h * k3)
        w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        remaining -= h
        mass = w.sum()
        if abs(mass - 1.0) > MASS_TOL:
            raise MassDriftError(
                f"integration mass drifted to {mass!r} (|drift| > {MASS_TOL}); "
                "reduce dt instead of silently renormalizing"
            )
    return w


def integrate(
    d: RecombinationDistribution, w0: TypeDistribution, t_end: float, dt: float
) -> Trajectory:
    """Fixed-step trajectory from 0 to t_end, one recorded state per step."""
    if t_end < 0:
        raise DomainError(f"t_end must be nonnegative, got {t_end}")
    if t_end > 0 and not 0 < dt <= t_end:
        raise DomainError(f"dt must satisfy 0 < dt <= t_end, got {dt}")
    grid = [0.0]
    if t_end > 0:
        n_full = int(t_end / dt + 1e-9)
        while n_full * dt >= t_end:
            n_full -= 1
        grid.extend(k * dt for k in range(1, n_full + 1))
        grid.append(t_end)
    return integrate_grid(d, w0, grid, dt)


def integrate_grid(
    d: RecombinationDistribution,
    w0: TypeDistribution,
    t_grid: Iterable[float],
    dt: float,
) -> Trajectory:
    """Like :func:`integrate` but records only the listed times.

    The grid must start at 0 and increase; integration still proceeds in
    steps of dt within each span (with a shorter final step per span).
    """
    _check_model_space(d, w0)
    _require_dense(w0, "numerical integration")
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    times = [float(t) for t in t_grid]
    field = _VectorField(d, w0.space)
    w = w0.to_array()
    if abs(w.sum() - 1.0) > MASS_TOL:
        raise MassDriftError("initial state is not a probability distribution")
    states = [w0]
    for earlier, later in zip(times, times[1:]):
        w = _rk4_span(field, w, later - earlier, dt)
        states.append(TypeDistribution._from_dense(w0.space, w.copy()))
    return Trajectory(times, states)


def _coefficients_for(
    d: RecombinationDistribution, t: float, method: str
) -> CoefficientVector:
    if method == "semigroup":
        index = PartitionIndex(d.ground)
        return coefficients_semigroup(build_generator(d, index), t)
    if method == "recursion":
        return coefficients_recursion(compute_psi_theta(d), t)
    if method == "single_crossover":
        return coefficients_single_crossover(d, t)
    raise DomainError(f"unknown method {method!r}; choose from {EXACT_METHODS}")


def mixture_from_coefficients(
    coefficients: CoefficientVector, w0: TypeDistribution
) -> TypeDistribution:
    """sum_A a(A) * recombine_A(w0), skipping zero-weight partitions."""
    if coefficients.index.ground != w0.space.sites:
        raise DomainError("coefficient index and distribution sites differ")
    if w0.is_dense:
        acc = np.zeros(w0.space.cardinality)
        for a, weight in coefficients.items():
            if weight == 0.0:
                continue
            acc += weight * w0.product_over_blocks(a)._dense
        return TypeDistribution._from_dense(w0.space, acc)
    acc_d: dict[tuple[int, ...], float] = {}
    for a, weight in coefficients.items():
        if weight == 0.0:
            continue
        for t, v in w0.product_over_blocks(a).items():
            acc_d[t] = acc_d.get(t, 0.0) + weight * v
    return TypeDistribution._from_sparse(w0.space, acc_d)


def solve_exact(
    d: RecombinationDistribution,
    w0: TypeDistribution,
    t: float,
    method: str = "semigroup",
) -> TypeDistribution:
    """The solved state at time t as a coefficient-weighted mixture of
    recombined initial conditions."""
    _check_model_space(d, w0)
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    return mixture_from_coefficients(_coefficients_for(d, t, method), w0)


def iterate_discrete(
    d: RecombinationDistribution, w0: TypeDistribution, t: int
) -> Trajectory:
    """The per-generation map w -> sum_A r(A) recombine_A(w), t times.

    Needs a probability-style model: the entries are applied as
    per-generation probabilities with the residual mass copying the state
    unchanged, so each step is a convex combination and stays on the
    probability simplex.
    """
    _check_model_space(d, w0)
    if d.style != "probability":
        raise DomainError(
            "discrete-time iteration needs a probability-style model, not rates"
        )
    if t < 0 or int(t) != t:
        raise DomainError(f"generation count must be a nonnegative integer, got {t}")
    entries = sorted(d.entries.items(), key=lambda kv: kv[0].sort_key())
    residual = d.residual_probability
    times = [float(s) for s in range(int(t) + 1)]
    states = [w0]
    w = w0
    for _ in range(int(t)):
        if w.is_dense:
            acc = residual * w._dense
            for a, r in entries:
                acc = acc + r * w.product_over_blocks(a)._dense
            w = TypeDistribution._from_dense(w.space, acc)
        else:
            acc_d = {ty: residual * v for ty, v in w.items()}
            for a, r in entries:
                for ty, v in w.product_over_blocks(a).items():
                    acc_d[ty] = acc_d.get(ty, 0.0) + r * v
            w = TypeDistribution._from_sparse(w.space, acc_d)
        states.append(w)
    return Trajectory(times, states)


def check_duality(
    d: RecombinationDistribution, w0: TypeDistribution, b: Partition, t: float
) -> float:
    """Sup-norm gap between the two sides of the duality identity.

    Left: solve to time t, then recombine along b.  Right: restart the
    coefficient process from b and mix the recombined initial conditions.
    Both sides are computed independently; the gap should sit at rounding
    level (about 1e-10) for exact-lattice models.
    """
    _check_model_space(d, w0)
    if b.ground != d.ground:
        raise DomainError(f"{b.to_text()} is not a partition of {d.ground}")
    index = PartitionIndex(d.ground)
    q = build_generator(d, index)
    left = solve_exact(d, w0, t, method="semigroup").product_over_blocks(b)
    right = mixture_from_coefficients(coefficients_semigroup(q, t, start=b), w0)
    return left.sup_distance(right)
