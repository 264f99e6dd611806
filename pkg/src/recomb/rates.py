"""Recombination distributions and their marginalization to site subsets.

A model is a per-individual event rate ``mu`` together with probabilities
r(A) on two-block partitions of the site set; the residual 1 - sum r(A) is
the probability that an event copies a single parent unchanged (the
one-block partition).  Rates are rho(A) = mu * r(A).

Marginal rates on a subset u sum rho over all partitions restricting to a
given partition of u; only the stored support is enumerated, which keeps
sparse models (e.g. single crossover, n-1 entries) cheap.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Mapping

from .errors import ConfigError, DomainError
from .partitions import Partition, cut_partition

_SUM_TOL = 1e-9


class RecombinationDistribution:
    """Event rate mu plus probabilities on two-block site partitions."""

    __slots__ = ("ground", "mu", "entries", "style")

    def __init__(
        self,
        ground: Iterable[int],
        mu: float,
        entries: Mapping[Partition, float],
        style: str = "probability",
    ):
        self.ground = tuple(sorted(ground))
        if not self.ground:
            raise DomainError("ground set must be nonempty")
        self.mu = float(mu)
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if style not in ("probability", "rate"):
            raise DomainError(f"unknown style {style!r}")
        self.style = style
        clean: dict[Partition, float] = {}
        for a, r in entries.items():
            if a.ground != self.ground:
                raise DomainError(
                    f"entry {a.to_text()} is not a partition of {self.ground}"
                )
            if a.n_blocks != 2:
                raise DomainError(
                    f"entry {a.to_text()} has {a.n_blocks} blocks; exactly 2 required"
                )
            r = float(r)
            if r < 0:
                raise DomainError(f"negative probability {r} for {a.to_text()}")
            if a in clean:
                raise DomainError(f"duplicate entry for {a.to_text()}")
            if r > 0:
                clean[a] = r
        total = sum(clean.values())
        if total > 1.0 + _SUM_TOL:
            raise DomainError(
                f"two-block probabilities sum to {total}, which exceeds 1"
            )
        self.entries = clean

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_probabilities(
        cls, ground: Iterable[int], mu: float, entries: Mapping[Partition, float]
    ) -> "RecombinationDistribution":
        return cls(ground, mu, entries, style="probability")

    @classmethod
    def from_rates(
        cls,
        ground: Iterable[int],
        rates: Mapping[Partition, float],
        residual_rate: float = 0.0,
    ) -> "RecombinationDistribution":
        """Build from rates rho(A) plus the rate of copy-unchanged events.

        mu is the implied total; probabilities are rho(A)/mu.
        """
        residual_rate = float(residual_rate)
        if residual_rate < 0:
            raise DomainError(f"residual rate must be nonnegative, got {residual_rate}")
        for a, v in rates.items():
            if float(v) < 0:
                raise DomainError(f"negative rate {v} for {a.to_text()}")
        mu = sum(float(v) for v in rates.values()) + residual_rate
        if not mu > 0:
            raise DomainError("all rates zero: total event rate must be positive")
        probs = {a: float(v) / mu for a, v in rates.items()}
        return cls(ground, mu, probs, style="rate")

    @classmethod
    def single_crossover(
        cls, cut_rates: Iterable[float], residual_rate: float = 0.0
    ) -> "RecombinationDistribution":
        """Model on n = len(cut_rates) + 1 sites with one rate per cut.

        cut_rates[k-1] is the rate of the split {1..k | k+1..n}.
        """
        cut_rates = [float(v) for v in cut_rates]
        n = len(cut_rates) + 1
        if n < 2:
            raise DomainError("single crossover needs at least one cut rate")
        rates = {cut_partition(n, k): v for k, v in enumerate(cut_rates, start=1)}
        return cls.from_rates(range(1, n + 1), rates, residual_rate)

    # -- elementary queries ------------------------------------------------

    @property
    def n_sites(self) -> int:
        return len(self.ground)

    @property
    def residual_probability(self) -> float:
        return max(0.0, 1.0 - sum(self.entries.values()))

    def probability(self, a: Partition) -> float:
        """r(a) for two-block a; the residual for the one-block partition."""
        if a.ground != self.ground:
            raise DomainError(f"{a.to_text()} is not a partition of {self.ground}")
        if a.n_blocks == 1:
            return self.residual_probability
        if a.n_blocks == 2:
            return self.entries.get(a, 0.0)
        raise DomainError(
            f"{a.to_text()} has {a.n_blocks} blocks; recombination events have at most 2"
        )

    def rate(self, a: Partition) -> float:
        """rho(a) = mu * r(a); defined for partitions with at most 2 blocks."""
        return self.mu * self.probability(a)

    def support(self) -> Iterator[tuple[Partition, float]]:
        """(partition, probability) over the stored two-block entries."""
        return iter(self.entries.items())

    # -- marginalization -------------------------------------------------

    def _check_subset(self, u: tuple[int, ...]) -> None:
        if not u:
            raise DomainError("site subset must be nonempty")
        if not set(u).issubset(self.ground):
            raise DomainError(f"{list(u)} is not a subset of {self.ground}")

    def marginal_rate(self, u: Iterable[int], b: Partition) -> float:
        """Sum of rho(A) over all events A whose restriction to u equals b."""
        uu = tuple(sorted(set(u)))
        self._check_subset(uu)
        if b.ground != uu:
            raise DomainError(f"{b.to_text()} is not a partition of {list(uu)}")
        if b.n_blocks > 2:
            raise DomainError(
                f"{b.to_text()} has {b.n_blocks} blocks; marginals live on <= 2"
            )
        total = 0.0
        if b.n_blocks == 1:
            # the one-block event (residual) restricts to b on every subset
            total += self.mu * self.residual_probability
        for a, r in self.entries.items():
            if a.restrict(uu) == b:
                total += self.mu * r
        return total

    def marginal_probability(self, u: Iterable[int], b: Partition) -> float:
        """r^u(b) = marginal_rate / mu (same sum with r in place of rho)."""
        return self.marginal_rate(u, b) / self.mu

    def block_split_rates(self, u: Iterable[int]) -> dict[Partition, float]:
        """All two-block marginal rates on u with positive mass.

        Keys are two-block partitions of u; values are rho^u.  Computed by
        restricting the support, so cost is O(|support|).
        """
        uu = tuple(sorted(set(u)))
        self._check_subset(uu)
        out: dict[Partition, float] = {}
        if len(uu) == 1:
            return out
        for a, r in self.entries.items():
            c = a.restrict(uu)
            if c.n_blocks == 2:
                out[c] = out.get(c, 0.0) + self.mu * r
        return out

    def split_rate(self, u: Iterable[int]) -> float:
        """Total rate at which the subset u is separated into two parts."""
        return sum(self.block_split_rates(u).values())

    # -- structure tests ---------------------------------------------------

    def is_single_crossover(self) -> bool:
        """True iff every supported event is an interval split {1..k | k+1..n}."""
        n = self.n_sites
        if self.ground != tuple(range(1, n + 1)):
            return False
        return all(a.is_interval() for a in self.entries)

    def cut_rate(self, k: int) -> float:
        """rho of the cut after site k (single-crossover convenience)."""
        return self.rate(cut_partition(self.n_sites, k))

    def unseparated_adjacent_pairs(self) -> list[tuple[int, int]]:
        """Adjacent site pairs no event ever separates.

        Sites in such a pair stay perfectly linked forever, so long-time
        convergence to the full product of single-site marginals cannot
        hold; callers surface this as a model warning rather than silently
        merging the sites.
        """
        out = []
        for a, b in zip(self.ground, self.ground[1:]):
            if self.split_rate((a, b)) == 0.0:
                out.append((a, b))
        return out

    # -- config glue ------------------------------------------------------

    @classmethod
    def from_config(cls, cfg: Mapping, path: str = "recombination") -> "RecombinationDistribution":
        """Parse the JSON config block.

        Probability style: {"n": 3, "mu": 1.0, "style": "probability",
        "entries": [{"partition": "1|2,3", "value": 0.3}, ...]}.
        Rate style replaces mu with an optional "residual_rate".
        """
        if not isinstance(cfg, Mapping):
            raise ConfigError(f"{path}: expected an object")
        allowed = {"n", "mu", "style", "entries", "residual_rate"}
        for key in cfg:
            if key not in allowed:
                raise ConfigError(f"{path}.{key}: unknown field")
        try:
            n = int(cfg["n"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"{path}.n: required positive integer") from None
        if n < 1:
            raise ConfigError(f"{path}.n: must be >= 1, got {n}")
        style = cfg.get("style")
        if style not in ("probability", "rate"):
            raise ConfigError(
                f"{path}.style: must be 'probability' or 'rate', got {style!r}"
            )
        raw = cfg.get("entries", [])
        if not isinstance(raw, list):
            raise ConfigError(f"{path}.entries: expected a list")
        entries: dict[Partition, float] = {}
        ground = tuple(range(1, n + 1))
        for i, item in enumerate(raw):
            ipath = f"{path}.entries[{i}]"
            if not isinstance(item, Mapping):
                raise ConfigError(f"{ipath}: expected an object")
            for key in item:
                if key not in ("partition", "value"):
                    raise ConfigError(f"{ipath}.{key}: unknown field")
            try:
                part = Partition.from_text(str(item["partition"]))
            except (KeyError, DomainError) as exc:
                raise ConfigError(f"{ipath}.partition: {exc}") from None
            try:
                value = float(item["value"])
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"{ipath}.value: required real number") from None
            if part.ground != ground:
                raise ConfigError(
                    f"{ipath}.partition: {part.to_text()} is not a partition of 1..{n}"
                )
            if part in entries:
                raise ConfigError(f"{ipath}.partition: duplicate {part.to_text()}")
            entries[part] = value
        try:
            if style == "probability":
                if "residual_rate" in cfg:
                    raise ConfigError(
                        f"{path}.residual_rate: only valid with style 'rate'"
                    )
                try:
                    mu = float(cfg["mu"])
                except (KeyError, TypeError, ValueError):
                    raise ConfigError(f"{path}.mu: required positive real") from None
                return cls.from_probabilities(ground, mu, entries)
            if "mu" in cfg:
                raise ConfigError(f"{path}.mu: only valid with style 'probability'")
            residual = cfg.get("residual_rate", 0.0)
            try:
                residual = float(residual)
            except (TypeError, ValueError):
                raise ConfigError(f"{path}.residual_rate: expected a real number") from None
            return cls.from_rates(ground, entries, residual)
        except DomainError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def to_config(self) -> dict:
        ordered = sorted(self.entries.items(), key=lambda kv: kv[0].sort_key())
        if self.style == "probability":
            return {
                "n": self.n_sites,
                "mu": self.mu,
                "style": "probability",
                "entries": [
                    {"partition": a.to_text(), "value": r} for a, r in ordered
                ],
            }
        return {
            "n": self.n_sites,
            "style": "rate",
            "entries": [
                {"partition": a.to_text(), "value": self.mu * r} for a, r in ordered
            ],
            "residual_rate": self.mu * self.residual_probability,
        }

    def __repr__(self) -> str:
        return (
            f"RecombinationDistribution(n={self.n_sites}, mu={self.mu:.6g}, "
            f"{len(self.entries)} entries)"
        )
