"""Visited-network selection for roaming handsets.

Handsets pick a network automatically by walking the SIM's preferred list in
order and camping on the first listed network with signal; coverage is the
probability of signal.  Mass that exhausts the list without signal falls back
across every band-compatible network in proportion to coverage.  A small
share of users selects manually and simply picks the cheapest compatible
network showing any coverage.  Single-band 900 handsets cannot see GSM1800
networks at all; dual-band handsets see everything.

Shares are exact rationals and form a sub-distribution: mass not served by
any compatible network is lost (no service), it never renormalises onto the
served networks.  Because list walking ignores retail prices, the automatic
mass is price-blind; that is the customer-ignorance externality this module
makes precise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Mapping, Optional, Sequence, Tuple

from .money import Money
from .tariff import Band


class EmptyNetworkList(Exception):
    """Selection over an empty set of candidate networks."""


class SteeringUnavailable(Exception):
    """Over-the-air list reprogramming attempted without the capability."""


class HandsetClass(str, enum.Enum):
    SINGLE900 = "single900"
    DUAL = "dual"


@dataclass(frozen=True)
class VisitedNetwork:
    operator: str
    band: Band
    coverage: Fraction

    def __post_init__(self) -> None:
        if not (0 <= self.coverage <= 1):
            raise ValueError("coverage must be in [0, 1]")


@dataclass(frozen=True)
class SimProfile:
    """SIM state of one home operator's subscriber base.

    `preferred` holds one ordered operator list per visited country, as a
    sorted tuple of (country, ops) pairs so profiles stay hashable; build via
    `create`.  dual_band_mix is the handset fleet's dual-band fraction,
    manual_propensity the share of subscribers who select by hand.
    """

    home_operator: str
    preferred: Tuple[Tuple[str, Tuple[str, ...]], ...]
    dual_band_mix: Fraction
    manual_propensity: Fraction

    @classmethod
    def create(
        cls,
        home_operator: str,
        preferred: Mapping[str, Sequence[str]],
        dual_band_mix: Fraction,
        manual_propensity: Fraction,
    ) -> "SimProfile":
        entries = tuple(sorted((c, tuple(ops)) for c, ops in preferred.items()))
        return cls(home_operator, entries, dual_band_mix, manual_propensity)

    def __post_init__(self) -> None:
        if not (0 <= self.dual_band_mix <= 1):
            raise ValueError("dual_band_mix must be in [0, 1]")
        if not (0 <= self.manual_propensity <= 1):
            raise ValueError("manual_propensity must be in [0, 1]")

    def preferred_list(self, country: str) -> Tuple[str, ...]:
        for c, ops in self.preferred:
            if c == country:
                return ops
        return ()

    def with_preferred(self, country: str, new_list: Sequence[str]) -> "SimProfile":
        others = tuple((c, ops) for c, ops in self.preferred if c != country)
        entries = tuple(sorted(others + ((country, tuple(new_list)),)))
        return replace(self, preferred=entries)


def effective_coverage(network: VisitedNetwork, handset: HandsetClass) -> Fraction:
    """Coverage as the handset experiences it: zero when bands are incompatible."""
    if handset is HandsetClass.SINGLE900 and network.band is not Band.GSM900:
        return Fraction(0)
    return network.coverage


def _class_shares(
    ordered: Tuple[VisitedNetwork, ...],
    listed: Tuple[str, ...],
    handset: HandsetClass,
) -> Dict[str, Fraction]:
    """Automatic attachment of one handset class: list walk, then fallback."""
    by_op = {n.operator: n for n in ordered}
    shares = {n.operator: Fraction(0) for n in ordered}
    remaining = Fraction(1)
    for op in listed:
        cov = effective_coverage(by_op[op], handset)
        shares[op] += remaining * cov
        remaining *= 1 - cov
    if remaining > 0:
        total = sum(effective_coverage(n, handset) for n in ordered)
        if total > 0:
            for n in ordered:
                shares[n.operator] += remaining * effective_coverage(n, handset) / total
        # else: the residual mass has no compatible signal anywhere -> lost.
    return shares


def _manual_choice(
    ordered: Tuple[VisitedNetwork, ...],
    handset: HandsetClass,
    prices: Tuple[Tuple[str, Money], ...],
) -> Optional[str]:
    """Cheapest compatible network with any coverage; lexicographic tie-break."""
    table = dict(prices)
    candidates = [
        n.operator
        for n in ordered
        if effective_coverage(n, handset) > 0 and n.operator in table
    ]
    if not candidates:
        return None
    return min(candidates, key=lambda op: (table[op], op))


@lru_cache(maxsize=1024)
def _share_table(
    profile: SimProfile,
    country: str,
    networks: Tuple[VisitedNetwork, ...],
    prices: Tuple[Tuple[str, Money], ...],
) -> Tuple[Tuple[str, Fraction], ...]:
    listed = profile.preferred_list(country)
    mix = {
        HandsetClass.SINGLE900: 1 - profile.dual_band_mix,
        HandsetClass.DUAL: profile.dual_band_mix,
    }
    totals = {n.operator: Fraction(0) for n in networks}
    for handset, weight in mix.items():
        if weight == 0:
            continue
        automatic = _class_shares(networks, listed, handset)
        for op, share in automatic.items():
            totals[op] += weight * (1 - profile.manual_propensity) * share
        if profile.manual_propensity > 0:
            choice = _manual_choice(networks, handset, prices)
            if choice is not None:
                totals[choice] += weight * profile.manual_propensity
    return tuple((n.operator, totals[n.operator]) for n in networks)


def expected_shares(
    profile: SimProfile,
    country: str,
    networks: Sequence[VisitedNetwork],
    retail_prices: Mapping[str, Money],
) -> Dict[str, Fraction]:
    """Exact attachment distribution over the country's networks.

    Returns a sub-distribution: the shortfall from 1 is subscribers with no
    service.  Raises EmptyNetworkList when there is nothing to select from.
    """
    if not networks:
        raise EmptyNetworkList(f"no networks to select from in {country!r}")
    ordered = tuple(sorted(networks, key=lambda n: n.operator))
    listed = profile.preferred_list(country)
    known = {n.operator for n in ordered}
    missing = [op for op in listed if op not in known]
    if missing:
        raise ValueError(f"preferred list names unknown networks: {missing}")
    prices = tuple(sorted(retail_prices.items()))
    return dict(_share_table(profile, country, ordered, prices))


def select_network_sampled(
    profile: SimProfile,
    country: str,
    networks: Sequence[VisitedNetwork],
    retail_prices: Mapping[str, Money],
    rng,
) -> Optional[str]:
    """One random attachment drawn from the expected-share distribution.

    Returns None for the no-service residual.  Deterministic for a seeded
    generator; float conversion happens only at the sampling boundary.
    """
    shares = expected_shares(profile, country, networks, retail_prices)
    u = float(rng.random())
    cumulative = 0.0
    for op in sorted(shares):
        cumulative += float(shares[op])
        if u < cumulative:
            return op
    return None


def ota_reprogram(
    profile: SimProfile,
    country: str,
    new_list: Sequence[str],
    *,
    steering_enabled: bool = True,
) -> SimProfile:
    """Rewrite one country's preferred list over the air.

    Requires the home operator's steering capability; reprogramming to the
    current list is a no-op that returns an equal profile.
    """
    if not steering_enabled:
        raise SteeringUnavailable(
            f"{profile.home_operator} cannot reprogram SIMs for {country!r}"
        )
    if len(set(new_list)) != len(tuple(new_list)):
        raise ValueError("preferred list must not repeat operators")
    return profile.with_preferred(country, new_list)
