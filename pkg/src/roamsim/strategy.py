"""Operator decisions: IOT levels, discount offers, steering responses.

Wholesale price transparency is lagged: a clearing-house view carries every
operator's headline IOT as of the previous period and never any confidential
discount.  Policies act on that view.  `Hold` keeps the level, `Undercut`
prices a fixed factor below the cheapest same-country rival, `BestResponse`
grid-searches next-period wholesale profit, predicting how attachment shares
and volume react; when a home operator's steering capability is live, the
predictor assumes the headline-cheapest network will be steered to the list
head, which is what pulls best responders into undercutting races.

Discount negotiation: a visited operator offers tier schedules in exchange
for the list head; a home operator accepts only a strict predicted cut in
its per-minute wholesale cost, reprogramming SIMs over the air on accept.
A non-discrimination regime clones any accepted schedule to every other
counterparty the following period.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .demand import DemandParams, roaming_volume
from .money import Money, round_half_up
from .selection import SimProfile, VisitedNetwork, expected_shares
from .settlement import DiscountAgreement, Tier, TierKind
from .tariff import MarkupRetail, RetailScheme, SingleRateRetail


class InvalidTiers(Exception):
    """A proposed discount schedule is empty or self-overlapping."""


@dataclass(frozen=True)
class InfoCentreView:
    """Lagged headline IOT levels, as the clearing house publishes them.

    Deliberately carries no discount information; negotiated rebates stay
    confidential between the two parties.
    """

    observer: str
    period: int
    levels: Tuple[Tuple[str, Money], ...]

    def level(self, operator: str) -> Money:
        for op, value in self.levels:
            if op == operator:
                return value
        raise KeyError(operator)

    def as_dict(self) -> Dict[str, Money]:
        return dict(self.levels)


def observe_iots(
    initial_levels: Mapping[str, Money],
    history: Sequence[Mapping[str, Money]],
    observer: str,
    period: int,
) -> InfoCentreView:
    """View for deciding period `period`: levels in force one period earlier.

    Period 0 sees the scenario's initial levels.  `history[t]` must hold the
    levels that were in force during period t.
    """
    if period == 0:
        source = initial_levels
    else:
        source = history[period - 1]
    return InfoCentreView(
        observer=observer,
        period=period,
        levels=tuple(sorted(source.items())),
    )


# === IOT policies ===


@dataclass(frozen=True)
class Hold:
    pass


@dataclass(frozen=True)
class Undercut:
    delta: Fraction
    floor: Money

    def __post_init__(self) -> None:
        if not (0 <= self.delta < 1):
            raise ValueError("undercut delta must be in [0, 1)")
        if self.floor < 0:
            raise ValueError("floor must be >= 0")


@dataclass(frozen=True)
class BestResponse:
    grid: Tuple[Money, ...]
    cost: Money

    def __post_init__(self) -> None:
        if not self.grid:
            raise ValueError("grid must be non-empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if self.cost < 0:
            raise ValueError("cost must be >= 0")


IotPolicy = Union[Hold, Undercut, BestResponse]


@dataclass(frozen=True)
class HomeMarket:
    """One foreign home operator's stake in the decider's country."""

    profile: SimProfile
    params: DemandParams
    retail: RetailScheme
    steering_active: bool


@dataclass
class StrategyContext:
    """Everything a wholesale pricing decision may look at.

    `networks` are the decider's country's networks at current coverage;
    `own_agreements` the discounts the decider itself has granted (it cannot
    see anyone else's).
    """

    operator: str
    country: str
    networks: Tuple[VisitedNetwork, ...]
    rival_operators: Tuple[str, ...]
    home_markets: Tuple[HomeMarket, ...]
    own_agreements: Tuple[DiscountAgreement, ...] = ()
    unit_of: Mapping[str, str] = field(default_factory=dict)


def _best_volume_rate(tiers: Sequence[Tier]) -> Fraction:
    rates = [t.rate for t in tiers if t.kind is TierKind.VOLUME]
    return max(rates, default=Fraction(0))


def _granted_rate(ctx: StrategyContext, home_operator: str) -> Fraction:
    unit = ctx.unit_of.get(home_operator)
    best = Fraction(0)
    for agreement in ctx.own_agreements:
        if agreement.counterparty in (home_operator, unit):
            best = max(best, _best_volume_rate(agreement.tiers))
    return best


def _retail_prices(
    retail: RetailScheme, country: str, headline: Mapping[str, Money]
) -> Dict[str, Money]:
    """Per-minute retail price the home op would bill on each network."""
    prices: Dict[str, Money] = {}
    for op, level in headline.items():
        if isinstance(retail, MarkupRetail):
            prices[op] = round_half_up((1 + retail.markup) * level)
        else:
            prices[op] = retail.minute_rate_for(country)
    return prices


def _steered_list(
    current: Tuple[str, ...],
    effective: Mapping[str, Money],
) -> Tuple[str, ...]:
    """Move the effective-cheapest network to the head on strict improvement."""
    if not effective:
        return current
    cheapest = min(sorted(effective), key=lambda op: (effective[op], op))
    if current and effective.get(current[0], None) is not None:
        if effective[cheapest] >= effective[current[0]]:
            return current
    if current and current[0] == cheapest:
        return current
    return (cheapest,) + tuple(op for op in current if op != cheapest)


def _predict_minutes(
    ctx: StrategyContext,
    view_levels: Mapping[str, Money],
    own_level: Money,
) -> Fraction:
    """Next-period minutes landing on the decider at a candidate level.

    Rivals are frozen at their lagged view levels.  For steering-capable home
    operators the decider assumes the headline-cheapest network (net of the
    discounts it granted itself) gets steered to the list head; it cannot see
    rivals' confidential discounts, so those never enter its belief.
    """
    headline = {n.operator: view_levels.get(n.operator, 0) for n in ctx.networks}
    headline[ctx.operator] = own_level
    total = Fraction(0)
    for market in ctx.home_markets:
        home_op = market.profile.home_operator
        current = market.profile.preferred_list(ctx.country)
        profile = market.profile
        if market.steering_active:
            effective = dict(headline)
            granted = _granted_rate(ctx, home_op)
            if granted > 0:
                effective[ctx.operator] = round_half_up(headline[ctx.operator] * (1 - granted))
            steered = _steered_list(current, effective)
            if steered != current:
                profile = profile.with_preferred(ctx.country, steered)
        prices = _retail_prices(market.retail, ctx.country, headline)
        shares = expected_shares(profile, ctx.country, ctx.networks, prices)
        served = sum(shares.values())
        if served == 0:
            continue
        weighted = sum(shares[op] * prices[op] for op in shares)
        perceived = round_half_up(weighted / served)
        volume = roaming_volume(market.params, perceived)
        total += volume * shares.get(ctx.operator, Fraction(0))
    return total


def decide_iot(policy: IotPolicy, view: InfoCentreView, ctx: StrategyContext) -> Money:
    """New headline IOT level for the deciding operator."""
    current = view.level(ctx.operator)
    if isinstance(policy, Hold):
        return current
    if isinstance(policy, Undercut):
        rivals = [view.level(op) for op in ctx.rival_operators]
        if not rivals:
            return current
        target = round_half_up((1 - policy.delta) * min(rivals))
        return max(policy.floor, target)
    # BestResponse: maximise (level - cost) x predicted minutes over the grid;
    # ties resolve to the lowest level.
    view_levels = view.as_dict()
    best_level = policy.grid[0]
    best_profit = None
    for level in policy.grid:
        minutes = _predict_minutes(ctx, view_levels, level)
        profit = (level - policy.cost) * minutes
        if best_profit is None or profit > best_profit:
            best_profit = profit
            best_level = level
    return best_level


# === discount negotiation ===


def propose_discount(
    visited_operator: str,
    counterparty: str,
    tiers: Sequence[Tier],
    *,
    requires_preferred: bool = True,
    active_from: int = 0,
) -> DiscountAgreement:
    """Draft a discount offer; preferred status is the default ask."""
    tiers = tuple(tiers)
    if not tiers:
        raise InvalidTiers("a discount offer needs at least one tier")
    seen = set()
    for tier in tiers:
        key = (tier.kind, tier.threshold)
        if key in seen:
            raise InvalidTiers(f"duplicate {tier.kind.value} threshold {tier.threshold}")
        seen.add(key)
    ordered = tuple(sorted(tiers, key=lambda t: (t.kind.value, t.threshold)))
    return DiscountAgreement(
        visited_operator=visited_operator,
        counterparty=counterparty,
        tiers=ordered,
        requires_preferred=requires_preferred,
        active_from=active_from,
    )


@dataclass(frozen=True)
class OtaInstruction:
    home_operator: str
    country: str
    new_list: Tuple[str, ...]


@dataclass
class OfferContext:
    """The accepting home operator's decision inputs."""

    country: str
    profile: SimProfile
    networks: Tuple[VisitedNetwork, ...]
    view_levels: Mapping[str, Money]
    retail: RetailScheme
    held_agreements: Tuple[DiscountAgreement, ...] = ()
    unit: Optional[str] = None


@dataclass
class OfferDecision:
    accepted: bool
    ota: Optional[OtaInstruction]
    current_cost: Optional[Fraction]
    offer_cost: Optional[Fraction]
    reason: str


def _held_rate(ctx: OfferContext, visited: str, head: Optional[str]) -> Fraction:
    home = ctx.profile.home_operator
    best = Fraction(0)
    for agreement in ctx.held_agreements:
        if agreement.visited_operator != visited:
            continue
        if agreement.counterparty not in (home, ctx.unit):
            continue
        if agreement.requires_preferred and head != visited:
            continue
        best = max(best, _best_volume_rate(agreement.tiers))
    return best


def _cost_index(
    ctx: OfferContext,
    listed: Tuple[str, ...],
    offer: Optional[DiscountAgreement],
) -> Optional[Fraction]:
    """Share-weighted effective per-minute wholesale cost under a list."""
    head = listed[0] if listed else None
    effective: Dict[str, Money] = {}
    for network in ctx.networks:
        op = network.operator
        rate = _held_rate(ctx, op, head)
        if offer is not None and op == offer.visited_operator:
            rate = max(rate, _best_volume_rate(offer.tiers))
        level = ctx.view_levels.get(op, 0)
        effective[op] = round_half_up(level * (1 - rate))
    prices = _retail_prices(ctx.retail, ctx.country, {op: ctx.view_levels.get(op, 0) for op in effective})
    profile = ctx.profile if listed == ctx.profile.preferred_list(ctx.country) else ctx.profile.with_preferred(ctx.country, listed)
    shares = expected_shares(profile, ctx.country, ctx.networks, prices)
    served = sum(shares.values())
    if served == 0:
        return None
    return sum(shares[op] * effective[op] for op in shares) / served


def evaluate_offer(
    home_operator: str,
    offer: DiscountAgreement,
    capability: bool,
    ctx: OfferContext,
) -> OfferDecision:
    """Accept a discount offer only on a strict predicted cost improvement.

    Acceptance moves the offering network to the list head (over the air);
    an offer from the incumbent head can still win on the discount alone.
    """
    if home_operator != ctx.profile.home_operator:
        raise ValueError("offer context belongs to a different home operator")
    if not capability:
        return OfferDecision(False, None, None, None, "steering capability off")
    current = ctx.profile.preferred_list(ctx.country)
    swapped = (offer.visited_operator,) + tuple(op for op in current if op != offer.visited_operator)
    current_cost = _cost_index(ctx, current, None)
    offer_cost = _cost_index(ctx, swapped, offer)
    if offer_cost is None:
        return OfferDecision(False, None, current_cost, offer_cost, "offer serves no mass")
    if current_cost is not None and offer_cost >= current_cost:
        return OfferDecision(False, None, current_cost, offer_cost, "no strict cost improvement")
    ota = None
    if swapped != current:
        ota = OtaInstruction(home_operator=home_operator, country=ctx.country, new_list=swapped)
    return OfferDecision(True, ota, current_cost, offer_cost, "strict cost improvement")


def enforce_nondiscrimination(
    agreements: Sequence[DiscountAgreement],
    flag: bool,
    *,
    partners_by_visited: Mapping[str, Sequence[str]],
    period: int,
) -> List[DiscountAgreement]:
    """Clone accepted tier schedules to every other counterparty.

    Returns the new clones only (active from the next period); callers merge.
    With the flag off this is a no-op.
    """
    if not flag:
        return []
    held = {(a.visited_operator, a.counterparty, a.tiers) for a in agreements}
    clones: List[DiscountAgreement] = []
    for agreement in agreements:
        partners = partners_by_visited.get(agreement.visited_operator, ())
        for partner in sorted(partners):
            if partner == agreement.counterparty:
                continue
            key = (agreement.visited_operator, partner, agreement.tiers)
            if key in held:
                continue
            held.add(key)
            clones.append(
                DiscountAgreement(
                    visited_operator=agreement.visited_operator,
                    counterparty=partner,
                    tiers=agreement.tiers,
                    requires_preferred=agreement.requires_preferred,
                    active_from=period + 1,
                )
            )
    return clones
