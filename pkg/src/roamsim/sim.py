"""Market engine: periods of pricing, steering, traffic, rating, settlement.

Each period runs a fixed phase order so two runs of the same scenario and
seed produce identical output byte for byte:

1. exogenous state (coverage, handset mix, steering capability) moves;
2. wholesale strategy: every operator resets its headline IOT level
   simultaneously from last period's observed levels, then discount offers
   go out, get evaluated in sorted order, non-discrimination clones spread,
   and accepted steering reprogrammes SIM preferred lists over the air;
3. the period's retail price table is derived from the new headline levels;
4. roamers' perceived prices come from the previous period's bills;
5. demand volumes and network shares follow;
6. traffic is generated, rated and settled, and wholesale invoices are cut;
7. per-country metrics are computed.

All money stays in integer micro-units; shares and minutes stay exact
Fractions until export.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .demand import Cdr, Mode, generate_calls, perceived_price, roaming_volume
from .money import Money, round_half_up
from .scenario import Scenario
from .selection import SimProfile, expected_shares, ota_reprogram
from .settlement import (
    ConservationReport,
    DiscountAgreement,
    Invoice,
    InvoiceContext,
    LedgerEntry,
    build_invoices,
    settle_mo_aggregate,
    settle_mo_call,
    settle_mt_aggregate,
    settle_mt_call,
    verify_conservation,
)
from .strategy import (
    HomeMarket,
    InfoCentreView,
    OfferContext,
    StrategyContext,
    _retail_prices,
    decide_iot,
    enforce_nondiscrimination,
    evaluate_offer,
    propose_discount,
)
from .tariff import (
    CallDescriptor,
    Direction,
    IotSchedule,
    rate_retail_mo,
    rate_retail_mo_aggregate,
    rate_retail_mt,
    rate_retail_mt_aggregate,
    rate_wholesale_mo,
    rate_wholesale_mo_aggregate,
    rate_wholesale_mt,
    rate_wholesale_mt_aggregate,
)


@dataclass(frozen=True)
class OtaEvent:
    period: int
    home_operator: str
    country: str
    new_list: Tuple[str, ...]


@dataclass(frozen=True)
class NegotiationRecord:
    period: int
    visited_operator: str
    counterparty: str
    decision: str  # offer / accept / reject / clone
    tier_rate: Fraction
    requires_preferred: bool
    reason: str = ""


@dataclass(frozen=True)
class MetricsRow:
    period: int
    country: str
    operator: str
    wholesale_share: Fraction
    cr2: Optional[Fraction]
    avg_retail: Optional[Fraction]
    ratio_vs_benchmark: Optional[Fraction]
    wholesale_revenue: Money
    wholesale_profit: Money
    min_headline: Money


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    metrics: List[MetricsRow]
    ledger: List[LedgerEntry]
    cdrs: List[Cdr]
    invoices: List[Invoice]
    negotiation: List[NegotiationRecord]
    ota_events: List[OtaEvent]
    agreements: List[DiscountAgreement]
    headline_history: List[Dict[str, Money]]
    conservation: List[ConservationReport]
    volumes: Dict[Tuple[int, str, str], int]
    shares: Dict[Tuple[int, str, str], Dict[str, Fraction]]
    op_minutes: Dict[Tuple[int, str], Fraction]

    def min_headline(self, period: int, country: str) -> Money:
        levels = self.headline_history[period]
        return min(
            levels[op.id] for op in self.scenario.operators.values() if op.country == country
        )

    def metrics_for(self, period: int, country: str, operator: str) -> MetricsRow:
        for row in self.metrics:
            if (row.period, row.country, row.operator) == (period, country, operator):
                return row
        raise KeyError((period, country, operator))


class _ScheduleCache:
    """Effective wholesale schedules per headline level.

    The headline level is a per-minute index over the operator's declared
    schedule; moving it rescales every zone rate, setup fee and MT rate
    proportionally.
    """

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        self._cache: Dict[Tuple[str, Money], IotSchedule] = {}

    def at_level(self, operator: str, level: Money) -> IotSchedule:
        key = (operator, level)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        base = self.scenario.tariffs[operator]
        declared = self.scenario.headlines[operator]
        schedule = base if level == declared else base.scaled(Fraction(level, declared))
        self._cache[key] = schedule
        return schedule


def _current_profile(
    scenario: Scenario,
    overrides: Mapping[Tuple[str, str], Tuple[str, ...]],
    home_operator: str,
    period: int,
) -> SimProfile:
    profile = scenario.profiles[home_operator].profile_at(period)
    for (home, country), new_list in sorted(overrides.items()):
        if home == home_operator:
            profile = profile.with_preferred(country, new_list)
    return profile


def run(scenario: Scenario, seed: Optional[int] = None) -> RunResult:
    """Simulate the scenario over its horizon."""
    seed = scenario.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    schedules = _ScheduleCache(scenario)
    home_ops = scenario.home_operators()
    unit_of = {op: scenario.unit_of(op) for op in scenario.operators}
    unit_members = scenario.unit_members()
    op_country = {op.id: op.country for op in scenario.operators.values()}

    headline: Dict[str, Money] = dict(scenario.headlines)
    headline_history: List[Dict[str, Money]] = []
    agreements: List[DiscountAgreement] = []
    list_overrides: Dict[Tuple[str, str], Tuple[str, ...]] = {}
    price_history: Optional[Dict[Tuple[str, str], Tuple[Money, Fraction]]] = None
    prev_pair_minutes: Dict[Tuple[str, str], int] = {}

    metrics: List[MetricsRow] = []
    ledger: List[LedgerEntry] = []
    cdrs: List[Cdr] = []
    invoices: List[Invoice] = []
    negotiation: List[NegotiationRecord] = []
    ota_events: List[OtaEvent] = []
    conservation: List[ConservationReport] = []
    volumes: Dict[Tuple[int, str, str], int] = {}
    shares_out: Dict[Tuple[int, str, str], Dict[str, Fraction]] = {}
    op_minutes_out: Dict[Tuple[int, str], Fraction] = {}

    for t in range(scenario.horizon):
        # --- 1. exogenous state
        networks = {c: scenario.networks_at(c, t) for c in sorted(scenario.countries)}
        steering_now = {h: scenario.steering_active(h, t) for h in home_ops}
        profiles = {
            h: _current_profile(scenario, list_overrides, h, t) for h in home_ops
        }

        # --- 2. wholesale strategy (simultaneous moves from lagged views)
        lagged = dict(scenario.headlines) if t == 0 else headline_history[t - 1]
        markets_by_country: Dict[str, List[HomeMarket]] = {}
        for home in home_ops:
            for country in scenario.visited_countries_of(home):
                markets_by_country.setdefault(country, []).append(
                    HomeMarket(
                        profile=profiles[home],
                        params=scenario.demand[(home, country)],
                        retail=scenario.retail[home],
                        steering_active=steering_now[home],
                    )
                )
        new_levels: Dict[str, Money] = {}
        for op_id in sorted(scenario.operators):
            op = scenario.operators[op_id]
            policy = scenario.policy_for(op_id).iot
            view = InfoCentreView(
                observer=op_id, period=t, levels=tuple(sorted(lagged.items()))
            )
            ctx = StrategyContext(
                operator=op_id,
                country=op.country,
                networks=networks[op.country],
                rival_operators=tuple(
                    sorted(o.id for o in scenario.operators_in(op.country) if o.id != op_id)
                ),
                home_markets=tuple(markets_by_country.get(op.country, ())),
                own_agreements=tuple(
                    a for a in agreements if a.visited_operator == op_id and a.active_from <= t
                ),
                unit_of=unit_of,
            )
            new_levels[op_id] = decide_iot(policy, view, ctx)
        headline = new_levels
        headline_history.append(dict(headline))

        # --- 2b. discount offers, evaluated in sorted order on lagged views
        offers: List[DiscountAgreement] = []
        for op_id in sorted(scenario.operators):
            discount = scenario.policy_for(op_id).discount
            if discount is None:
                continue
            country = op_country[op_id]
            counterparties = sorted(
                {
                    unit_of[home]
                    for home in home_ops
                    if (home, country) in scenario.demand
                }
            )
            for counterparty in counterparties:
                already = any(
                    a.visited_operator == op_id
                    and a.counterparty == counterparty
                    and a.tiers == discount.tiers
                    and a.requires_preferred == discount.requires_preferred
                    for a in agreements
                )
                if already:
                    continue
                offer = propose_discount(
                    op_id,
                    counterparty,
                    discount.tiers,
                    requires_preferred=discount.requires_preferred,
                    active_from=t,
                )
                offers.append(offer)
                negotiation.append(
                    NegotiationRecord(
                        period=t,
                        visited_operator=op_id,
                        counterparty=counterparty,
                        decision="offer",
                        tier_rate=max(tier.rate for tier in offer.tiers),
                        requires_preferred=offer.requires_preferred,
                    )
                )

        ota_done: set = set()
        for offer in sorted(offers, key=lambda o: (o.visited_operator, o.counterparty)):
            country = op_country[offer.visited_operator]
            members = unit_members.get(offer.counterparty, (offer.counterparty,))
            accepted = False
            for home in sorted(members):
                if (home, country) not in scenario.demand:
                    continue
                decision = evaluate_offer(
                    home,
                    offer,
                    steering_now[home],
                    OfferContext(
                        country=country,
                        profile=profiles[home],
                        networks=networks[country],
                        view_levels=lagged,
                        retail=scenario.retail[home],
                        held_agreements=tuple(
                            a for a in agreements if a.active_from <= t
                        ),
                        unit=unit_of[home],
                    ),
                )
                if decision.accepted and decision.ota is not None and (home, country) in ota_done:
                    negotiation.append(
                        NegotiationRecord(
                            period=t,
                            visited_operator=offer.visited_operator,
                            counterparty=offer.counterparty,
                            decision="reject",
                            tier_rate=max(tier.rate for tier in offer.tiers),
                            requires_preferred=offer.requires_preferred,
                            reason="preferred list already changed this period",
                        )
                    )
                    continue
                negotiation.append(
                    NegotiationRecord(
                        period=t,
                        visited_operator=offer.visited_operator,
                        counterparty=offer.counterparty,
                        decision="accept" if decision.accepted else "reject",
                        tier_rate=max(tier.rate for tier in offer.tiers),
                        requires_preferred=offer.requires_preferred,
                        reason=decision.reason,
                    )
                )
                if not decision.accepted:
                    continue
                if not accepted:
                    agreements.append(offer)
                    accepted = True
                if decision.ota is not None:
                    profiles[home] = ota_reprogram(
                        profiles[home],
                        country,
                        decision.ota.new_list,
                        steering_enabled=steering_now[home],
                    )
                    list_overrides[(home, country)] = decision.ota.new_list
                    ota_done.add((home, country))
                    ota_events.append(
                        OtaEvent(
                            period=t,
                            home_operator=home,
                            country=country,
                            new_list=decision.ota.new_list,
                        )
                    )

        # --- 2c. regulatory spread of accepted tier schedules
        partners_by_visited = {
            op_id: sorted(
                {
                    unit_of[home]
                    for home in home_ops
                    if (home, op_country[op_id]) in scenario.demand
                }
            )
            for op_id in scenario.operators
        }
        clones = enforce_nondiscrimination(
            agreements,
            scenario.nondiscrimination,
            partners_by_visited=partners_by_visited,
            period=t,
        )
        for clone in clones:
            agreements.append(clone)
            negotiation.append(
                NegotiationRecord(
                    period=t,
                    visited_operator=clone.visited_operator,
                    counterparty=clone.counterparty,
                    decision="clone",
                    tier_rate=max(tier.rate for tier in clone.tiers),
                    requires_preferred=clone.requires_preferred,
                    reason="non-discrimination",
                )
            )

        # --- 3. retail price tables under the new headline levels
        price_tables: Dict[Tuple[str, str], Dict[str, Money]] = {}
        for home in home_ops:
            for country in scenario.visited_countries_of(home):
                levels = {n.operator: headline[n.operator] for n in networks[country]}
                price_tables[(home, country)] = _retail_prices(
                    scenario.retail[home], country, levels
                )

        # --- 4 + 5. perceived prices, volumes, shares
        period_cdrs: List[Cdr] = []
        seq = 0
        share_table: Dict[Tuple[str, str], Dict[str, Fraction]] = {}
        for home in home_ops:
            home_country = scenario.operators[home].country
            for country in scenario.visited_countries_of(home):
                params = scenario.demand[(home, country)]
                perceived = perceived_price(
                    price_history, home, country, params.reference_price
                )
                volume = roaming_volume(params, perceived)
                shares = expected_shares(
                    profiles[home],
                    country,
                    networks[country],
                    price_tables[(home, country)],
                )
                volumes[(t, home, country)] = volume
                shares_out[(t, home, country)] = dict(shares)
                share_table[(home, country)] = shares
                generated, seq = generate_calls(
                    home,
                    home_country,
                    country,
                    volume,
                    shares,
                    params,
                    rng,
                    scenario.mode,
                    period=t,
                    seq_start=seq,
                )
                period_cdrs.extend(generated)

        # --- 6. rating and settlement
        period_entries: List[LedgerEntry] = []
        mo_retail: Dict[str, Money] = {}
        mo_minutes: Dict[str, Fraction] = {}
        op_minutes: Dict[str, Fraction] = {}
        pair_minutes_exact: Dict[Tuple[str, str], Fraction] = {}
        for cdr in period_cdrs:
            visited = cdr.visited_operator
            schedule = schedules.at_level(visited, headline[visited])
            zones = scenario.zone_maps[visited]
            retail_scheme = scenario.retail[cdr.home_operator]
            if scenario.mode is Mode.EXPECTED:
                if cdr.direction is Direction.MO:
                    cdr.zone = zones.zone_for(cdr.destination)
                    wholesale = rate_wholesale_mo_aggregate(
                        schedule,
                        zones,
                        cdr.destination,
                        cdr.period_class,
                        cdr.minutes,
                        cdr.calls,
                    )
                    retail_charge = rate_retail_mo_aggregate(
                        retail_scheme, wholesale, cdr.visited_country, cdr.minutes
                    )
                    entries = settle_mo_aggregate(
                        home_operator=cdr.home_operator,
                        visited_operator=visited,
                        visited_country=cdr.visited_country,
                        destination=cdr.destination,
                        minutes=cdr.minutes,
                        iot_charge=wholesale,
                        retail_charge=retail_charge,
                        transit=scenario.transit,
                        call_id=cdr.call_id,
                        period=t,
                    )
                else:
                    wholesale = rate_wholesale_mt_aggregate(schedule, cdr.minutes)
                    retail_charge = rate_retail_mt_aggregate(
                        retail_scheme, cdr.visited_country, cdr.minutes
                    )
                    entries = settle_mt_aggregate(
                        home_operator=cdr.home_operator,
                        visited_operator=visited,
                        home_country=cdr.home_country,
                        visited_country=cdr.visited_country,
                        minutes=cdr.minutes,
                        iot_mt_charge=wholesale,
                        retail_mt_charge=retail_charge,
                        transit=scenario.transit,
                        call_id=cdr.call_id,
                        period=t,
                    )
            else:
                call = CallDescriptor(
                    direction=cdr.direction,
                    home_operator=cdr.home_operator,
                    visited_operator=visited,
                    home_country=cdr.home_country,
                    visited_country=cdr.visited_country,
                    period_class=cdr.period_class,
                    duration_s=int(cdr.duration_s),
                    destination=cdr.destination,
                )
                if cdr.direction is Direction.MO:
                    cdr.zone = zones.zone_for(cdr.destination)
                    wholesale = rate_wholesale_mo(schedule, zones, call)
                    retail_charge = rate_retail_mo(retail_scheme, wholesale, call)
                    entries = settle_mo_call(
                        call,
                        wholesale,
                        retail_charge,
                        scenario.transit,
                        call_id=cdr.call_id,
                        period=t,
                    )
                else:
                    wholesale = rate_wholesale_mt(schedule, call)
                    retail_charge = rate_retail_mt(retail_scheme, call)
                    entries = settle_mt_call(
                        call,
                        wholesale,
                        retail_charge,
                        scenario.transit,
                        call_id=cdr.call_id,
                        period=t,
                    )
            period_entries.extend(entries)
            country = cdr.visited_country
            op_minutes[visited] = op_minutes.get(visited, Fraction(0)) + cdr.minutes
            pair_key = (visited, cdr.home_operator)
            pair_minutes_exact[pair_key] = (
                pair_minutes_exact.get(pair_key, Fraction(0)) + cdr.minutes
            )
            if cdr.direction is Direction.MO:
                mo_retail[country] = mo_retail.get(country, 0) + retail_charge
                mo_minutes[country] = mo_minutes.get(country, Fraction(0)) + cdr.minutes

        pair_minutes = {
            key: round_half_up(value) for key, value in pair_minutes_exact.items()
        }
        preferred_head: Dict[Tuple[str, str], str] = {}
        for home in home_ops:
            for country in scenario.visited_countries_of(home):
                listed = profiles[home].preferred_list(country)
                if listed:
                    preferred_head[(home, country)] = listed[0]
        context = InvoiceContext(
            pair_minutes=pair_minutes,
            prev_pair_minutes=prev_pair_minutes,
            unit_of={op: unit for op, unit in unit_of.items() if unit != op},
            unit_members=unit_members,
            preferred_head=preferred_head,
            op_country=op_country,
        )
        period_invoices = build_invoices(
            period_entries,
            t,
            tuple(a for a in agreements if a.active_from <= t),
            context,
        )
        report = verify_conservation(period_entries)
        conservation.append(report)

        # --- 7. metrics
        net_by_issuer: Dict[str, Money] = {}
        for invoice in period_invoices:
            net_by_issuer[invoice.issuer] = (
                net_by_issuer.get(invoice.issuer, 0) + invoice.net
            )
        transit_paid: Dict[str, Money] = {}
        for entry in period_entries:
            if entry.role == "fixed-transit":
                transit_paid[entry.payer] = (
                    transit_paid.get(entry.payer, 0) + entry.amount
                )
        for country in sorted(scenario.countries):
            ops = sorted(o.id for o in scenario.operators_in(country))
            total = sum((op_minutes.get(op, Fraction(0)) for op in ops), Fraction(0))
            min_level = min(headline[op] for op in ops)
            country_shares = {
                op: (op_minutes.get(op, Fraction(0)) / total if total > 0 else Fraction(0))
                for op in ops
            }
            cr2 = (
                sum(sorted(country_shares.values(), reverse=True)[:2])
                if total > 0
                else None
            )
            retail_total = mo_retail.get(country, 0)
            minutes_mo = mo_minutes.get(country, Fraction(0))
            avg_retail = Fraction(retail_total) / minutes_mo if minutes_mo > 0 else None
            ratio = (
                avg_retail / scenario.benchmarks[country]
                if avg_retail is not None
                else None
            )
            for op in ops:
                minutes_op = op_minutes.get(op, Fraction(0))
                cost = round_half_up(
                    scenario.operators[op].wholesale_cost * minutes_op
                )
                revenue = net_by_issuer.get(op, 0)
                metrics.append(
                    MetricsRow(
                        period=t,
                        country=country,
                        operator=op,
                        wholesale_share=country_shares[op],
                        cr2=cr2,
                        avg_retail=avg_retail,
                        ratio_vs_benchmark=ratio,
                        wholesale_revenue=revenue,
                        wholesale_profit=revenue - transit_paid.get(op, 0) - cost,
                        min_headline=min_level,
                    )
                )
                op_minutes_out[(t, op)] = op_minutes.get(op, Fraction(0))

        # --- period state rollover
        ledger.extend(period_entries)
        cdrs.extend(period_cdrs)
        invoices.extend(period_invoices)
        prev_pair_minutes = pair_minutes
        price_history = _pair_price_history(period_entries, period_cdrs)

    return RunResult(
        scenario=scenario,
        seed=seed,
        metrics=metrics,
        ledger=ledger,
        cdrs=cdrs,
        invoices=invoices,
        negotiation=negotiation,
        ota_events=ota_events,
        agreements=agreements,
        headline_history=headline_history,
        conservation=conservation,
        volumes=volumes,
        shares=shares_out,
        op_minutes=op_minutes_out,
    )


def _pair_price_history(
    entries: List[LedgerEntry], period_cdrs: List[Cdr]
) -> Dict[Tuple[str, str], Tuple[Money, Fraction]]:
    """Next period's perceived-price inputs: MO retail total and minutes per pair."""
    retail_by_call: Dict[str, Money] = {}
    for entry in entries:
        if entry.role == "retail" and entry.payer.startswith("sub:"):
            retail_by_call[entry.call_ref] = entry.amount
    history: Dict[Tuple[str, str], Tuple[Money, Fraction]] = {}
    for cdr in period_cdrs:
        if cdr.direction is not Direction.MO:
            continue
        key = (cdr.home_operator, cdr.visited_country)
        charge_total, minute_total = history.get(key, (0, Fraction(0)))
        history[key] = (
            charge_total + retail_by_call.get(cdr.call_id, 0),
            minute_total + cdr.minutes,
        )
    return history


# === the customer-ignorance experiment ===


class ExperimentPreconditionViolated(Exception):
    """The scenario has features that would confound the paired comparison."""


@dataclass
class ExperimentReport:
    target: str
    delta: Fraction
    baseline: RunResult
    treated: RunResult
    max_share_delta: Fraction
    minutes_by_period: List[Tuple[int, int, int]]  # (period, baseline, treated)
    profit_delta: Dict[str, Money]

    @property
    def shares_invariant(self) -> bool:
        return self.max_share_delta == 0


def externality_experiment(
    scenario: Scenario,
    target: str,
    delta: Fraction,
    seed: Optional[int] = None,
) -> ExperimentReport:
    """Paired runs isolating the demand externality of one wholesale cut.

    The treated run lowers the target operator's headline IOT by `delta`
    from period 0 onward and keeps everything else (including the seed)
    fixed.  Steering and manual selection would move shares and confound
    the comparison, so they must be off.
    """
    if target not in scenario.operators:
        raise ValueError(f"unknown target operator {target!r}")
    if not Fraction(0) <= delta < 1:
        raise ValueError("delta must be in [0, 1)")
    for op, start in scenario.steering_active_from.items():
        if start < scenario.horizon:
            raise ExperimentPreconditionViolated(
                f"steering becomes active for {op} at {start}; turn it off"
            )
    for spec in scenario.profiles.values():
        if spec.manual_propensity != 0:
            raise ExperimentPreconditionViolated(
                f"{spec.home_operator} has manual selection mass; turn it off"
            )
    baseline = run(scenario, seed=seed)
    # The cut rewrites the target's declared price list, so the headline and
    # the zone rates stay proportional to each other.
    cut_level = round_half_up((1 - delta) * scenario.headlines[target])
    treated_scenario = dataclasses.replace(
        scenario,
        headlines={**scenario.headlines, target: cut_level},
        tariffs={
            **scenario.tariffs,
            target: scenario.tariffs[target].scaled(1 - delta),
        },
    )
    treated = run(treated_scenario, seed=seed)

    max_share_delta = Fraction(0)
    for key, base_shares in baseline.shares.items():
        treat_shares = treated.shares[key]
        for op in base_shares:
            gap = abs(base_shares[op] - treat_shares[op])
            if gap > max_share_delta:
                max_share_delta = gap

    target_country = scenario.operators[target].country
    minutes_by_period: List[Tuple[int, int, int]] = []
    for t in range(scenario.horizon):
        base_total = sum(
            v for (p, _, c), v in baseline.volumes.items() if p == t and c == target_country
        )
        treat_total = sum(
            v for (p, _, c), v in treated.volumes.items() if p == t and c == target_country
        )
        minutes_by_period.append((t, base_total, treat_total))

    profit_delta: Dict[str, Money] = {}
    for op in sorted(o.id for o in scenario.operators_in(target_country)):
        base_profit = sum(
            row.wholesale_profit for row in baseline.metrics if row.operator == op
        )
        treat_profit = sum(
            row.wholesale_profit for row in treated.metrics if row.operator == op
        )
        profit_delta[op] = treat_profit - base_profit

    return ExperimentReport(
        target=target,
        delta=delta,
        baseline=baseline,
        treated=treated,
        max_share_delta=max_share_delta,
        minutes_by_period=minutes_by_period,
        profit_delta=profit_delta,
    )
