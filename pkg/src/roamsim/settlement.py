"""Inter-operator settlement chains, invoices and conservation audit.

Every rated call expands into a chain of ledger entries, one per money flow:

MO (subscriber roams in A, calls into B):
  sub -> home op        retail
  home op -> visited op iot-mo
  visited op -> visited fixed   fixed-transit (transit + recovered termination)
  visited fixed -> destination fixed  fixed-termination (cross-border only)

MT (someone at home calls the roamer):
  caller -> home fixed          retail (international call price)
  home fixed -> visited fixed   fixed-transit (transit + recovered mt-termination)
  visited fixed -> visited op   mt-termination
  sub -> home op                retail (MT retail price)
  home op -> visited op         iot-mt (only when the schedule prices MT)

Amounts are integer micro-units; each entry names payer and payee, so the
global debit and credit totals agree by construction and the audit instead
checks chain completeness per call.

Invoices aggregate the wholesale legs per (visited op, home op) and apply
the best qualifying discount tier, with volumes pooled at group level for
pan-European groups and brokers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple

from .money import Money, round_half_up, scale_money
from .tariff import CallDescriptor, Destination, Direction, billed_minutes

ROLE_RETAIL = "retail"
ROLE_IOT_MO = "iot-mo"
ROLE_IOT_MT = "iot-mt"
ROLE_FIXED_TRANSIT = "fixed-transit"
ROLE_FIXED_TERMINATION = "fixed-termination"
ROLE_MT_TERMINATION = "mt-termination"

ROLES = (
    ROLE_RETAIL,
    ROLE_IOT_MO,
    ROLE_IOT_MT,
    ROLE_FIXED_TRANSIT,
    ROLE_FIXED_TERMINATION,
    ROLE_MT_TERMINATION,
)


class OverlappingTiers(Exception):
    """Two discount tiers of the same kind share a threshold."""


def subscriber_party(home_operator: str) -> str:
    """Aggregated subscriber pool of one home operator."""
    return f"sub:{home_operator}"


def public_caller_party(country: str) -> str:
    """Aggregated fixed-network callers of one country (MT originators)."""
    return f"pub:{country}"


@dataclass(frozen=True)
class LedgerEntry:
    period: int
    call_ref: str
    payer: str
    payee: str
    role: str
    amount: Money

    def __post_init__(self) -> None:
        if self.amount < 0:
            raise ValueError("ledger amounts must be >= 0")
        if self.payer == self.payee:
            raise ValueError("payer and payee must differ")
        if self.role not in ROLES:
            raise ValueError(f"unknown settlement role {self.role!r}")


@dataclass(frozen=True)
class CountryTransit:
    """Fixed-network charges of one country, micro-units per minute."""

    country: str
    fixed_operator: str
    transit: Money
    fixed_termination: Money
    mt_termination: Money
    intl_retail: Money


@dataclass(frozen=True)
class TransitTariff:
    entries: Tuple[CountryTransit, ...]

    @classmethod
    def from_entries(cls, entries: Iterable[CountryTransit]) -> "TransitTariff":
        return cls(entries=tuple(sorted(entries, key=lambda e: e.country)))

    def for_country(self, country: str) -> CountryTransit:
        for entry in self.entries:
            if entry.country == country:
                return entry
        raise ValueError(f"no transit entry for country {country!r}")


# === settlement chains ===


def _mo_chain(
    *,
    period: int,
    call_ref: str,
    home_operator: str,
    visited_operator: str,
    visited_fixed: str,
    destination_fixed: Optional[str],
    retail_charge: Money,
    iot_charge: Money,
    transit_amount: Money,
    termination_amount: Money,
) -> List[LedgerEntry]:
    entries = [
        LedgerEntry(period, call_ref, subscriber_party(home_operator), home_operator, ROLE_RETAIL, retail_charge),
        LedgerEntry(period, call_ref, home_operator, visited_operator, ROLE_IOT_MO, iot_charge),
        LedgerEntry(
            period,
            call_ref,
            visited_operator,
            visited_fixed,
            ROLE_FIXED_TRANSIT,
            transit_amount + termination_amount,
        ),
    ]
    if destination_fixed is not None:
        entries.append(
            LedgerEntry(period, call_ref, visited_fixed, destination_fixed, ROLE_FIXED_TERMINATION, termination_amount)
        )
    return entries


def settle_mo_call(
    call: CallDescriptor,
    iot_charge: Money,
    retail_charge: Money,
    transit: TransitTariff,
    *,
    call_id: str,
    period: int,
) -> List[LedgerEntry]:
    """Expand one MO call into its settlement chain.

    The visited fixed operator recovers the destination-side termination
    inside the transit leg; calls terminating inside the visited country
    skip the cross-border termination entry.
    """
    if call.direction is not Direction.MO or call.destination is None:
        raise ValueError("settle_mo_call wants an MO call with a destination")
    minutes = billed_minutes(call.duration_s)
    visited = transit.for_country(call.visited_country)
    domestic = call.destination.country == call.visited_country
    if domestic:
        destination_fixed = None
        termination_amount = 0
    else:
        dest = transit.for_country(call.destination.country)
        destination_fixed = dest.fixed_operator
        termination_amount = dest.fixed_termination * minutes
    return _mo_chain(
        period=period,
        call_ref=call_id,
        home_operator=call.home_operator,
        visited_operator=call.visited_operator,
        visited_fixed=visited.fixed_operator,
        destination_fixed=destination_fixed,
        retail_charge=retail_charge,
        iot_charge=iot_charge,
        transit_amount=visited.transit * minutes,
        termination_amount=termination_amount,
    )


def settle_mo_aggregate(
    *,
    home_operator: str,
    visited_operator: str,
    visited_country: str,
    destination: Destination,
    minutes: Fraction,
    iot_charge: Money,
    retail_charge: Money,
    transit: TransitTariff,
    call_id: str,
    period: int,
) -> List[LedgerEntry]:
    """Expected-mode variant of settle_mo_call over fractional minutes."""
    visited = transit.for_country(visited_country)
    domestic = destination.country == visited_country
    if domestic:
        destination_fixed = None
        termination_amount = 0
    else:
        dest = transit.for_country(destination.country)
        destination_fixed = dest.fixed_operator
        termination_amount = round_half_up(dest.fixed_termination * minutes)
    return _mo_chain(
        period=period,
        call_ref=call_id,
        home_operator=home_operator,
        visited_operator=visited_operator,
        visited_fixed=visited.fixed_operator,
        destination_fixed=destination_fixed,
        retail_charge=retail_charge,
        iot_charge=iot_charge,
        transit_amount=round_half_up(visited.transit * minutes),
        termination_amount=termination_amount,
    )


def _mt_chain(
    *,
    period: int,
    call_ref: str,
    home_operator: str,
    visited_operator: str,
    home_country: str,
    home_fixed: str,
    visited_fixed: str,
    caller_charge: Money,
    transit_amount: Money,
    mt_termination_amount: Money,
    retail_mt_charge: Money,
    iot_mt_charge: Money,
) -> List[LedgerEntry]:
    entries = [
        LedgerEntry(period, call_ref, public_caller_party(home_country), home_fixed, ROLE_RETAIL, caller_charge),
        LedgerEntry(
            period,
            call_ref,
            home_fixed,
            visited_fixed,
            ROLE_FIXED_TRANSIT,
            transit_amount + mt_termination_amount,
        ),
        LedgerEntry(period, call_ref, visited_fixed, visited_operator, ROLE_MT_TERMINATION, mt_termination_amount),
        LedgerEntry(period, call_ref, subscriber_party(home_operator), home_operator, ROLE_RETAIL, retail_mt_charge),
    ]
    if iot_mt_charge > 0:
        entries.append(
            LedgerEntry(period, call_ref, home_operator, visited_operator, ROLE_IOT_MT, iot_mt_charge)
        )
    return entries


def settle_mt_call(
    call: CallDescriptor,
    iot_mt_charge: Money,
    retail_mt_charge: Money,
    transit: TransitTariff,
    *,
    call_id: str,
    period: int,
) -> List[LedgerEntry]:
    """Expand one MT call (caller in the home country) into its chain."""
    if call.direction is not Direction.MT:
        raise ValueError("settle_mt_call wants an MT call")
    minutes = billed_minutes(call.duration_s)
    home = transit.for_country(call.home_country)
    visited = transit.for_country(call.visited_country)
    return _mt_chain(
        period=period,
        call_ref=call_id,
        home_operator=call.home_operator,
        visited_operator=call.visited_operator,
        home_country=call.home_country,
        home_fixed=home.fixed_operator,
        visited_fixed=visited.fixed_operator,
        caller_charge=home.intl_retail * minutes,
        transit_amount=visited.transit * minutes,
        mt_termination_amount=visited.mt_termination * minutes,
        retail_mt_charge=retail_mt_charge,
        iot_mt_charge=iot_mt_charge,
    )


def settle_mt_aggregate(
    *,
    home_operator: str,
    visited_operator: str,
    home_country: str,
    visited_country: str,
    minutes: Fraction,
    iot_mt_charge: Money,
    retail_mt_charge: Money,
    transit: TransitTariff,
    call_id: str,
    period: int,
) -> List[LedgerEntry]:
    """Expected-mode variant of settle_mt_call over fractional minutes."""
    home = transit.for_country(home_country)
    visited = transit.for_country(visited_country)
    return _mt_chain(
        period=period,
        call_ref=call_id,
        home_operator=home_operator,
        visited_operator=visited_operator,
        home_country=home_country,
        home_fixed=home.fixed_operator,
        visited_fixed=visited.fixed_operator,
        caller_charge=round_half_up(home.intl_retail * minutes),
        transit_amount=round_half_up(visited.transit * minutes),
        mt_termination_amount=round_half_up(visited.mt_termination * minutes),
        retail_mt_charge=retail_mt_charge,
        iot_mt_charge=iot_mt_charge,
    )


# === discount agreements and invoices ===


class TierKind(str, enum.Enum):
    VOLUME = "volume"
    GROWTH = "growth"


@dataclass(frozen=True)
class Tier:
    """One discount step: rate applies when the threshold is met.

    Volume tiers threshold on period minutes; growth tiers on the
    period-over-period minute growth fraction.
    """

    kind: TierKind
    threshold: Fraction
    rate: Fraction

    def __post_init__(self) -> None:
        if not (0 <= self.rate < 1):
            raise ValueError("tier rate must be in [0, 1)")
        if self.threshold < 0:
            raise ValueError("tier threshold must be >= 0")


@dataclass(frozen=True)
class DiscountAgreement:
    visited_operator: str
    counterparty: str
    tiers: Tuple[Tier, ...]
    requires_preferred: bool = True
    active_from: int = 0


@dataclass(frozen=True)
class Invoice:
    issuer: str
    counterparty: str
    period: int
    gross: Money
    discount_applied: Money
    net: Money
    minutes: int
    entry_refs: Tuple[str, ...] = ()


@dataclass
class InvoiceContext:
    """Side information invoicing needs beyond the ledger itself.

    pair_minutes carries roamed minutes per (visited op, home op) for the
    invoiced period; prev_pair_minutes the same for the period before (growth
    tiers).  unit_of maps a home op to its group/broker id when it has one,
    unit_members the reverse.  preferred_head tells which network heads a home
    op's preferred list per country, for agreements conditioned on preferred
    status.  op_country locates the visited operator.
    """

    pair_minutes: Mapping[Tuple[str, str], int] = field(default_factory=dict)
    prev_pair_minutes: Mapping[Tuple[str, str], int] = field(default_factory=dict)
    unit_of: Mapping[str, str] = field(default_factory=dict)
    unit_members: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)
    preferred_head: Mapping[Tuple[str, str], str] = field(default_factory=dict)
    op_country: Mapping[str, str] = field(default_factory=dict)


def _check_tiers(agreement: DiscountAgreement) -> None:
    seen = set()
    for tier in agreement.tiers:
        key = (tier.kind, tier.threshold)
        if key in seen:
            raise OverlappingTiers(
                f"{agreement.visited_operator}->{agreement.counterparty}: "
                f"duplicate {tier.kind.value} threshold {tier.threshold}"
            )
        seen.add(key)


def _eligibility_minutes(
    visited: str,
    home: str,
    agreement: DiscountAgreement,
    context: InvoiceContext,
    previous: bool = False,
) -> int:
    table = context.prev_pair_minutes if previous else context.pair_minutes
    members: Sequence[str]
    if agreement.counterparty in context.unit_members:
        members = context.unit_members[agreement.counterparty]
    else:
        members = (home,)
    return sum(table.get((visited, member), 0) for member in members)


def _best_rate(
    visited: str,
    home: str,
    period: int,
    agreements: Sequence[DiscountAgreement],
    context: InvoiceContext,
) -> Fraction:
    unit = context.unit_of.get(home)
    best = Fraction(0)
    for agreement in agreements:
        if agreement.visited_operator != visited:
            continue
        if agreement.counterparty not in (home, unit):
            continue
        if period < agreement.active_from:
            continue
        if agreement.requires_preferred:
            country = context.op_country.get(visited)
            if country is None or context.preferred_head.get((home, country)) != visited:
                continue
        _check_tiers(agreement)
        minutes = _eligibility_minutes(visited, home, agreement, context)
        prev = _eligibility_minutes(visited, home, agreement, context, previous=True)
        for tier in agreement.tiers:
            if tier.kind is TierKind.VOLUME:
                qualifies = minutes >= tier.threshold
            else:
                # Growth has no baseline in the first period or from zero.
                if period == 0 or prev == 0:
                    qualifies = False
                else:
                    qualifies = Fraction(minutes, prev) - 1 >= tier.threshold
            if qualifies and tier.rate > best:
                best = tier.rate
    return best


def build_invoices(
    entries: Sequence[LedgerEntry],
    period: int,
    agreements: Sequence[DiscountAgreement] = (),
    context: Optional[InvoiceContext] = None,
) -> List[Invoice]:
    """Aggregate the period's wholesale legs into per-pair invoices.

    The best qualifying tier across all applicable agreements discounts the
    gross; group- and broker-targeted agreements pool member minutes for
    eligibility while each member still receives its own invoice.
    """
    context = context or InvoiceContext()
    buckets: dict[Tuple[str, str], List[LedgerEntry]] = {}
    for entry in entries:
        if entry.period != period or entry.role not in (ROLE_IOT_MO, ROLE_IOT_MT):
            continue
        buckets.setdefault((entry.payee, entry.payer), []).append(entry)
    invoices = []
    for (visited, home) in sorted(buckets):
        group = buckets[(visited, home)]
        gross = sum(e.amount for e in group)
        rate = _best_rate(visited, home, period, agreements, context)
        discount = scale_money(gross, rate)
        invoices.append(
            Invoice(
                issuer=visited,
                counterparty=home,
                period=period,
                gross=gross,
                discount_applied=discount,
                net=gross - discount,
                minutes=context.pair_minutes.get((visited, home), 0),
                entry_refs=tuple(e.call_ref for e in group),
            )
        )
    return invoices


# === conservation audit ===


@dataclass
class ConservationReport:
    balanced: bool
    net_by_party: Mapping[str, Money]
    problems: List[str]
    total_debits: Money
    total_credits: Money

    @property
    def offending_parties(self) -> frozenset[str]:
        parties = set()
        for problem in self.problems:
            parties.update(part for part in problem.split() if ":" in part or part in self.net_by_party)
        return frozenset(parties)


_MO_REQUIRED = {ROLE_RETAIL: 1, ROLE_IOT_MO: 1, ROLE_FIXED_TRANSIT: 1}
_MT_REQUIRED = {ROLE_RETAIL: 2, ROLE_FIXED_TRANSIT: 1, ROLE_MT_TERMINATION: 1}


def verify_conservation(entries: Sequence[LedgerEntry]) -> ConservationReport:
    """Audit a ledger: exact debit/credit totals plus per-call chain shape.

    Every amount is debited from exactly one payer and credited to exactly
    one payee, so the audit's teeth are in the chain checks: each call must
    carry the full role multiset for its direction, and recovered termination
    can never exceed the transit leg that recovers it.
    """
    net: dict[str, Money] = {}
    problems: List[str] = []
    by_call: dict[str, List[LedgerEntry]] = {}
    total = 0
    for entry in entries:
        total += entry.amount
        net[entry.payer] = net.get(entry.payer, 0) - entry.amount
        net[entry.payee] = net.get(entry.payee, 0) + entry.amount
        by_call.setdefault(entry.call_ref, []).append(entry)

    for call_ref in sorted(by_call):
        chain = by_call[call_ref]
        roles = [e.role for e in chain]
        counts = {role: roles.count(role) for role in set(roles)}
        parties = " ".join(sorted({e.payer for e in chain} | {e.payee for e in chain}))
        if ROLE_IOT_MO in counts:
            required = dict(_MO_REQUIRED)
            optional = {ROLE_FIXED_TERMINATION}
        elif ROLE_MT_TERMINATION in counts:
            required = dict(_MT_REQUIRED)
            optional = {ROLE_IOT_MT}
        else:
            problems.append(f"call {call_ref}: direction unrecognisable from roles ({parties})")
            continue
        for role, want in required.items():
            if counts.get(role, 0) != want:
                problems.append(
                    f"call {call_ref}: expected {want} x {role}, found {counts.get(role, 0)} ({parties})"
                )
        for role, have in counts.items():
            if role not in required and role not in optional:
                problems.append(f"call {call_ref}: unexpected role {role} ({parties})")
            elif role in optional and have > 1:
                problems.append(f"call {call_ref}: {role} duplicated ({parties})")
        transit_amt = sum(e.amount for e in chain if e.role == ROLE_FIXED_TRANSIT)
        recovered = sum(
            e.amount for e in chain if e.role in (ROLE_FIXED_TERMINATION, ROLE_MT_TERMINATION)
        )
        if counts.get(ROLE_FIXED_TRANSIT) == 1 and transit_amt < recovered:
            problems.append(f"call {call_ref}: transit {transit_amt} below recovered termination {recovered} ({parties})")

    return ConservationReport(
        balanced=not problems,
        net_by_party=net,
        problems=problems,
        total_debits=total,
        total_credits=total,
    )
