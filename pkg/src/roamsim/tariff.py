"""Inter-operator tariff (IOT) and retail rating.

A visited network prices a roamed call from its IOT schedule: a per-billing-
unit rate keyed by (zone, peak/offpeak, fixed/mobile termination), plus an
optional per-call setup fee.  Duration is billed in whole units, rounded up,
minimum one unit.  The subscriber's home operator then reprices the call for
the retail bill, either as a relative markup on the wholesale charge or as a
single per-minute rate per country group that ignores wholesale entirely.

Mobile-terminated legs are zero-priced by default; schedules may carry a
per-unit MT rate for regimes that charge them.

Everything here is a pure function over frozen value objects; no I/O.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Optional, Tuple

from .money import Money, round_half_up

SECONDS_PER_MINUTE = 60


class RatingError(Exception):
    """A call cannot be priced against the given tariff data."""


class UnmappedDestination(RatingError):
    """The zone map has no zone for the call's destination."""


class MissingGroupRate(RatingError):
    """A single-rate retail scheme has no rate for the visited country."""


class Direction(str, enum.Enum):
    MO = "MO"
    MT = "MT"


class PeriodClass(str, enum.Enum):
    PEAK = "peak"
    OFFPEAK = "offpeak"


class TermType(str, enum.Enum):
    FIXED = "fixed"
    MOBILE = "mobile"


class Band(str, enum.Enum):
    GSM900 = "gsm900"
    GSM1800 = "gsm1800"


@dataclass(frozen=True)
class Destination:
    country: str
    term_type: TermType


@dataclass(frozen=True)
class CallDescriptor:
    """One roamed call, as seen by rating and settlement.

    `destination` is set for MO calls only.  Home and visited operator must
    sit in different countries; that is what makes the call roamed.
    """

    direction: Direction
    home_operator: str
    visited_operator: str
    home_country: str
    visited_country: str
    period_class: PeriodClass
    duration_s: int
    destination: Optional[Destination] = None

    def __post_init__(self) -> None:
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")
        if self.home_country == self.visited_country:
            raise ValueError("home and visited operator must be in different countries")
        if self.direction is Direction.MO and self.destination is None:
            raise ValueError("MO call needs a destination")


@dataclass(frozen=True)
class ZoneMap:
    """Owner-local mapping from (destination country, terminating type) to zone.

    `default_zone` catches destinations without an explicit entry; without it,
    unlisted destinations are unmapped and refuse to rate.
    """

    owner: str
    entries: Tuple[Tuple[Tuple[str, TermType], str], ...]
    default_zone: Optional[str] = None

    @classmethod
    def from_mapping(
        cls,
        owner: str,
        mapping: Mapping[Tuple[str, TermType], str],
        default_zone: Optional[str] = None,
    ) -> "ZoneMap":
        entries = tuple(sorted(((k, mapping[k]) for k in mapping), key=lambda kv: (kv[0][0], kv[0][1].value)))
        return cls(owner=owner, entries=entries, default_zone=default_zone)

    @cached_property
    def _table(self) -> Mapping[Tuple[str, TermType], str]:
        return dict(self.entries)

    def zone_for(self, destination: Destination) -> str:
        zone = self._table.get((destination.country, destination.term_type))
        if zone is None:
            zone = self.default_zone
        if zone is None:
            raise UnmappedDestination(
                f"{self.owner}: no zone for {destination.country}/{destination.term_type.value}"
            )
        return zone


@dataclass(frozen=True)
class IotSchedule:
    """Wholesale price list of one visited operator.

    Rates are micro-units per billing unit.  `billing_unit_s` must divide 60
    so a whole minute is an exact number of units.
    """

    owner: str
    billing_unit_s: int
    zone_rates: Tuple[Tuple[Tuple[str, PeriodClass, TermType], Money], ...]
    setup_fee: Money = 0
    mt_rate: Money = 0
    valid_from: int = 0

    @classmethod
    def from_mapping(
        cls,
        owner: str,
        billing_unit_s: int,
        zone_rates: Mapping[Tuple[str, PeriodClass, TermType], Money],
        setup_fee: Money = 0,
        mt_rate: Money = 0,
        valid_from: int = 0,
    ) -> "IotSchedule":
        keys = sorted(zone_rates, key=lambda k: (k[0], k[1].value, k[2].value))
        return cls(
            owner=owner,
            billing_unit_s=billing_unit_s,
            zone_rates=tuple((k, zone_rates[k]) for k in keys),
            setup_fee=setup_fee,
            mt_rate=mt_rate,
            valid_from=valid_from,
        )

    def __post_init__(self) -> None:
        if self.billing_unit_s <= 0 or SECONDS_PER_MINUTE % self.billing_unit_s != 0:
            raise ValueError("billing_unit_s must be a positive divisor of 60")
        if self.setup_fee < 0 or self.mt_rate < 0:
            raise ValueError("fees must be non-negative")
        for _, rate in self.zone_rates:
            if rate < 0:
                raise ValueError("zone rates must be non-negative")

    @cached_property
    def _table(self) -> Mapping[Tuple[str, PeriodClass, TermType], Money]:
        return dict(self.zone_rates)

    @property
    def units_per_minute(self) -> int:
        return SECONDS_PER_MINUTE // self.billing_unit_s

    def zone_rate(self, zone: str, period_class: PeriodClass, term_type: TermType) -> Money:
        try:
            return self._table[(zone, period_class, term_type)]
        except KeyError:
            raise RatingError(
                f"{self.owner}: no rate for zone {zone!r} {period_class.value}/{term_type.value}"
            ) from None

    def scaled(self, factor: Fraction) -> "IotSchedule":
        """Proportionally rescale the whole schedule (headline IOT moves)."""
        rates = tuple((key, round_half_up(rate * factor)) for key, rate in self.zone_rates)
        return IotSchedule(
            owner=self.owner,
            billing_unit_s=self.billing_unit_s,
            zone_rates=rates,
            setup_fee=round_half_up(self.setup_fee * factor),
            mt_rate=round_half_up(self.mt_rate * factor),
            valid_from=self.valid_from,
        )


@dataclass(frozen=True)
class MarkupRetail:
    """Retail price = (1 + markup) x wholesale charge, rounded half-up."""

    home_operator: str
    markup: Fraction
    mt_prices: Tuple[Tuple[str, Money], ...] = ()

    @cached_property
    def _mt_table(self) -> Mapping[str, Money]:
        return dict(self.mt_prices)


@dataclass(frozen=True)
class SingleRateRetail:
    """Retail price = one per-minute rate per country group, wholesale-blind."""

    home_operator: str
    group_rates: Tuple[Tuple[str, Money], ...]
    country_groups: Tuple[Tuple[str, str], ...]  # country -> group id
    mt_prices: Tuple[Tuple[str, Money], ...] = ()

    @cached_property
    def _rate_table(self) -> Mapping[str, Money]:
        return dict(self.group_rates)

    @cached_property
    def _country_table(self) -> Mapping[str, str]:
        return dict(self.country_groups)

    @cached_property
    def _mt_table(self) -> Mapping[str, Money]:
        return dict(self.mt_prices)

    def minute_rate_for(self, visited_country: str) -> Money:
        group = self._country_table.get(visited_country)
        if group is None:
            raise MissingGroupRate(
                f"{self.home_operator}: country {visited_country!r} is in no rate group"
            )
        rate = self._rate_table.get(group)
        if rate is None:
            raise MissingGroupRate(
                f"{self.home_operator}: no single rate for group {group!r}"
            )
        return rate


RetailScheme = MarkupRetail | SingleRateRetail


# === rating operations ===


def billed_units(duration_s: int, billing_unit_s: int) -> int:
    """Whole billing units for a duration: ceiling, minimum one unit."""
    if duration_s < 0:
        raise ValueError("duration_s must be >= 0")
    if billing_unit_s <= 0:
        raise ValueError("billing_unit_s must be > 0")
    return max(1, -(-duration_s // billing_unit_s))


def billed_minutes(duration_s: int) -> int:
    """Whole billed minutes: ceiling, minimum one."""
    return billed_units(duration_s, SECONDS_PER_MINUTE)


def rate_wholesale_mo(schedule: IotSchedule, zones: ZoneMap, call: CallDescriptor) -> Money:
    """Wholesale charge the visited network bills the home network for an MO call."""
    if call.direction is not Direction.MO:
        raise ValueError("rate_wholesale_mo wants an MO call")
    assert call.destination is not None
    zone = zones.zone_for(call.destination)
    rate = schedule.zone_rate(zone, call.period_class, call.destination.term_type)
    units = billed_units(call.duration_s, schedule.billing_unit_s)
    return schedule.setup_fee + units * rate


def rate_wholesale_mt(schedule: IotSchedule, call: CallDescriptor) -> Money:
    """Wholesale charge for the roamed MT leg; zero unless the schedule prices MT."""
    if call.direction is not Direction.MT:
        raise ValueError("rate_wholesale_mt wants an MT call")
    if schedule.mt_rate == 0:
        return 0
    units = billed_units(call.duration_s, schedule.billing_unit_s)
    return units * schedule.mt_rate


def rate_retail_mo(scheme: RetailScheme, wholesale_charge: Money, call: CallDescriptor) -> Money:
    """Retail charge on the subscriber's bill for an MO roamed call."""
    if isinstance(scheme, MarkupRetail):
        return round_half_up((1 + scheme.markup) * wholesale_charge)
    rate = scheme.minute_rate_for(call.visited_country)
    return rate * billed_minutes(call.duration_s)


def rate_retail_mt(scheme: RetailScheme, call: CallDescriptor) -> Money:
    """Retail charge the subscriber pays for receiving a call abroad."""
    price = scheme._mt_table.get(call.visited_country)
    if price is None:
        raise MissingGroupRate(
            f"{scheme.home_operator}: no MT retail price for {call.visited_country!r}"
        )
    return price * billed_minutes(call.duration_s)


# === expected-mode aggregates ===
#
# Expected-mode traffic cells carry exact fractional minutes and an expected
# call count instead of individual durations.  Unit granularity is a per-call
# notion, so aggregates bill at rate x units-per-minute x minutes, with setup
# fees amortised over the expected call count; one half-up rounding at the end.


def rate_wholesale_mo_aggregate(
    schedule: IotSchedule,
    zones: ZoneMap,
    destination: Destination,
    period_class: PeriodClass,
    minutes: Fraction,
    calls: Fraction,
) -> Money:
    zone = zones.zone_for(destination)
    rate = schedule.zone_rate(zone, period_class, destination.term_type)
    exact = minutes * rate * schedule.units_per_minute + calls * schedule.setup_fee
    return round_half_up(exact)


def rate_wholesale_mt_aggregate(schedule: IotSchedule, minutes: Fraction) -> Money:
    if schedule.mt_rate == 0:
        return 0
    return round_half_up(minutes * schedule.mt_rate * schedule.units_per_minute)


def rate_retail_mo_aggregate(
    scheme: RetailScheme, wholesale_charge: Money, visited_country: str, minutes: Fraction
) -> Money:
    if isinstance(scheme, MarkupRetail):
        return round_half_up((1 + scheme.markup) * wholesale_charge)
    return round_half_up(scheme.minute_rate_for(visited_country) * minutes)


def rate_retail_mt_aggregate(scheme: RetailScheme, visited_country: str, minutes: Fraction) -> Money:
    price = scheme._mt_table.get(visited_country)
    if price is None:
        raise MissingGroupRate(
            f"{scheme.home_operator}: no MT retail price for {visited_country!r}"
        )
    return round_half_up(price * minutes)
