"""Roaming demand: perceived prices, volumes, and call generation.

Subscribers do not observe per-network roaming prices; they react to the
average price their last bill implied for a destination country.  Demand is
constant-elasticity around a reference price, shaved by the share of minutes
lost to substitutes (call-back services and the like), and lands on networks
according to the attachment shares.

Two traffic modes share one interface: `expected` emits a single aggregate
traffic cell per (visited network, direction, destination, period class)
carrying exact fractional minutes, `monte-carlo` samples individual calls
with exponential-like durations from a seeded generator.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Tuple

from .money import Money, round_half_up
from .tariff import Destination, Direction, PeriodClass

SECONDS_PER_MINUTE = 60


class Mode(str, enum.Enum):
    EXPECTED = "expected"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class DemandParams:
    """Demand of one home operator's base into one visited country."""

    home_operator: str
    visited_country: str
    base_minutes: int
    reference_price: Money
    elasticity: Fraction
    mt_ratio: Fraction
    substitution_share: Fraction
    call_duration_mean_s: int
    peak_fraction: Fraction
    destination_mix: Tuple[Tuple[Destination, Fraction], ...]

    def __post_init__(self) -> None:
        if self.base_minutes < 0:
            raise ValueError("base_minutes must be >= 0")
        if self.reference_price <= 0:
            raise ValueError("reference_price must be > 0")
        if self.elasticity < 0:
            raise ValueError("elasticity must be >= 0")
        if not (0 <= self.mt_ratio <= 1):
            raise ValueError("mt_ratio must be in [0, 1]")
        if not (0 <= self.substitution_share < 1):
            raise ValueError("substitution_share must be in [0, 1)")
        if self.call_duration_mean_s <= 0:
            raise ValueError("call_duration_mean_s must be > 0")
        if not (0 <= self.peak_fraction <= 1):
            raise ValueError("peak_fraction must be in [0, 1]")
        if sum((w for _, w in self.destination_mix), Fraction(0)) != 1:
            raise ValueError("destination_mix weights must sum to exactly 1")


PriceHistory = Mapping[Tuple[str, str], Tuple[Money, Fraction]]


def perceived_price(
    history: Optional[PriceHistory],
    home_operator: str,
    country: str,
    reference_price: Money,
) -> Money:
    """Average retail price per minute the prior period's bills implied.

    Total MO retail charges divided by MO minutes for the pair, rounded
    half-up to micro-units per minute.  Without history (first period, or no
    roamed minutes) the reference price stands in.
    """
    if history is None:
        return reference_price
    total, minutes = history.get((home_operator, country), (0, Fraction(0)))
    if minutes <= 0:
        return reference_price
    return round_half_up(Fraction(total) / minutes)


def roaming_volume(params: DemandParams, perceived: Money) -> int:
    """Total roamed minutes this period under constant elasticity.

    minutes = base x (perceived / reference)^(-elasticity), reduced by the
    substitution share, rounded half-up to whole minutes.  Integer
    elasticities evaluate exactly; fractional ones go through float pow.
    A perceived price below one micro-unit is clamped to one.
    """
    perceived = max(1, perceived)
    ratio = Fraction(perceived, params.reference_price)
    keep = 1 - params.substitution_share
    if params.elasticity.denominator == 1:
        factor = ratio ** (-params.elasticity.numerator)
        return round_half_up(params.base_minutes * factor * keep)
    value = float(params.base_minutes) * float(ratio) ** float(-params.elasticity) * float(keep)
    return math.floor(value + 0.5)


@dataclass
class Cdr:
    """One call detail record, or one aggregate traffic cell in expected mode.

    `calls` is the (expected) number of calls behind the record: 1 for a
    sampled call, fractional for an aggregate.  `zone` starts empty and is
    stamped by rating.
    """

    period: int
    call_id: str
    direction: Direction
    home_operator: str
    visited_operator: str
    home_country: str
    visited_country: str
    period_class: PeriodClass
    duration_s: Fraction
    minutes: Fraction
    calls: Fraction
    destination: Optional[Destination] = None
    zone: str = ""


def _expected_cells(
    home_operator: str,
    home_country: str,
    country: str,
    minutes: int,
    shares: Mapping[str, Fraction],
    params: DemandParams,
    period: int,
    seq: int,
) -> Tuple[List[Cdr], int]:
    cells: List[Cdr] = []
    period_weights = (
        (PeriodClass.PEAK, params.peak_fraction),
        (PeriodClass.OFFPEAK, 1 - params.peak_fraction),
    )
    for visited in sorted(shares):
        net_minutes = minutes * shares[visited]
        if net_minutes == 0:
            continue
        mo_minutes = net_minutes * (1 - params.mt_ratio)
        mt_minutes = net_minutes * params.mt_ratio
        for period_class, weight in period_weights:
            if weight == 0:
                continue
            for destination, mix in params.destination_mix:
                cell = mo_minutes * weight * mix
                if cell == 0:
                    continue
                cells.append(
                    Cdr(
                        period=period,
                        call_id=f"p{period}-c{seq}",
                        direction=Direction.MO,
                        home_operator=home_operator,
                        visited_operator=visited,
                        home_country=home_country,
                        visited_country=country,
                        period_class=period_class,
                        duration_s=cell * SECONDS_PER_MINUTE,
                        minutes=cell,
                        calls=cell * SECONDS_PER_MINUTE / params.call_duration_mean_s,
                        destination=destination,
                    )
                )
                seq += 1
            mt_cell = mt_minutes * weight
            if mt_cell == 0:
                continue
            cells.append(
                Cdr(
                    period=period,
                    call_id=f"p{period}-c{seq}",
                    direction=Direction.MT,
                    home_operator=home_operator,
                    visited_operator=visited,
                    home_country=home_country,
                    visited_country=country,
                    period_class=period_class,
                    duration_s=mt_cell * SECONDS_PER_MINUTE,
                    minutes=mt_cell,
                    calls=mt_cell * SECONDS_PER_MINUTE / params.call_duration_mean_s,
                )
            )
            seq += 1
    return cells, seq


def _sampled_calls(
    home_operator: str,
    home_country: str,
    country: str,
    minutes: int,
    shares: Mapping[str, Fraction],
    params: DemandParams,
    rng,
    period: int,
    seq: int,
) -> Tuple[List[Cdr], int]:
    ordered = sorted(shares)
    cumulative: List[Tuple[float, str]] = []
    acc = 0.0
    for op in ordered:
        acc += float(shares[op])
        cumulative.append((acc, op))
    mix_cum: List[Tuple[float, Destination]] = []
    acc = 0.0
    for destination, weight in params.destination_mix:
        acc += float(weight)
        mix_cum.append((acc, destination))
    expected_calls = minutes * SECONDS_PER_MINUTE / params.call_duration_mean_s
    count = int(rng.poisson(float(expected_calls)))
    calls: List[Cdr] = []
    for _ in range(count):
        duration = int(rng.exponential(params.call_duration_mean_s))
        is_mt = float(rng.random()) < float(params.mt_ratio)
        peak = float(rng.random()) < float(params.peak_fraction)
        u = float(rng.random())
        visited = None
        for edge, op in cumulative:
            if u < edge:
                visited = op
                break
        if visited is None:
            continue  # attachment found no service; the call never happens
        destination = None
        if not is_mt:
            v = float(rng.random())
            destination = mix_cum[-1][1]
            for edge, dest in mix_cum:
                if v < edge:
                    destination = dest
                    break
        calls.append(
            Cdr(
                period=period,
                call_id=f"p{period}-c{seq}",
                direction=Direction.MT if is_mt else Direction.MO,
                home_operator=home_operator,
                visited_operator=visited,
                home_country=home_country,
                visited_country=country,
                period_class=PeriodClass.PEAK if peak else PeriodClass.OFFPEAK,
                duration_s=Fraction(duration),
                minutes=Fraction(duration, SECONDS_PER_MINUTE),
                calls=Fraction(1),
                destination=destination,
            )
        )
        seq += 1
    return calls, seq


def generate_calls(
    home_operator: str,
    home_country: str,
    country: str,
    minutes: int,
    shares: Mapping[str, Fraction],
    params: DemandParams,
    rng,
    mode: Mode,
    *,
    period: int,
    seq_start: int = 0,
) -> Tuple[List[Cdr], int]:
    """Turn one (home op, visited country) demand volume into traffic records.

    Returns the records and the next call sequence number, so record ids stay
    unique and deterministic across pairs within a period.
    """
    if minutes <= 0:
        return [], seq_start
    if mode is Mode.EXPECTED:
        return _expected_cells(
            home_operator, home_country, country, minutes, shares, params, period, seq_start
        )
    return _sampled_calls(
        home_operator, home_country, country, minutes, shares, params, rng, period, seq_start
    )
