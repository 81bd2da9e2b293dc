"""Scenario model: the full market configuration, loaded from JSON.

Scenario files keep money as integer micro-units and every fraction as a
quoted string ("0.25", "8/9") parsed exactly; unquoted float literals are
rejected so two machines can never disagree on a scenario's meaning.
Coverage and handset mixes may be trajectories: step functions given as
{"period": "value"} breakpoints with a mandatory "0".

`load_scenario` raises ParseError for unreadable or malformed files and
ValidationError (listing every violation with its field path) for
well-formed files that break the schema or its cross-references.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .demand import DemandParams, Mode
from .money import Money, parse_fraction
from .selection import SimProfile, VisitedNetwork
from .settlement import CountryTransit, Tier, TierKind, TransitTariff
from .strategy import BestResponse, Hold, IotPolicy, Undercut
from .tariff import (
    Band,
    Destination,
    IotSchedule,
    MarkupRetail,
    PeriodClass,
    RetailScheme,
    SingleRateRetail,
    TermType,
    ZoneMap,
)


class ParseError(Exception):
    """Scenario file unreadable or not valid JSON."""


class ValidationError(Exception):
    """Scenario JSON is well-formed but violates the schema."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class Trajectory:
    """Step function over periods: value at t is the latest breakpoint <= t."""

    points: Tuple[Tuple[int, Fraction], ...]

    @classmethod
    def constant(cls, value: Fraction) -> "Trajectory":
        return cls(points=((0, value),))

    def value_at(self, period: int) -> Fraction:
        value = self.points[0][1]
        for at, point in self.points:
            if at <= period:
                value = point
            else:
                break
        return value


@dataclass(frozen=True)
class Country:
    id: str
    fixed_operator: str


@dataclass(frozen=True)
class Operator:
    id: str
    country: str
    band: Band
    coverage: Trajectory
    wholesale_cost: Money


@dataclass(frozen=True)
class ProfileSpec:
    home_operator: str
    preferred: Tuple[Tuple[str, Tuple[str, ...]], ...]
    dual_band_mix: Trajectory
    manual_propensity: Fraction

    def profile_at(self, period: int) -> SimProfile:
        return SimProfile(
            home_operator=self.home_operator,
            preferred=self.preferred,
            dual_band_mix=self.dual_band_mix.value_at(period),
            manual_propensity=self.manual_propensity,
        )


@dataclass(frozen=True)
class DiscountPolicy:
    tiers: Tuple[Tier, ...]
    requires_preferred: bool = True


@dataclass(frozen=True)
class OperatorPolicy:
    operator: str
    iot: IotPolicy
    discount: Optional[DiscountPolicy] = None


@dataclass(frozen=True)
class Group:
    id: str
    members: Tuple[str, ...]
    kind: str = "group"  # "group" (ownership) or "broker" (resale aggregator)


@dataclass
class Scenario:
    horizon: int
    seed: int
    mode: Mode
    currency_note: str
    markup_bound: Tuple[Fraction, Fraction]
    countries: Dict[str, Country]
    operators: Dict[str, Operator]
    tariffs: Dict[str, IotSchedule]
    headlines: Dict[str, Money]
    zone_maps: Dict[str, ZoneMap]
    transit: TransitTariff
    retail: Dict[str, RetailScheme]
    profiles: Dict[str, ProfileSpec]
    demand: Dict[Tuple[str, str], DemandParams]
    policies: Dict[str, OperatorPolicy]
    groups: Dict[str, Group]
    steering_active_from: Dict[str, int]
    nondiscrimination: bool
    benchmarks: Dict[str, Money]

    def operators_in(self, country: str) -> List[Operator]:
        return [op for op in self.operators.values() if op.country == country]

    def networks_at(self, country: str, period: int) -> Tuple[VisitedNetwork, ...]:
        nets = [
            VisitedNetwork(op.id, op.band, op.coverage.value_at(period))
            for op in self.operators.values()
            if op.country == country
        ]
        return tuple(sorted(nets, key=lambda n: n.operator))

    def home_operators(self) -> List[str]:
        return sorted({home for home, _ in self.demand})

    def visited_countries_of(self, home_operator: str) -> List[str]:
        return sorted(c for h, c in self.demand if h == home_operator)

    def unit_of(self, operator: str) -> str:
        for group in self.groups.values():
            if operator in group.members:
                return group.id
        return operator

    def unit_members(self) -> Dict[str, Tuple[str, ...]]:
        return {g.id: g.members for g in self.groups.values()}

    def steering_active(self, home_operator: str, period: int) -> bool:
        start = self.steering_active_from.get(home_operator)
        return start is not None and period >= start

    def policy_for(self, operator: str) -> OperatorPolicy:
        return self.policies.get(operator, OperatorPolicy(operator=operator, iot=Hold()))


# === JSON loading ===


class _FloatLiteral(Exception):
    pass


def _reject_float(_: str) -> None:
    raise _FloatLiteral()


class _Check:
    """Collects field-path diagnostics instead of failing fast."""

    def __init__(self) -> None:
        self.errors: List[str] = []

    def fail(self, path: str, message: str) -> None:
        self.errors.append(f"{path}: {message}")

    def is_int(self, value: Any, path: str, minimum: Optional[int] = None) -> bool:
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(path, f"expected integer, got {value!r}")
            return False
        if minimum is not None and value < minimum:
            self.fail(path, f"must be >= {minimum}, got {value}")
            return False
        return True

    def is_str(self, value: Any, path: str) -> bool:
        if not isinstance(value, str) or not value:
            self.fail(path, f"expected non-empty string, got {value!r}")
            return False
        return True

    def fraction(
        self,
        value: Any,
        path: str,
        lo: Optional[Fraction] = None,
        hi: Optional[Fraction] = None,
        strict_hi: bool = False,
    ) -> Optional[Fraction]:
        if not isinstance(value, (str, int)) or isinstance(value, bool):
            self.fail(path, f"expected exact fraction string, got {value!r}")
            return None
        try:
            frac = parse_fraction(value)
        except ValueError as exc:
            self.fail(path, str(exc))
            return None
        if lo is not None and frac < lo:
            self.fail(path, f"must be >= {lo}, got {frac}")
            return None
        if hi is not None and (frac > hi or (strict_hi and frac == hi)):
            self.fail(path, f"must be {'<' if strict_hi else '<='} {hi}, got {frac}")
            return None
        return frac

    def trajectory(
        self, value: Any, path: str, lo: Fraction = Fraction(0), hi: Fraction = Fraction(1)
    ) -> Optional[Trajectory]:
        if isinstance(value, (str, int)) and not isinstance(value, bool):
            frac = self.fraction(value, path, lo, hi)
            return Trajectory.constant(frac) if frac is not None else None
        if isinstance(value, dict):
            points: List[Tuple[int, Fraction]] = []
            for key in value:
                try:
                    at = int(key)
                except ValueError:
                    self.fail(path, f"breakpoint period {key!r} is not an integer")
                    return None
                if at < 0:
                    self.fail(path, f"breakpoint period {at} is negative")
                    return None
                frac = self.fraction(value[key], f"{path}[{key}]", lo, hi)
                if frac is None:
                    return None
                points.append((at, frac))
            points.sort()
            if not points or points[0][0] != 0:
                self.fail(path, "trajectory needs a breakpoint at period 0")
                return None
            return Trajectory(points=tuple(points))
        self.fail(path, f"expected fraction or breakpoint map, got {value!r}")
        return None


def _enum(check: _Check, cls, value: Any, path: str):
    try:
        return cls(value)
    except ValueError:
        valid = ", ".join(e.value for e in cls)
        check.fail(path, f"expected one of {valid}, got {value!r}")
        return None


def load_scenario(path: str) -> Scenario:
    """Read, parse and validate a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ParseError(f"cannot read scenario {path}: {exc}") from exc
    try:
        raw = json.loads(text, parse_float=_reject_float)
    except _FloatLiteral:
        raise ValidationError(
            [f"{path}: floating-point literal in scenario; quote fractions as strings"]
        ) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(raw)


def scenario_from_dict(raw: Any) -> Scenario:
    check = _Check()
    if not isinstance(raw, dict):
        raise ValidationError(["top level: expected a JSON object"])

    for section in ("meta", "countries", "operators", "tariffs", "zone_maps", "transit",
                    "retail", "sim_profiles", "demand", "benchmarks"):
        if section not in raw:
            check.fail(section, "missing section")
    if check.errors:
        raise ValidationError(check.errors)

    meta = raw["meta"] if isinstance(raw["meta"], dict) else {}
    horizon = meta.get("horizon")
    check.is_int(horizon, "meta.horizon", 0)
    seed = meta.get("seed", 0)
    check.is_int(seed, "meta.seed")
    mode = _enum(check, Mode, meta.get("mode", "expected"), "meta.mode")
    currency_note = meta.get("currency_note", "")
    bound_raw = meta.get("markup_bound", ["0", "1"])
    lo = check.fraction(bound_raw[0], "meta.markup_bound[0]") if isinstance(bound_raw, list) and len(bound_raw) == 2 else None
    hi = check.fraction(bound_raw[1], "meta.markup_bound[1]") if isinstance(bound_raw, list) and len(bound_raw) == 2 else None
    if lo is None or hi is None:
        lo, hi = Fraction(0), Fraction(1)
        if not isinstance(bound_raw, list) or len(bound_raw) != 2:
            check.fail("meta.markup_bound", "expected [lo, hi]")

    countries: Dict[str, Country] = {}
    fixed_ops: Dict[str, str] = {}
    for i, entry in enumerate(raw["countries"] or []):
        path = f"countries[{i}]"
        if not isinstance(entry, dict):
            check.fail(path, "expected object")
            continue
        cid, fop = entry.get("id"), entry.get("fixed_operator")
        if check.is_str(cid, f"{path}.id") and check.is_str(fop, f"{path}.fixed_operator"):
            if cid in countries:
                check.fail(f"{path}.id", f"duplicate country {cid!r}")
            countries[cid] = Country(id=cid, fixed_operator=fop)
            fixed_ops[fop] = cid
    if not countries:
        check.fail("countries", "need at least one country")

    operators: Dict[str, Operator] = {}
    for i, entry in enumerate(raw["operators"] or []):
        path = f"operators[{i}]"
        if not isinstance(entry, dict):
            check.fail(path, "expected object")
            continue
        oid = entry.get("id")
        if not check.is_str(oid, f"{path}.id"):
            continue
        if oid in operators or oid in fixed_ops:
            check.fail(f"{path}.id", f"duplicate operator id {oid!r}")
        country = entry.get("country")
        if check.is_str(country, f"{path}.country") and country not in countries:
            check.fail(f"{path}.country", f"unknown country {country!r}")
        band = _enum(check, Band, entry.get("band"), f"{path}.band")
        coverage = check.trajectory(entry.get("coverage"), f"{path}.coverage")
        cost = entry.get("wholesale_cost_micro_per_min", 0)
        check.is_int(cost, f"{path}.wholesale_cost_micro_per_min", 0)
        if band is not None and coverage is not None and isinstance(country, str):
            operators[oid] = Operator(
                id=oid, country=country, band=band, coverage=coverage, wholesale_cost=cost
            )

    tariffs: Dict[str, IotSchedule] = {}
    headlines: Dict[str, Money] = {}
    for i, entry in enumerate(raw["tariffs"] or []):
        path = f"tariffs[{i}]"
        if not isinstance(entry, dict):
            check.fail(path, "expected object")
            continue
        owner = entry.get("owner")
        if not check.is_str(owner, f"{path}.owner"):
            continue
        if owner not in operators:
            check.fail(f"{path}.owner", f"unknown operator {owner!r}")
            continue
        if owner in tariffs:
            check.fail(f"{path}.owner", f"second tariff for {owner!r}")
            continue
        unit = entry.get("billing_unit_s")
        if not check.is_int(unit, f"{path}.billing_unit_s", 1):
            continue
        if 60 % unit != 0:
            check.fail(f"{path}.billing_unit_s", f"{unit} does not divide 60")
            continue
        headline = entry.get("headline_micro_per_min")
        if not check.is_int(headline, f"{path}.headline_micro_per_min", 1):
            continue
        setup = entry.get("setup_fee_micro", 0)
        mt_rate = entry.get("mt_rate_micro_per_unit", 0)
        valid_from = entry.get("valid_from", 0)
        check.is_int(setup, f"{path}.setup_fee_micro", 0)
        check.is_int(mt_rate, f"{path}.mt_rate_micro_per_unit", 0)
        if check.is_int(valid_from, f"{path}.valid_from", 0) and valid_from != 0:
            check.fail(f"{path}.valid_from", "dated schedules are not supported; must be 0")
        rates: Dict[Tuple[str, PeriodClass, TermType], Money] = {}
        for j, rate_entry in enumerate(entry.get("zone_rates") or []):
            rpath = f"{path}.zone_rates[{j}]"
            if not isinstance(rate_entry, dict):
                check.fail(rpath, "expected object")
                continue
            zone = rate_entry.get("zone")
            period_class = _enum(check, PeriodClass, rate_entry.get("period"), f"{rpath}.period")
            term = _enum(check, TermType, rate_entry.get("term_type"), f"{rpath}.term_type")
            rate = rate_entry.get("rate_micro_per_unit")
            if (
                check.is_str(zone, f"{rpath}.zone")
                and period_class is not None
                and term is not None
                and check.is_int(rate, f"{rpath}.rate_micro_per_unit", 0)
            ):
                key = (zone, period_class, term)
                if key in rates:
                    check.fail(rpath, f"duplicate rate for {zone}/{period_class.value}/{term.value}")
                rates[key] = rate
        if not rates:
            check.fail(f"{path}.zone_rates", "need at least one rate")
            continue
        tariffs[owner] = IotSchedule.from_mapping(
            owner=owner, billing_unit_s=unit, zone_rates=rates, setup_fee=setup, mt_rate=mt_rate
        )
        headlines[owner] = headline
    for oid in operators:
        if oid not in tariffs:
            check.fail("tariffs", f"operator {oid!r} has no tariff")

    zone_maps: Dict[str, ZoneMap] = {}
    for i, entry in enumerate(raw["zone_maps"] or []):
        path = f"zone_maps[{i}]"
        if not isinstance(entry, dict):
            check.fail(path, "expected object")
            continue
        owner = entry.get("owner")
        if not check.is_str(owner, f"{path}.owner"):
            continue
        if owner not in operators:
            check.fail(f"{path}.owner", f"unknown operator {owner!r}")
            continue
        if owner in zone_maps:
            check.fail(f"{path}.owner", f"second zone map for {owner!r}")
            continue
        default_zone = entry.get("default_zone")
        if default_zone is not None:
            check.is_str(default_zone, f"{path}.default_zone")
        mapping: Dict[Tuple[str, TermType], str] = {}
        for j, zentry in enumerate(entry.get("entries") or []):
            zpath = f"{path}.entries[{j}]"
            if not isinstance(zentry, dict):
                check.fail(zpath, "expected object")
                continue
            dest = zentry.get("country")
            term = _enum(check, TermType, zentry.get("term_type"), f"{zpath}.term_type")
            zone = zentry.get("zone")
            if check.is_str(dest, f"{zpath}.country") and term is not None and check.is_str(zone, f"{zpath}.zone"):
                if dest not in countries:
                    check.fail(f"{zpath}.country", f"unknown country {dest!r}")
                mapping[(dest, term)] = zone
        zone_maps[owner] = ZoneMap.from_mapping(owner, mapping, default_zone)
    for oid in operators:
        if oid not in zone_maps:
            check.fail("zone_maps", f"operator {oid!r} has no zone map")

    # Zone maps must resolve every scenario destination, and the tariff must
    # price every zone the map can produce (both period classes).
    for oid, zmap in zone_maps.items():
        schedule = tariffs.get(oid)
        for cid in countries:
            for term in TermType:
                dest = Destination(cid, term)
                try:
                    zone = zmap.zone_for(dest)
                except Exception:
                    check.fail(
                        f"zone_maps[{oid}]", f"destination {cid}/{term.value} resolves to no zone"
                    )
                    continue
                if schedule is None:
                    continue
                for period_class in PeriodClass:
                    try:
                        schedule.zone_rate(zone, period_class, term)
                    except Exception:
                        check.fail(
                            f"tariffs[{oid}]",
                            f"no rate for zone {zone!r} {period_class.value}/{term.value}",
                        )

    transit_entries: List[CountryTransit] = []
    seen_transit = set()
    for i, entry in enumerate(raw["transit"] or []):
        path = f"transit[{i}]"
        if not isinstance(entry, dict):
            check.fail(path, "expected object")
            continue
        cid = entry.get("country")
        if not check.is_str(cid, f"{path}.country"):
            continue
        if cid not in countries:
            check.fail(f"{path}.country", f"unknown country {cid!r}")
            continue
        if cid in seen_transit:
            check.fail(f"{path}.country", f"second transit entry for {cid!r}")
            continue
        seen_transit.add(cid)
        fields_ok = True
        values = {}
        for name in (
            "transit_micro_per_min",
            "fixed_termination_micro_per_min",
            "mt_termination_micro_per_min",
            "intl_retail_micro_per_min",
        ):
            value = entry.get(name, 0)
            if not check.is_int(value, f"{path}.{name}", 0):
                fields_ok = False
            values[name] = value
        if fields_ok:
            transit_entries.append(
                CountryTransit(
                    country=cid,
                    fixed_operator=countries[cid].fixed_operator,
                    transit=values["transit_micro_per_min"],
                    fixed_termination=values["fixed_termination_micro_per_min"],
                    mt_termination=values["mt_termination_micro_per_min"],
                    intl_retail=values["intl_retail_micro_per_min"],
                )
            )
    for cid in countries:
        if cid not in seen_transit:
            check.fail("transit", f"country {cid!r} has no transit entry")

    retail: Dict[str, RetailScheme] = {}
    for i, entry in enumerate(raw["retail"] or []):
        path = f"retail[{i}]"
        if not isinstance(entry, dict):
            check.fail(path, "expected object")
            continue
        home = entry.get("home_op")
        if not check.is_str(home, f"{path}.home_op"):
            continue
        path = f"retail[{home}]"
        if home not in operators:
            check.fail(f"{path}.home_op", f"unknown operator {home!r}")
            continue
        if home in retail:
            check.fail(f"{path}.home_op", f"second retail scheme for {home!r}")
            continue
        mt_prices: List[Tuple[str, Money]] = []
        for j, mt_entry in enumerate(entry.get("mt_prices") or []):
            mpath = f"{path}.mt_prices[{j}]"
            cid = mt_entry.get("country") if isinstance(mt_entry, dict) else None
            price = mt_entry.get("micro_per_min") if isinstance(mt_entry, dict) else None
            if check.is_str(cid, f"{mpath}.country") and check.is_int(price, f"{mpath}.micro_per_min", 0):
                if cid not in countries:
                    check.fail(f"{mpath}.country", f"unknown country {cid!r}")
                mt_prices.append((cid, price))
        scheme_kind = entry.get("scheme")
        if scheme_kind == "markup":
            markup = check.fraction(entry.get("markup"), f"{path}.markup", lo, hi)
            if markup is None:
                continue
            retail[home] = MarkupRetail(
                home_operator=home, markup=markup, mt_prices=tuple(sorted(mt_prices))
            )
        elif scheme_kind == "single_rate":
            group_rates: List[Tuple[str, Money]] = []
            country_groups: List[Tuple[str, str]] = []
            for j, gentry in enumerate(entry.get("rate_groups") or []):
                gpath = f"{path}.rate_groups[{j}]"
                if not isinstance(gentry, dict):
                    check.fail(gpath, "expected object")
                    continue
                gid = gentry.get("id")
                rate = gentry.get("micro_per_min")
                members = gentry.get("countries")
                if not (check.is_str(gid, f"{gpath}.id") and check.is_int(rate, f"{gpath}.micro_per_min", 0)):
                    continue
                group_rates.append((gid, rate))
                for cid in members or []:
                    if cid not in countries:
                        check.fail(f"{gpath}.countries", f"unknown country {cid!r}")
                    country_groups.append((cid, gid))
            if not group_rates:
                check.fail(f"{path}.rate_groups", "single_rate scheme needs rate groups")
                continue
            retail[home] = SingleRateRetail(
                home_operator=home,
                group_rates=tuple(sorted(group_rates)),
                country_groups=tuple(sorted(country_groups)),
                mt_prices=tuple(sorted(mt_prices)),
            )
        else:
            check.fail(f"{path}.scheme", f"expected markup or single_rate, got {scheme_kind!r}")

    profiles: Dict[str, ProfileSpec] = {}
    for i, entry in enumerate(raw["sim_profiles"] or []):
        path = f"sim_profiles[{i}]"
        if not isinstance(entry, dict):
            check.fail(path, "expected object")
            continue
        home = entry.get("home_op")
        if not check.is_str(home, f"{path}.home_op"):
            continue
        path = f"sim_profiles[{home}]"
        if home not in operators:
            check.fail(f"{path}.home_op", f"unknown operator {home!r}")
            continue
        if home in profiles:
            check.fail(f"{path}.home_op", f"second profile for {home!r}")
            continue
        preferred: List[Tuple[str, Tuple[str, ...]]] = []
        raw_preferred = entry.get("preferred")
        if not isinstance(raw_preferred, dict):
            check.fail(f"{path}.preferred", "expected {country: [operators]}")
            raw_preferred = {}
        for cid, ops in raw_preferred.items():
            ppath = f"{path}.preferred[{cid}]"
            if cid not in countries:
                check.fail(ppath, f"unknown country {cid!r}")
                continue
            if not isinstance(ops, list):
                check.fail(ppath, "expected list of operators")
                continue
            if len(set(ops)) != len(ops):
                check.fail(ppath, "list repeats an operator")
            for op in ops:
                if op not in operators:
                    check.fail(ppath, f"unknown operator {op!r}")
                elif operators[op].country != cid:
                    check.fail(ppath, f"{op!r} is not licensed in {cid!r}")
            preferred.append((cid, tuple(ops)))
        dual = check.trajectory(entry.get("dual_band_mix", "0"), f"{path}.dual_band_mix")
        manual = check.fraction(entry.get("manual_propensity", "0"), f"{path}.manual_propensity", Fraction(0), Fraction(1))
        if dual is not None and manual is not None:
            profiles[home] = ProfileSpec(
                home_operator=home,
                preferred=tuple(sorted(preferred)),
                dual_band_mix=dual,
                manual_propensity=manual,
            )

    demand: Dict[Tuple[str, str], DemandParams] = {}
    for i, entry in enumerate(raw["demand"] or []):
        path = f"demand[{i}]"
        if not isinstance(entry, dict):
            check.fail(path, "expected object")
            continue
        home = entry.get("home_op")
        visited = entry.get("visited_country")
        if not (check.is_str(home, f"{path}.home_op") and check.is_str(visited, f"{path}.visited_country")):
            continue
        path = f"demand[{home}->{visited}]"
        if home not in operators:
            check.fail(f"{path}.home_op", f"unknown operator {home!r}")
            continue
        if visited not in countries:
            check.fail(f"{path}.visited_country", f"unknown country {visited!r}")
            continue
        if operators[home].country == visited:
            check.fail(path, "home operator cannot roam in its own country")
            continue
        if (home, visited) in demand:
            check.fail(path, "duplicate demand entry")
            continue
        base = entry.get("base_minutes")
        reference = entry.get("reference_price_micro_per_min")
        duration = entry.get("call_duration_mean_s")
        ok = check.is_int(base, f"{path}.base_minutes", 0)
        ok = check.is_int(reference, f"{path}.reference_price_micro_per_min", 1) and ok
        ok = check.is_int(duration, f"{path}.call_duration_mean_s", 1) and ok
        elasticity = check.fraction(entry.get("elasticity", "0"), f"{path}.elasticity", Fraction(0))
        mt_ratio = check.fraction(entry.get("mt_ratio", "0"), f"{path}.mt_ratio", Fraction(0), Fraction(1))
        substitution = check.fraction(
            entry.get("substitution_share", "0"), f"{path}.substitution_share", Fraction(0), Fraction(1), strict_hi=True
        )
        peak = check.fraction(entry.get("peak_fraction", "1"), f"{path}.peak_fraction", Fraction(0), Fraction(1))
        mix: List[Tuple[Destination, Fraction]] = []
        total_weight = Fraction(0)
        for j, mentry in enumerate(entry.get("destination_mix") or []):
            mpath = f"{path}.destination_mix[{j}]"
            if not isinstance(mentry, dict):
                check.fail(mpath, "expected object")
                continue
            cid = mentry.get("country")
            term = _enum(check, TermType, mentry.get("term_type"), f"{mpath}.term_type")
            weight = check.fraction(mentry.get("weight"), f"{mpath}.weight", Fraction(0), Fraction(1))
            if check.is_str(cid, f"{mpath}.country") and term is not None and weight is not None:
                if cid not in countries:
                    check.fail(f"{mpath}.country", f"unknown country {cid!r}")
                    continue
                mix.append((Destination(cid, term), weight))
                total_weight += weight
        if not mix or total_weight != 1:
            check.fail(f"{path}.destination_mix", f"weights must sum to exactly 1, got {total_weight}")
            continue
        if not (ok and None not in (elasticity, mt_ratio, substitution, peak)):
            continue
        demand[(home, visited)] = DemandParams(
            home_operator=home,
            visited_country=visited,
            base_minutes=base,
            reference_price=reference,
            elasticity=elasticity,
            mt_ratio=mt_ratio,
            substitution_share=substitution,
            call_duration_mean_s=duration,
            peak_fraction=peak,
            destination_mix=tuple(mix),
        )

    for home, visited in demand:
        if home not in retail:
            check.fail(f"retail[{home}]", "home operator with demand needs a retail scheme")
        else:
            mt_table = dict(retail[home].mt_prices)
            if visited not in mt_table:
                check.fail(f"retail[{home}].mt_prices", f"no MT price for visited country {visited!r}")
        if home not in profiles:
            check.fail(f"sim_profiles[{home}]", "home operator with demand needs a SIM profile")

    policies: Dict[str, OperatorPolicy] = {}
    for i, entry in enumerate(raw.get("policies") or []):
        path = f"policies[{i}]"
        if not isinstance(entry, dict):
            check.fail(path, "expected object")
            continue
        oid = entry.get("operator")
        if not check.is_str(oid, f"{path}.operator"):
            continue
        path = f"policies[{oid}]"
        if oid not in operators:
            check.fail(f"{path}.operator", f"unknown operator {oid!r}")
            continue
        if oid in policies:
            check.fail(f"{path}.operator", f"second policy for {oid!r}")
            continue
        iot_raw = entry.get("iot") or {"kind": "hold"}
        kind = iot_raw.get("kind") if isinstance(iot_raw, dict) else None
        iot: Optional[IotPolicy] = None
        if kind == "hold":
            iot = Hold()
        elif kind == "undercut":
            delta = check.fraction(iot_raw.get("delta"), f"{path}.iot.delta", Fraction(0), Fraction(1), strict_hi=True)
            floor = iot_raw.get("floor_micro_per_min", 0)
            if check.is_int(floor, f"{path}.iot.floor_micro_per_min", 0) and delta is not None:
                iot = Undercut(delta=delta, floor=floor)
        elif kind == "best_response":
            grid = iot_raw.get("grid_micro_per_min")
            cost = iot_raw.get("cost_micro_per_min", 0)
            grid_ok = isinstance(grid, list) and grid and all(
                check.is_int(g, f"{path}.iot.grid_micro_per_min[{k}]", 1) for k, g in enumerate(grid)
            )
            if not (isinstance(grid, list) and grid):
                check.fail(f"{path}.iot.grid_micro_per_min", "expected non-empty list")
            elif grid_ok and any(b <= a for a, b in zip(grid, grid[1:])):
                check.fail(f"{path}.iot.grid_micro_per_min", "grid must be strictly increasing")
                grid_ok = False
            if grid_ok and check.is_int(cost, f"{path}.iot.cost_micro_per_min", 0):
                iot = BestResponse(grid=tuple(grid), cost=cost)
        else:
            check.fail(f"{path}.iot.kind", f"expected hold, undercut or best_response, got {kind!r}")
        discount: Optional[DiscountPolicy] = None
        if "discount" in entry and entry["discount"] is not None:
            draw = entry["discount"]
            tiers: List[Tier] = []
            seen_tiers = set()
            for j, tentry in enumerate((draw.get("tiers") if isinstance(draw, dict) else None) or []):
                tpath = f"{path}.discount.tiers[{j}]"
                if not isinstance(tentry, dict):
                    check.fail(tpath, "expected object")
                    continue
                tkind = _enum(check, TierKind, tentry.get("kind"), f"{tpath}.kind")
                rate = check.fraction(tentry.get("rate"), f"{tpath}.rate", Fraction(0), Fraction(1), strict_hi=True)
                threshold_raw = tentry.get("threshold")
                threshold: Optional[Fraction] = None
                if tkind is TierKind.VOLUME:
                    if check.is_int(threshold_raw, f"{tpath}.threshold", 0):
                        threshold = Fraction(threshold_raw)
                elif tkind is TierKind.GROWTH:
                    threshold = check.fraction(threshold_raw, f"{tpath}.threshold", Fraction(0))
                if tkind is None or rate is None or threshold is None:
                    continue
                if (tkind, threshold) in seen_tiers:
                    check.fail(tpath, f"duplicate {tkind.value} threshold {threshold}")
                    continue
                seen_tiers.add((tkind, threshold))
                tiers.append(Tier(kind=tkind, threshold=threshold, rate=rate))
            if not tiers:
                check.fail(f"{path}.discount.tiers", "discount policy needs at least one tier")
            else:
                requires = draw.get("requires_preferred", True) if isinstance(draw, dict) else True
                if not isinstance(requires, bool):
                    check.fail(f"{path}.discount.requires_preferred", "expected boolean")
                    requires = True
                discount = DiscountPolicy(
                    tiers=tuple(sorted(tiers, key=lambda t: (t.kind.value, t.threshold))),
                    requires_preferred=requires,
                )
        if iot is not None:
            policies[oid] = OperatorPolicy(operator=oid, iot=iot, discount=discount)

    groups: Dict[str, Group] = {}
    membership: Dict[str, str] = {}
    for i, entry in enumerate(raw.get("groups") or []):
        path = f"groups[{i}]"
        if not isinstance(entry, dict):
            check.fail(path, "expected object")
            continue
        gid = entry.get("id")
        if not check.is_str(gid, f"{path}.id"):
            continue
        if gid in groups or gid in operators or gid in countries:
            check.fail(f"{path}.id", f"group id {gid!r} collides")
            continue
        kind = entry.get("kind", "group")
        if kind not in ("group", "broker"):
            check.fail(f"{path}.kind", f"expected group or broker, got {kind!r}")
            continue
        members: List[str] = []
        for op in entry.get("members") or []:
            if op not in operators:
                check.fail(f"{path}.members", f"unknown operator {op!r}")
            elif op in membership:
                check.fail(f"{path}.members", f"{op!r} already belongs to {membership[op]!r}")
            else:
                membership[op] = gid
                members.append(op)
        if not members:
            check.fail(f"{path}.members", "group needs at least one member")
            continue
        groups[gid] = Group(id=gid, members=tuple(members), kind=kind)

    steering_active_from: Dict[str, int] = {}
    steering_raw = raw.get("steering") or {}
    for oid, start in (steering_raw.get("active_from") or {}).items():
        path = f"steering.active_from[{oid}]"
        if oid not in operators:
            check.fail(path, f"unknown operator {oid!r}")
            continue
        if check.is_int(start, path, 0):
            steering_active_from[oid] = start

    nond_raw = raw.get("nondiscrimination") or {}
    flag = nond_raw.get("flag", False)
    if not isinstance(flag, bool):
        check.fail("nondiscrimination.flag", "expected boolean")
        flag = False

    benchmarks: Dict[str, Money] = {}
    for i, entry in enumerate(raw["benchmarks"] or []):
        path = f"benchmarks[{i}]"
        if not isinstance(entry, dict):
            check.fail(path, "expected object")
            continue
        cid = entry.get("country")
        price = entry.get("nonroamed_micro_per_min")
        if check.is_str(cid, f"{path}.country") and check.is_int(price, f"{path}.nonroamed_micro_per_min", 1):
            if cid not in countries:
                check.fail(f"{path}.country", f"unknown country {cid!r}")
            elif cid in benchmarks:
                check.fail(f"{path}.country", f"duplicate benchmark for {cid!r}")
            else:
                benchmarks[cid] = price
    for cid in countries:
        if cid not in benchmarks:
            check.fail("benchmarks", f"country {cid!r} has no non-roamed benchmark")

    if check.errors:
        raise ValidationError(check.errors)

    return Scenario(
        horizon=horizon,
        seed=seed,
        mode=mode,
        currency_note=currency_note if isinstance(currency_note, str) else "",
        markup_bound=(lo, hi),
        countries=countries,
        operators=operators,
        tariffs=tariffs,
        headlines=headlines,
        zone_maps=zone_maps,
        transit=TransitTariff.from_entries(transit_entries),
        retail=retail,
        profiles=profiles,
        demand=demand,
        policies=policies,
        groups=groups,
        steering_active_from=steering_active_from,
        nondiscrimination=flag,
        benchmarks=benchmarks,
    )


# === canonical export (normalised form; load(export(s)) == s) ===


def _trajectory_to_json(trajectory: Trajectory) -> Dict[str, str]:
    return {str(at): str(value) for at, value in trajectory.points}


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    return {
        "meta": {
            "horizon": scenario.horizon,
            "seed": scenario.seed,
            "mode": scenario.mode.value,
            "currency_note": scenario.currency_note,
            "markup_bound": [str(scenario.markup_bound[0]), str(scenario.markup_bound[1])],
        },
        "countries": [
            {"id": c.id, "fixed_operator": c.fixed_operator}
            for c in sorted(scenario.countries.values(), key=lambda c: c.id)
        ],
        "operators": [
            {
                "id": op.id,
                "country": op.country,
                "band": op.band.value,
                "coverage": _trajectory_to_json(op.coverage),
                "wholesale_cost_micro_per_min": op.wholesale_cost,
            }
            for op in sorted(scenario.operators.values(), key=lambda o: o.id)
        ],
        "tariffs": [
            {
                "owner": t.owner,
                "billing_unit_s": t.billing_unit_s,
                "headline_micro_per_min": scenario.headlines[t.owner],
                "setup_fee_micro": t.setup_fee,
                "mt_rate_micro_per_unit": t.mt_rate,
                "valid_from": t.valid_from,
                "zone_rates": [
                    {
                        "zone": zone,
                        "period": period.value,
                        "term_type": term.value,
                        "rate_micro_per_unit": rate,
                    }
                    for (zone, period, term), rate in t.zone_rates
                ],
            }
            for t in sorted(scenario.tariffs.values(), key=lambda t: t.owner)
        ],
        "zone_maps": [
            {
                "owner": z.owner,
                "default_zone": z.default_zone,
                "entries": [
                    {"country": country, "term_type": term.value, "zone": zone}
                    for (country, term), zone in z.entries
                ],
            }
            for z in sorted(scenario.zone_maps.values(), key=lambda z: z.owner)
        ],
        "transit": [
            {
                "country": t.country,
                "transit_micro_per_min": t.transit,
                "fixed_termination_micro_per_min": t.fixed_termination,
                "mt_termination_micro_per_min": t.mt_termination,
                "intl_retail_micro_per_min": t.intl_retail,
            }
            for t in scenario.transit.entries
        ],
        "retail": [_retail_to_json(scheme) for _, scheme in sorted(scenario.retail.items())],
        "sim_profiles": [
            {
                "home_op": spec.home_operator,
                "preferred": {country: list(ops) for country, ops in spec.preferred},
                "dual_band_mix": _trajectory_to_json(spec.dual_band_mix),
                "manual_propensity": str(spec.manual_propensity),
            }
            for _, spec in sorted(scenario.profiles.items())
        ],
        "demand": [
            {
                "home_op": params.home_operator,
                "visited_country": params.visited_country,
                "base_minutes": params.base_minutes,
                "reference_price_micro_per_min": params.reference_price,
                "elasticity": str(params.elasticity),
                "mt_ratio": str(params.mt_ratio),
                "substitution_share": str(params.substitution_share),
                "call_duration_mean_s": params.call_duration_mean_s,
                "peak_fraction": str(params.peak_fraction),
                "destination_mix": [
                    {"country": dest.country, "term_type": dest.term_type.value, "weight": str(weight)}
                    for dest, weight in params.destination_mix
                ],
            }
            for _, params in sorted(scenario.demand.items())
        ],
        "policies": [
            _policy_to_json(policy) for _, policy in sorted(scenario.policies.items())
        ],
        "groups": [
            {"id": g.id, "kind": g.kind, "members": list(g.members)}
            for _, g in sorted(scenario.groups.items())
        ],
        "steering": {"active_from": dict(sorted(scenario.steering_active_from.items()))},
        "nondiscrimination": {"flag": scenario.nondiscrimination},
        "benchmarks": [
            {"country": cid, "nonroamed_micro_per_min": price}
            for cid, price in sorted(scenario.benchmarks.items())
        ],
    }


def _retail_to_json(scheme: RetailScheme) -> Dict[str, Any]:
    mt_prices = [
        {"country": country, "micro_per_min": price} for country, price in scheme.mt_prices
    ]
    if isinstance(scheme, MarkupRetail):
        return {
            "home_op": scheme.home_operator,
            "scheme": "markup",
            "markup": str(scheme.markup),
            "mt_prices": mt_prices,
        }
    by_group: Dict[str, List[str]] = {}
    for country, gid in scheme.country_groups:
        by_group.setdefault(gid, []).append(country)
    return {
        "home_op": scheme.home_operator,
        "scheme": "single_rate",
        "rate_groups": [
            {"id": gid, "micro_per_min": rate, "countries": sorted(by_group.get(gid, []))}
            for gid, rate in scheme.group_rates
        ],
        "mt_prices": mt_prices,
    }


def _policy_to_json(policy: OperatorPolicy) -> Dict[str, Any]:
    if isinstance(policy.iot, Hold):
        iot: Dict[str, Any] = {"kind": "hold"}
    elif isinstance(policy.iot, Undercut):
        iot = {
            "kind": "undercut",
            "delta": str(policy.iot.delta),
            "floor_micro_per_min": policy.iot.floor,
        }
    else:
        iot = {
            "kind": "best_response",
            "grid_micro_per_min": list(policy.iot.grid),
            "cost_micro_per_min": policy.iot.cost,
        }
    entry: Dict[str, Any] = {"operator": policy.operator, "iot": iot}
    if policy.discount is not None:
        entry["discount"] = {
            "tiers": [
                {
                    "kind": tier.kind.value,
                    "threshold": (
                        int(tier.threshold) if tier.kind is TierKind.VOLUME else str(tier.threshold)
                    ),
                    "rate": str(tier.rate),
                }
                for tier in policy.discount.tiers
            ],
            "requires_preferred": policy.discount.requires_preferred,
        }
    return entry


def scenario_to_json(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True) + "\n"
