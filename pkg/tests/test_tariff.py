from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from roamsim.tariff import (
    Band,
    CallDescriptor,
    Destination,
    Direction,
    IotSchedule,
    MarkupRetail,
    PeriodClass,
    RatingError,
    SingleRateRetail,
    TermType,
    UnmappedDestination,
    ZoneMap,
    billed_minutes,
    billed_units,
    rate_retail_mo,
    rate_retail_mo_aggregate,
    rate_retail_mt,
    rate_wholesale_mo,
    rate_wholesale_mo_aggregate,
    rate_wholesale_mt,
)


def schedule_30s(setup=100000):
    rates = {
        ("eu", pc, tt): 250000
        for pc in PeriodClass
        for tt in TermType
    }
    return IotSchedule.from_mapping(
        owner="V1", billing_unit_s=30, zone_rates=rates, setup_fee=setup, mt_rate=50000
    )


def zone_map():
    return ZoneMap.from_mapping("V1", {}, default_zone="eu")


def mo_call(duration_s, dest_country="H"):
    return CallDescriptor(
        direction=Direction.MO,
        home_operator="H1",
        visited_operator="V1",
        home_country="H",
        visited_country="V",
        period_class=PeriodClass.PEAK,
        duration_s=duration_s,
        destination=Destination(dest_country, TermType.FIXED),
    )


# --- billing granularity


def test_billed_units_exact_multiple():
    assert billed_units(90, 30) == 3


def test_billed_units_rounds_up():
    assert billed_units(91, 30) == 4


def test_billed_units_minimum_one():
    assert billed_units(0, 60) == 1


def test_billed_units_boundary():
    assert billed_units(60, 60) == 1
    assert billed_units(61, 60) == 2


def test_billed_minutes():
    assert billed_minutes(0) == 1
    assert billed_minutes(59) == 1
    assert billed_minutes(61) == 2


def test_negative_duration_rejected():
    with pytest.raises(ValueError):
        billed_units(-1, 30)


# --- schedules


def test_billing_unit_must_divide_minute():
    with pytest.raises(ValueError):
        IotSchedule.from_mapping(
            owner="V1",
            billing_unit_s=7,
            zone_rates={("eu", PeriodClass.PEAK, TermType.FIXED): 1},
        )


def test_missing_zone_rate_raises():
    sched = schedule_30s()
    with pytest.raises(RatingError):
        sched.zone_rate("nowhere", PeriodClass.PEAK, TermType.FIXED)


def test_scaled_schedule_rounds_each_rate():
    sched = schedule_30s(setup=99999)
    scaled = sched.scaled(Fraction(1, 3))
    assert dict(scaled.zone_rates)[("eu", PeriodClass.PEAK, TermType.FIXED)] == 83333
    assert scaled.setup_fee == 33333
    assert scaled.mt_rate == 16667


def test_scaled_identity():
    sched = schedule_30s()
    assert sched.scaled(Fraction(1)) == sched


def test_zone_map_entry_beats_default():
    zm = ZoneMap.from_mapping(
        "V1", {("H", TermType.FIXED): "near"}, default_zone="far"
    )
    assert zm.zone_for(Destination("H", TermType.FIXED)) == "near"
    assert zm.zone_for(Destination("H", TermType.MOBILE)) == "far"


def test_zone_map_without_default_raises():
    zm = ZoneMap.from_mapping("V1", {("H", TermType.FIXED): "near"})
    with pytest.raises(UnmappedDestination):
        zm.zone_for(Destination("X", TermType.FIXED))


# --- per-call rating


def test_wholesale_mo_with_setup_fee():
    # 90s on a 30s unit: 3 units x 250000 + 100000 setup
    charge = rate_wholesale_mo(schedule_30s(), zone_map(), mo_call(90))
    assert charge == 850000


def test_wholesale_mo_minimum_unit():
    charge = rate_wholesale_mo(schedule_30s(), zone_map(), mo_call(0))
    assert charge == 350000


def test_wholesale_mt_uses_unit_rate():
    call = CallDescriptor(
        direction=Direction.MT,
        home_operator="H1",
        visited_operator="V1",
        home_country="H",
        visited_country="V",
        period_class=PeriodClass.PEAK,
        duration_s=61,
    )
    # 61s -> 3 units of 30s at 50000
    assert rate_wholesale_mt(schedule_30s(), call) == 150000


def test_wholesale_mt_zero_without_mt_rate():
    sched = IotSchedule.from_mapping(
        owner="V1",
        billing_unit_s=30,
        zone_rates={("eu", pc, tt): 250000 for pc in PeriodClass for tt in TermType},
    )
    call = CallDescriptor(
        direction=Direction.MT,
        home_operator="H1",
        visited_operator="V1",
        home_country="H",
        visited_country="V",
        period_class=PeriodClass.PEAK,
        duration_s=600,
    )
    assert rate_wholesale_mt(sched, call) == 0


def test_markup_retail_on_wholesale():
    scheme = MarkupRetail(home_operator="H1", markup=Fraction(1, 5), mt_prices=())
    assert rate_retail_mo(scheme, 850000, mo_call(90)) == 1020000
    assert rate_retail_mo(scheme, 1000000, mo_call(60)) == 1200000


def test_single_rate_retail_bills_whole_minutes():
    scheme = SingleRateRetail(
        home_operator="H1",
        group_rates=(("zoneA", 500000),),
        country_groups=(("V", "zoneA"),),
        mt_prices=(("V", 300000),),
    )
    assert rate_retail_mo(scheme, 999999, mo_call(61)) == 1000000
    call = CallDescriptor(
        direction=Direction.MT,
        home_operator="H1",
        visited_operator="V1",
        home_country="H",
        visited_country="V",
        period_class=PeriodClass.PEAK,
        duration_s=61,
    )
    assert rate_retail_mt(scheme, call) == 600000


def test_call_descriptor_rejects_same_country_roaming():
    with pytest.raises(ValueError):
        CallDescriptor(
            direction=Direction.MO,
            home_operator="H1",
            visited_operator="V1",
            home_country="V",
            visited_country="V",
            period_class=PeriodClass.PEAK,
            duration_s=60,
            destination=Destination("V", TermType.FIXED),
        )


def test_mo_needs_destination():
    with pytest.raises(ValueError):
        CallDescriptor(
            direction=Direction.MO,
            home_operator="H1",
            visited_operator="V1",
            home_country="H",
            visited_country="V",
            period_class=PeriodClass.PEAK,
            duration_s=60,
        )


# --- aggregates agree with per-call sums on whole-minute traffic


def test_aggregate_matches_per_call_sum():
    sched = schedule_30s()
    zm = zone_map()
    n_calls = 7
    per_call = rate_wholesale_mo(sched, zm, mo_call(60)) * n_calls
    agg = rate_wholesale_mo_aggregate(
        sched, zm, Destination("H", TermType.FIXED), PeriodClass.PEAK,
        minutes=Fraction(n_calls), calls=Fraction(n_calls),
    )
    assert agg == per_call


def test_aggregate_retail_markup():
    scheme = MarkupRetail(home_operator="H1", markup=Fraction(1, 5), mt_prices=())
    assert rate_retail_mo_aggregate(scheme, 850000, "V", Fraction(3)) == 1020000


# --- zonal uniformity: destinations in one zone are priced identically


@given(
    duration=st.integers(min_value=0, max_value=7200),
    rate=st.integers(min_value=0, max_value=5_000_000),
    unit=st.sampled_from([1, 5, 10, 15, 20, 30, 60]),
)
def test_same_zone_same_charge(duration, rate, unit):
    sched = IotSchedule.from_mapping(
        owner="V1",
        billing_unit_s=unit,
        zone_rates={("z", pc, tt): rate for pc in PeriodClass for tt in TermType},
        setup_fee=40000,
    )
    zm = ZoneMap.from_mapping(
        "V1", {("H", TermType.FIXED): "z", ("X", TermType.FIXED): "z"}
    )
    a = rate_wholesale_mo(sched, zm, mo_call(duration, "H"))
    b = rate_wholesale_mo(sched, zm, mo_call(duration, "X"))
    assert a == b


@given(duration=st.integers(min_value=0, max_value=7200))
def test_charge_monotone_in_duration(duration):
    sched = schedule_30s()
    zm = zone_map()
    shorter = rate_wholesale_mo(sched, zm, mo_call(duration))
    longer = rate_wholesale_mo(sched, zm, mo_call(duration + 30))
    assert longer >= shorter
