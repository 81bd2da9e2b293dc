import dataclasses
from fractions import Fraction

import pytest

from roamsim.demand import Mode
from roamsim.sim import (
    ExperimentPreconditionViolated,
    OtaEvent,
    externality_experiment,
    run,
)

from conftest import build, minimal_raw


def test_baseline_is_stationary(baseline_scenario):
    res = run(baseline_scenario)
    assert res.seed == 42
    assert res.headline_history == [{"A1": 1000000, "A2": 1250000, "B1": 1000000}] * 6
    for t in range(6):
        assert res.volumes[(t, "B1", "A")] == 10000
        assert res.shares[(t, "B1", "A")] == {
            "A1": Fraction(4, 5),
            "A2": Fraction(1, 5),
        }
        assert res.op_minutes[(t, "A1")] == 8000
        assert res.op_minutes[(t, "A2")] == 2000


def test_baseline_period_metrics(baseline_scenario):
    res = run(baseline_scenario)
    row = res.metrics_for(0, "A", "A1")
    assert row.wholesale_share == Fraction(4, 5)
    assert row.cr2 == 1
    assert row.avg_retail == 1_260_000
    assert row.ratio_vs_benchmark == Fraction(21, 5)
    assert row.wholesale_revenue == 8_000_000_000
    assert row.wholesale_profit == 6_000_000_000
    assert row.min_headline == 1_000_000
    assert res.min_headline(0, "A") == 1_000_000
    with pytest.raises(KeyError):
        res.metrics_for(0, "A", "nope")


def test_baseline_invoices(baseline_scenario):
    res = run(baseline_scenario)
    p0 = [i for i in res.invoices if i.period == 0]
    assert [(i.issuer, i.counterparty, i.gross, i.net, i.minutes) for i in p0] == [
        ("A1", "B1", 8_000_000_000, 8_000_000_000, 8000),
        ("A2", "B1", 2_500_000_000, 2_500_000_000, 2000),
    ]
    assert not res.negotiation
    assert not res.ota_events
    assert not res.agreements


def test_conservation_holds_every_period(baseline_scenario, steering_scenario):
    for scenario in (baseline_scenario, steering_scenario):
        res = run(scenario)
        assert len(res.conservation) == scenario.horizon
        assert all(r.balanced for r in res.conservation)


def test_runs_are_deterministic(baseline_scenario):
    a = run(baseline_scenario)
    b = run(baseline_scenario)
    assert a.ledger == b.ledger
    assert a.metrics == b.metrics
    assert a.invoices == b.invoices


def test_monte_carlo_mode_is_seed_deterministic(baseline_scenario):
    mc = dataclasses.replace(baseline_scenario, mode=Mode.MONTE_CARLO)
    a = run(mc, seed=5)
    b = run(mc, seed=5)
    assert a.ledger == b.ledger
    assert a.cdrs == b.cdrs
    assert all(r.balanced for r in a.conservation)
    c = run(mc, seed=6)
    assert a.ledger != c.ledger


def test_steering_transition_negotiates_once(steering_scenario):
    res = run(steering_scenario)
    accepts = [r for r in res.negotiation if r.decision == "accept"]
    assert [(r.period, r.visited_operator, r.counterparty) for r in accepts] == [
        (6, "V2", "H1")
    ]
    assert res.ota_events == [
        OtaEvent(period=6, home_operator="H1", country="V", new_list=("V2", "V1"))
    ]
    assert [(a.visited_operator, a.counterparty, a.active_from) for a in res.agreements] == [
        ("V2", "H1", 6)
    ]
    # offers before the capability turns on are declined, never repeated after
    rejects = [r for r in res.negotiation if r.decision == "reject"]
    assert {r.period for r in rejects} == set(range(6))
    assert all(r.reason == "steering capability off" for r in rejects)


def test_steering_discount_shows_up_in_invoices(steering_scenario):
    res = run(steering_scenario)
    discounted = [i for i in res.invoices if i.discount_applied > 0]
    assert len(discounted) == 30
    first = discounted[0]
    assert (first.period, first.issuer, first.counterparty) == (6, "V2", "H1")
    assert first.gross == 755_585_937
    assert first.discount_applied == 151_117_187
    assert first.net == 604_468_750
    assert first.minutes == 667
    assert first.discount_applied == first.gross - first.net


def test_steering_redirects_share_and_headline(steering_scenario):
    on = run(steering_scenario)
    off = run(dataclasses.replace(steering_scenario, steering_active_from={}))
    last = steering_scenario.horizon - 1
    assert on.shares[(last, "H1", "V")]["V2"] == 1
    assert off.shares[(last, "H1", "V")]["V2"] == Fraction(1, 19)
    assert on.min_headline(last, "V") == 1_450_000
    assert off.min_headline(last, "V") == 1_500_000


def spread_raw():
    """Three countries, two home ops roaming in P, P1 offering discounts."""
    raw = minimal_raw()
    raw["countries"].append({"id": "R", "fixed_operator": "RFIX"})
    raw["operators"].append(
        {"id": "R1", "country": "R", "band": "gsm900", "coverage": "1",
         "wholesale_cost_micro_per_min": 100000}
    )
    raw["tariffs"].append(dict(raw["tariffs"][0], owner="R1"))
    raw["zone_maps"].append({"owner": "R1", "default_zone": "z", "entries": []})
    raw["transit"].append(dict(raw["transit"][0], country="R"))
    raw["benchmarks"].append({"country": "R", "nonroamed_micro_per_min": 250000})
    raw["retail"].append(dict(raw["retail"][0], home_op="R1"))
    raw["sim_profiles"].append(dict(raw["sim_profiles"][0], home_op="R1"))
    raw["demand"].append(dict(raw["demand"][0], home_op="R1"))
    raw["policies"] = [
        {"operator": "P1", "iot": {"kind": "hold"},
         "discount": {"tiers": [{"kind": "volume", "threshold": 0, "rate": "1/5"}],
                      "requires_preferred": True}},
    ]
    raw["steering"] = {"active_from": {"Q1": 0}}
    raw["nondiscrimination"] = {"flag": True}
    return raw


def test_nondiscrimination_spreads_accepted_tiers():
    res = run(build(spread_raw()))
    held = {(a.visited_operator, a.counterparty, a.active_from) for a in res.agreements}
    assert held == {("P1", "Q1", 0), ("P1", "R1", 1)}
    clones = [r for r in res.negotiation if r.decision == "clone"]
    assert [(r.period, r.counterparty, r.reason) for r in clones] == [
        (0, "R1", "non-discrimination")
    ]
    # R1 cannot steer, so it rejected the direct offer and only the clone binds
    rejected = [
        r for r in res.negotiation
        if r.decision == "reject" and r.counterparty == "R1"
    ]
    assert rejected and rejected[0].reason == "steering capability off"

    def invoice(period, home):
        (match,) = [
            i for i in res.invoices if i.period == period and i.counterparty == home
        ]
        return match

    assert invoice(0, "Q1").discount_applied > 0
    assert invoice(0, "R1").discount_applied == 0
    assert invoice(1, "R1").discount_applied > 0


def test_externality_experiment_is_share_invariant(baseline_scenario):
    report = externality_experiment(baseline_scenario, "A2", Fraction(1, 10))
    assert report.shares_invariant
    assert report.max_share_delta == 0
    assert report.minutes_by_period[0] == (0, 10000, 10000)
    assert report.minutes_by_period[1:] == [
        (t, 10000, 10244) for t in range(1, 6)
    ]
    assert set(report.profit_delta) == {"A1", "A2"}


def test_externality_experiment_guards():
    with pytest.raises(ValueError):
        externality_experiment(build(minimal_raw()), "ghost", Fraction(1, 10))
    with pytest.raises(ValueError):
        externality_experiment(build(minimal_raw()), "P1", Fraction(1))
    steering = minimal_raw()
    steering["steering"] = {"active_from": {"Q1": 1}}
    with pytest.raises(ExperimentPreconditionViolated):
        externality_experiment(build(steering), "P1", Fraction(1, 10))
    manual = minimal_raw()
    manual["sim_profiles"][0]["manual_propensity"] = "1/10"
    with pytest.raises(ExperimentPreconditionViolated):
        externality_experiment(build(manual), "P1", Fraction(1, 10))
