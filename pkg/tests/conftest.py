import copy
import json
from pathlib import Path

import pytest

from roamsim import load_scenario
from roamsim.scenario import scenario_from_dict

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def baseline_scenario():
    return load_scenario(str(SCENARIOS / "two_country_baseline.json"))


@pytest.fixture(scope="session")
def steering_scenario():
    return load_scenario(str(SCENARIOS / "steering_transition.json"))


@pytest.fixture(scope="session")
def roster_scenario():
    return load_scenario(str(SCENARIOS / "western_europe_roster.json"))


def minimal_raw():
    """Smallest valid scenario dict; tests mutate copies of it."""
    zone_rates = [
        {"zone": "z", "period": p, "term_type": t, "rate_micro_per_unit": 1000000}
        for p in ("peak", "offpeak")
        for t in ("fixed", "mobile")
    ]
    return {
        "meta": {"horizon": 2, "seed": 1, "mode": "expected"},
        "countries": [
            {"id": "P", "fixed_operator": "PFIX"},
            {"id": "Q", "fixed_operator": "QFIX"},
        ],
        "operators": [
            {"id": "P1", "country": "P", "band": "gsm900", "coverage": "1",
             "wholesale_cost_micro_per_min": 100000},
            {"id": "Q1", "country": "Q", "band": "gsm900", "coverage": "1",
             "wholesale_cost_micro_per_min": 100000},
        ],
        "tariffs": [
            {"owner": "P1", "billing_unit_s": 60, "headline_micro_per_min": 1000000,
             "zone_rates": copy.deepcopy(zone_rates)},
            {"owner": "Q1", "billing_unit_s": 60, "headline_micro_per_min": 1000000,
             "zone_rates": copy.deepcopy(zone_rates)},
        ],
        "zone_maps": [
            {"owner": "P1", "default_zone": "z", "entries": []},
            {"owner": "Q1", "default_zone": "z", "entries": []},
        ],
        "transit": [
            {"country": "P", "transit_micro_per_min": 50000,
             "fixed_termination_micro_per_min": 100000,
             "mt_termination_micro_per_min": 150000,
             "intl_retail_micro_per_min": 700000},
            {"country": "Q", "transit_micro_per_min": 50000,
             "fixed_termination_micro_per_min": 100000,
             "mt_termination_micro_per_min": 150000,
             "intl_retail_micro_per_min": 700000},
        ],
        "retail": [
            {"home_op": "Q1", "scheme": "markup", "markup": "1/5",
             "mt_prices": [{"country": "P", "micro_per_min": 900000}]},
        ],
        "sim_profiles": [
            {"home_op": "Q1", "preferred": {"P": ["P1"]},
             "dual_band_mix": "0", "manual_propensity": "0"},
        ],
        "demand": [
            {"home_op": "Q1", "visited_country": "P", "base_minutes": 1000,
             "reference_price_micro_per_min": 1200000, "elasticity": "1",
             "mt_ratio": "0", "substitution_share": "0",
             "call_duration_mean_s": 60, "peak_fraction": "1",
             "destination_mix": [{"country": "Q", "term_type": "fixed", "weight": "1"}]},
        ],
        "benchmarks": [
            {"country": "P", "nonroamed_micro_per_min": 250000},
            {"country": "Q", "nonroamed_micro_per_min": 250000},
        ],
    }


def build(raw):
    return scenario_from_dict(raw)


@pytest.fixture
def minimal_scenario():
    return build(minimal_raw())


def write_json(tmp_path, raw, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw, indent=2))
    return str(path)
