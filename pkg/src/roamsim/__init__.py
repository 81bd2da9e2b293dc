"""Deterministic agent simulator of international roaming markets.

Wholesale tariffs, inter-operator settlement, SIM-driven network selection,
price-blind roamer demand and operator pricing strategy, with exact integer
money end to end.
"""

from .demand import Cdr, DemandParams, Mode, generate_calls, perceived_price, roaming_volume
from .money import Money, parse_fraction, round_half_up, scale_money
from .scenario import (
    ParseError,
    Scenario,
    ValidationError,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    scenario_to_json,
)
from .selection import (
    EmptyNetworkList,
    SimProfile,
    SteeringUnavailable,
    VisitedNetwork,
    expected_shares,
    ota_reprogram,
    select_network_sampled,
)
from .settlement import (
    ConservationReport,
    DiscountAgreement,
    Invoice,
    LedgerEntry,
    OverlappingTiers,
    Tier,
    TierKind,
    TransitTariff,
    build_invoices,
    verify_conservation,
)
from .sim import (
    ExperimentPreconditionViolated,
    ExperimentReport,
    MetricsRow,
    RunResult,
    externality_experiment,
    run,
)
from .strategy import (
    BestResponse,
    Hold,
    InfoCentreView,
    Undercut,
    decide_iot,
    enforce_nondiscrimination,
    evaluate_offer,
    observe_iots,
    propose_discount,
)
from .tariff import (
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
    rate_retail_mt,
    rate_wholesale_mo,
    rate_wholesale_mt,
)

__version__ = "0.1.0"
