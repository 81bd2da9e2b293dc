from fractions import Fraction

import pytest

from roamsim.demand import DemandParams
from roamsim.selection import SimProfile, VisitedNetwork
from roamsim.settlement import DiscountAgreement, Tier, TierKind
from roamsim.strategy import (
    BestResponse,
    HomeMarket,
    Hold,
    InfoCentreView,
    InvalidTiers,
    OfferContext,
    StrategyContext,
    Undercut,
    decide_iot,
    enforce_nondiscrimination,
    evaluate_offer,
    observe_iots,
    propose_discount,
)
from roamsim.tariff import Band, Destination, MarkupRetail, TermType


def net(op, cov, band=Band.GSM900):
    return VisitedNetwork(operator=op, band=band, coverage=Fraction(cov))


def demand(base=1000, reference=1_200_000, elasticity=1):
    return DemandParams(
        home_operator="H1",
        visited_country="X",
        base_minutes=base,
        reference_price=reference,
        elasticity=Fraction(elasticity),
        mt_ratio=Fraction(0),
        substitution_share=Fraction(0),
        call_duration_mean_s=60,
        peak_fraction=Fraction(1),
        destination_mix=((Destination("HOME", TermType.FIXED), Fraction(1)),),
    )


def market(preferred, *, elasticity=1, steering=False, dual="1"):
    profile = SimProfile.create("H1", {"X": preferred}, Fraction(dual), Fraction(0))
    retail = MarkupRetail("H1", Fraction(1, 5))
    return HomeMarket(
        profile=profile,
        params=demand(elasticity=elasticity),
        retail=retail,
        steering_active=steering,
    )


def ctx_for(operator, networks, markets, rivals=(), **over):
    return StrategyContext(
        operator=operator,
        country="X",
        networks=tuple(networks),
        rival_operators=tuple(rivals),
        home_markets=tuple(markets),
        **over,
    )


def test_observe_iots_period_zero_uses_initial_levels():
    view = observe_iots({"A": 10, "B": 20}, [], "A", 0)
    assert view.level("A") == 10
    assert view.as_dict() == {"A": 10, "B": 20}
    with pytest.raises(KeyError):
        view.level("zzz")


def test_observe_iots_lags_one_period():
    history = [{"A": 11, "B": 21}, {"A": 12, "B": 22}]
    view = observe_iots({"A": 10, "B": 20}, history, "B", 2)
    assert view.period == 2
    assert view.as_dict() == {"A": 12, "B": 22}


def test_hold_keeps_current_level():
    view = observe_iots({"A": 10, "B": 20}, [], "A", 0)
    assert decide_iot(Hold(), view, ctx_for("A", [net("A", "1")], [])) == 10


def test_undercut_prices_below_cheapest_rival():
    view = observe_iots({"A": 1_000_000, "B": 1_200_000, "C": 1_500_000}, [], "A", 0)
    ctx = ctx_for("A", [net("A", "1")], [], rivals=("B", "C"))
    assert decide_iot(Undercut(Fraction(1, 4), 200_000), view, ctx) == 900_000


def test_undercut_respects_floor():
    view = observe_iots({"A": 1_000_000, "B": 210_000}, [], "A", 0)
    ctx = ctx_for("A", [net("A", "1")], [], rivals=("B",))
    assert decide_iot(Undercut(Fraction(1, 4), 200_000), view, ctx) == 200_000


def test_undercut_without_rivals_holds():
    view = observe_iots({"A": 1_000_000}, [], "A", 0)
    ctx = ctx_for("A", [net("A", "1")], [])
    assert decide_iot(Undercut(Fraction(1, 4), 200_000), view, ctx) == 1_000_000


def test_policy_validation():
    with pytest.raises(ValueError):
        Undercut(Fraction(1), 0)
    with pytest.raises(ValueError):
        Undercut(Fraction(1, 2), -1)
    with pytest.raises(ValueError):
        BestResponse((), 0)
    with pytest.raises(ValueError):
        BestResponse((100, 100), 0)
    with pytest.raises(ValueError):
        BestResponse((100, 200), -1)


def test_best_response_without_demand_ties_to_lowest_level():
    view = observe_iots({"D1": 1_000_000}, [], "D1", 0)
    ctx = ctx_for("D1", [net("D1", "1")], [])
    policy = BestResponse(grid=(400_000, 600_000, 800_000), cost=300_000)
    assert decide_iot(policy, view, ctx) == 400_000


def test_best_response_finds_interior_optimum():
    # elasticity 2 demand on a monopoly network peaks profit near twice cost
    view = observe_iots({"D1": 1_000_000}, [], "D1", 0)
    ctx = ctx_for("D1", [net("D1", "1")], [market(["D1"], elasticity=2)])
    policy = BestResponse(grid=(400_000, 600_000, 800_000, 1_000_000), cost=300_000)
    assert decide_iot(policy, view, ctx) == 600_000


def test_best_response_anticipates_steering():
    # unlisted challenger: without steering only the residual share reaches it,
    # so the corner of the grid wins; with the home op steering to the cheapest
    # headline, pricing just under the incumbent captures the whole market
    networks = [net("W1", "9/10"), net("W2", "1")]
    view = observe_iots({"W1": 1_000_000, "W2": 1_500_000}, [], "W2", 0)
    grid = (600_000, 900_000, 1_500_000)
    unsteered = ctx_for("W2", networks, [market(["W1"], steering=False)], rivals=("W1",))
    steered = ctx_for("W2", networks, [market(["W1"], steering=True)], rivals=("W1",))
    policy = BestResponse(grid=grid, cost=300_000)
    assert decide_iot(policy, view, unsteered) == 1_500_000
    assert decide_iot(policy, view, steered) == 900_000


def test_best_response_steering_belief_nets_out_own_discounts():
    # the decider knows its own granted rebate keeps it effectively cheapest
    networks = [net("W1", "9/10"), net("W2", "1")]
    view = observe_iots({"W1": 1_000_000, "W2": 1_500_000}, [], "W2", 0)
    granted = DiscountAgreement(
        visited_operator="W2",
        counterparty="H1",
        tiers=(Tier(TierKind.VOLUME, Fraction(0), Fraction(2, 5)),),
        requires_preferred=False,
    )
    ctx = ctx_for(
        "W2", networks, [market(["W1"], steering=True)],
        rivals=("W1",), own_agreements=(granted,),
    )
    policy = BestResponse(grid=(600_000, 900_000, 1_500_000), cost=300_000)
    # 1.5M net of 40% is 900k < W1's 1M, so the corner stays steered-in
    assert decide_iot(policy, view, ctx) == 1_500_000


def test_propose_discount_sorts_and_validates():
    tiers = [
        Tier(TierKind.VOLUME, Fraction(500), Fraction(1, 5)),
        Tier(TierKind.VOLUME, Fraction(100), Fraction(1, 10)),
    ]
    offer = propose_discount("V1", "H1", tiers, active_from=3)
    assert [t.threshold for t in offer.tiers] == [Fraction(100), Fraction(500)]
    assert offer.active_from == 3
    assert offer.requires_preferred
    with pytest.raises(InvalidTiers):
        propose_discount("V1", "H1", [])
    with pytest.raises(InvalidTiers):
        propose_discount("V1", "H1", [tiers[0], tiers[0]])


def offer_ctx(preferred, networks, levels, held=()):
    profile = SimProfile.create("H1", {"X": preferred}, Fraction(1), Fraction(0))
    return OfferContext(
        country="X",
        profile=profile,
        networks=tuple(networks),
        view_levels=levels,
        retail=MarkupRetail("H1", Fraction(1, 5)),
        held_agreements=tuple(held),
    )


def flat_offer(visited, rate):
    return DiscountAgreement(
        visited_operator=visited,
        counterparty="H1",
        tiers=(Tier(TierKind.VOLUME, Fraction(0), Fraction(rate)),),
        requires_preferred=True,
    )


def test_offer_rejected_without_capability():
    ctx = offer_ctx(["V1"], [net("V1", "1")], {"V1": 1_200_000})
    decision = evaluate_offer("H1", flat_offer("V1", "1/5"), False, ctx)
    assert not decision.accepted
    assert decision.ota is None


def test_offer_context_home_operator_must_match():
    ctx = offer_ctx(["V1"], [net("V1", "1")], {"V1": 1_200_000})
    with pytest.raises(ValueError):
        evaluate_offer("H2", flat_offer("V1", "1/5"), True, ctx)


def test_offer_accepted_on_strict_cost_cut_with_ota():
    networks = [net("V1", "1"), net("V2", "1")]
    levels = {"V1": 1_200_000, "V2": 1_200_000}
    ctx = offer_ctx(["V1"], networks, levels)
    decision = evaluate_offer("H1", flat_offer("V2", "1/5"), True, ctx)
    assert decision.accepted
    assert decision.ota.new_list == ("V2", "V1")
    assert decision.current_cost == 1_200_000
    assert decision.offer_cost == 960_000


def test_offer_with_no_discount_is_not_an_improvement():
    networks = [net("V1", "1"), net("V2", "1")]
    levels = {"V1": 1_200_000, "V2": 1_200_000}
    decision = evaluate_offer(
        "H1", flat_offer("V2", "0"), True, offer_ctx(["V1"], networks, levels)
    )
    assert not decision.accepted
    assert decision.reason == "no strict cost improvement"


def test_offer_from_incumbent_head_accepts_without_ota():
    ctx = offer_ctx(["V1"], [net("V1", "1")], {"V1": 1_200_000})
    decision = evaluate_offer("H1", flat_offer("V1", "1/5"), True, ctx)
    assert decision.accepted
    assert decision.ota is None


def test_offer_serving_no_mass_is_rejected():
    # single-band fleet cannot camp on a GSM1800-only country
    profile = SimProfile.create("H1", {"X": []}, Fraction(0), Fraction(0))
    ctx = OfferContext(
        country="X",
        profile=profile,
        networks=(net("V2", "1", band=Band.GSM1800),),
        view_levels={"V2": 1_200_000},
        retail=MarkupRetail("H1", Fraction(1, 5)),
    )
    decision = evaluate_offer("H1", flat_offer("V2", "1/5"), True, ctx)
    assert not decision.accepted
    assert decision.reason == "offer serves no mass"


def test_held_preferred_conditioned_discount_counts_only_at_head():
    # the incumbent's held rebate vanishes once the list head moves, which
    # makes a rival's matching offer an improvement only if it beats the
    # incumbent's effective rate on the new head
    networks = [net("V1", "1"), net("V2", "1")]
    levels = {"V1": 1_200_000, "V2": 1_200_000}
    held = [flat_offer("V1", "1/4")]
    ctx = offer_ctx(["V1"], networks, levels, held=held)
    worse = evaluate_offer("H1", flat_offer("V2", "1/5"), True, ctx)
    assert not worse.accepted
    better = evaluate_offer("H1", flat_offer("V2", "1/3"), True, ctx)
    assert better.accepted


def test_nondiscrimination_clones_to_all_partners_next_period():
    tiers = (Tier(TierKind.VOLUME, Fraction(100), Fraction(1, 5)),)
    accepted = DiscountAgreement("V2", "H1", tiers, requires_preferred=True, active_from=4)
    clones = enforce_nondiscrimination(
        [accepted], True, partners_by_visited={"V2": ["H1", "H2", "H3"]}, period=4
    )
    assert [(c.counterparty, c.active_from) for c in clones] == [("H2", 5), ("H3", 5)]
    assert all(c.tiers == tiers and c.visited_operator == "V2" for c in clones)


def test_nondiscrimination_skips_already_held_schedules():
    tiers = (Tier(TierKind.VOLUME, Fraction(100), Fraction(1, 5)),)
    held = [
        DiscountAgreement("V2", "H1", tiers),
        DiscountAgreement("V2", "H2", tiers),
    ]
    clones = enforce_nondiscrimination(
        held, True, partners_by_visited={"V2": ["H1", "H2", "H3"]}, period=0
    )
    assert [(c.counterparty, c.active_from) for c in clones] == [("H3", 1)]


def test_nondiscrimination_off_is_a_noop():
    tiers = (Tier(TierKind.VOLUME, Fraction(100), Fraction(1, 5)),)
    held = [DiscountAgreement("V2", "H1", tiers)]
    assert enforce_nondiscrimination(
        held, False, partners_by_visited={"V2": ["H1", "H2"]}, period=0
    ) == []
