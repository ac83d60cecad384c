#!/usr/bin/env python3
"""Tests for the source-coding / broadcast-channel duality constructions."""

import math

import numpy as np
import pytest

from duality import (
    CostSpec,
    SbcChannel,
    byp_to_sbc,
    evaluate_sbc,
    extended_joint,
    handoff_solution,
    perturb_channel,
    reverse_from_sbc,
    run_duality,
    sbc_rates,
    sbc_region_check,
    sbc_sum_capacity,
    sbc_to_byp,
)
from config import MARKOV_GRID_TOLERANCE
from errors import ArgumentError, InfeasibleError, PreconditionError
from probcore import JointPMF, entropy, identity_channel
from region import SolverParams, evaluate_channel, minimize_sum_rate

SMALL = SolverParams(grid=8)


@pytest.fixture
def skewed_source():
    """Full-support source whose marginals are not uniform."""
    return JointPMF.from_array([[0.5, 0.1], [0.05, 0.35]])


@pytest.fixture
def lossless_solution(dsbs_025, hamming2):
    return minimize_sum_rate(dsbs_025, hamming2, 0.0, SMALL)


class TestSbcChannel:
    def test_noiseless(self):
        ch = SbcChannel.noiseless(3)
        assert ch.x2_size == 3
        assert ch.det_map.tolist() == [0, 1, 2]

    def test_maps_must_identify_inputs(self):
        ch = SbcChannel.noiseless(2)
        with pytest.raises(ArgumentError):
            SbcChannel(
                ch.input_alphabet, ch.x1_alphabet, ch.xhat_alphabet,
                ch.channel, np.array([0, 0]), np.array([0, 0]),
            )

    def test_perturbation_renormalizes(self):
        ch = perturb_channel(SbcChannel.noiseless(2), 0, 0.5)
        assert np.allclose(ch.channel.mass[0], [2 / 3, 1 / 3])
        assert np.allclose(ch.channel.mass[1], [0.0, 1.0])

    def test_perturbation_arguments(self):
        with pytest.raises(ArgumentError):
            perturb_channel(SbcChannel.noiseless(2), 5, 0.5)
        with pytest.raises(ArgumentError):
            perturb_channel(SbcChannel.noiseless(2), 0, 0.0)


class TestSbcSumCapacity:
    def test_noiseless_unconstrained(self):
        ch = SbcChannel.noiseless(3)
        solution = sbc_sum_capacity(ch, CostSpec((0.0, 0.0, 0.0), math.inf), SMALL)
        assert solution.value == pytest.approx(math.log2(3), abs=1e-4)
        assert solution.form_gap < 1e-9

    def test_zero_budget_pins_the_free_input(self):
        ch = SbcChannel.noiseless(3)
        solution = sbc_sum_capacity(ch, CostSpec((0.0, 1.0, 1.0), 0.0), SMALL)
        assert solution.value == pytest.approx(0.0, abs=1e-6)

    def test_columns_above_budget_stay_candidates(self):
        ch = SbcChannel.noiseless(2)
        solution = sbc_sum_capacity(ch, CostSpec((0.0, 2.0), 1.0), SMALL)
        # every p(x|v) on the grid, including those costing more than W
        assert solution.candidates == 9
        assert float(solution.joint.marginal(1).mass @ [0.0, 2.0]) <= 1.0 + 1e-4
        assert solution.value == pytest.approx(1.0, abs=1e-4)

    def test_budget_below_cheapest_input(self):
        ch = SbcChannel.noiseless(3)
        with pytest.raises(InfeasibleError) as exc_info:
            sbc_sum_capacity(ch, CostSpec((1.0, 1.0, 1.0), 0.5), SMALL)
        assert exc_info.value.min_cost == 1.0

    def test_evaluate_fixed_distributions(self):
        ch = SbcChannel.noiseless(2)
        solution = evaluate_sbc(ch, [1.0], [[0.5, 0.5]])
        assert solution.value == pytest.approx(1.0, abs=1e-12)
        assert sbc_rates(solution) == pytest.approx((1.0, 0.0, 1.0, 0.0), abs=1e-12)

    def test_region_check_flags_excess_rate(self):
        solution = evaluate_sbc(SbcChannel.noiseless(2), [1.0], [[0.5, 0.5]])
        checks = sbc_region_check(solution, (1.5, 0.0, 1.5, 0.0))
        assert not checks["R1_le_H_X1"]
        assert checks["sums_match"]


class TestForwardConstruction:
    def test_extended_joint_marginal(self, lossless_solution):
        p4 = extended_joint(lossless_solution)
        assert p4.arity == 4
        assert np.allclose(p4.marginal((0, 1, 2)).mass, lossless_solution.joint.mass)

    def test_lossless_channel_and_cost(self, dsbs_025, lossless_solution):
        ch, cost = byp_to_sbc(dsbs_025, lossless_solution)
        assert ch.input_alphabet.size == 4
        # X2 is read off the reconstruction component
        for x in range(4):
            assert ch.channel.mass[x, ch.xhat_map[x]] == pytest.approx(1.0)
        assert cost.W == pytest.approx(entropy(dsbs_025, (0, 1)), abs=1e-9)

    def test_broken_markov_chain_raises(self, dsbs_025, hamming2):
        aux = identity_channel(dsbs_025.axes[1])
        solution = evaluate_channel(dsbs_025, aux, np.zeros((2, 2), dtype=int), hamming2)
        with pytest.raises(PreconditionError) as exc_info:
            byp_to_sbc(dsbs_025, solution)
        assert exc_info.value.check == "V->X->(X1,X2)"
        assert exc_info.value.violation > 0.1

    def test_backward_recovers_source(self, dsbs_025, lossless_solution):
        ch, _ = byp_to_sbc(dsbs_025, lossless_solution)
        handoff = handoff_solution(lossless_solution, ch)
        recovered, distortion = sbc_to_byp(ch, handoff)
        assert np.allclose(recovered.mass, dsbs_025.mass, atol=1e-9)
        assert distortion.D == pytest.approx(0.0, abs=1e-9)

    def test_lossy_grid_optimum_violates_forward_precondition(self, dsbs_025, hamming2):
        solution = minimize_sum_rate(dsbs_025, hamming2, 0.1, SMALL)
        with pytest.raises(PreconditionError) as exc_info:
            byp_to_sbc(dsbs_025, solution, tolerance=MARKOV_GRID_TOLERANCE)
        assert exc_info.value.check == "V->X->(X1,X2)"
        assert exc_info.value.violation > 0.1
        assert exc_info.value.tolerance == MARKOV_GRID_TOLERANCE

    def test_handoff_matches_source_sum_rate(self, dsbs_025, lossless_solution):
        ch, _ = byp_to_sbc(dsbs_025, lossless_solution)
        handoff = handoff_solution(lossless_solution, ch)
        assert handoff.value == pytest.approx(lossless_solution.sum_rate, abs=1e-9)


class TestReverseFromSbc:
    def test_markov_optimum_maps_back(self, dsbs_025, lossless_solution):
        ch, _ = byp_to_sbc(dsbs_025, lossless_solution)
        # V = X2; inputs are ordered (x1, xhat2) with xhat2 = x2
        sbc = evaluate_sbc(ch, [0.5, 0.5], [[0.75, 0.0, 0.25, 0.0], [0.0, 0.25, 0.0, 0.75]])
        reverse = reverse_from_sbc(ch, sbc)
        assert reverse.ok
        assert reverse.violation < 1e-12
        assert np.allclose(reverse.source.mass, dsbs_025.mass, atol=1e-12)
        assert reverse.distortion.D == pytest.approx(0.0, abs=1e-12)
        assert reverse.sum_rate == pytest.approx(sbc.value, abs=1e-9)
        assert reverse.sum_rate == pytest.approx(entropy(dsbs_025, (0, 1)), abs=1e-9)

    def test_non_markov_optimum_is_reported(self, dsbs_025, lossless_solution):
        ch, _ = byp_to_sbc(dsbs_025, lossless_solution)
        # V = X1 breaks X1 -> X2 -> V
        sbc = evaluate_sbc(ch, [0.5, 0.5], [[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]])
        reverse = reverse_from_sbc(ch, sbc)
        assert not reverse.ok
        assert reverse.violation == pytest.approx(0.5, abs=1e-12)
        assert reverse.source is None
        assert reverse.to_dict()["ok"] is False


class TestRunDuality:
    def test_lossless_instance(self, dsbs_025, hamming2):
        report = run_duality(dsbs_025, hamming2, 0.0, SMALL)
        assert report.byp_sum_rate == pytest.approx(entropy(dsbs_025, (0, 1)), abs=1e-9)
        assert report.gap < 1e-3
        assert report.gap_ok
        assert report.correlation_match
        assert all(v < 1e-8 for _, v in report.markov_checks[:3])
        assert all(report.sbc_region.values())
        assert report.roundtrip_source_error < 1e-9
        assert report.reverse.ok
        assert report.reverse.sum_rate == pytest.approx(report.sbc_sum_rate, abs=1e-3)
        assert report.reverse.sum_rate == pytest.approx(report.byp_sum_rate, abs=1e-3)
        assert report.reverse.distortion.D == pytest.approx(0.0, abs=1e-6)
        assert np.allclose(report.reverse.source.mass, dsbs_025.mass, atol=1e-3)

    def test_skewed_lossless_instance(self, skewed_source, hamming2):
        report = run_duality(skewed_source, hamming2, 0.0, SMALL)
        # all C(8 + 3, 3) grid columns over the four inputs are offered
        assert report.sbc.candidates == 165
        assert report.sbc_sum_rate > 1.5
        assert report.gap < 0.03
        assert report.gap_ok

    def test_lossy_instance_reports_violation(self, dsbs_025, hamming2):
        with pytest.raises(PreconditionError) as exc_info:
            run_duality(
                dsbs_025, hamming2, 0.1, SMALL, precondition_tolerance=MARKOV_GRID_TOLERANCE
            )
        assert exc_info.value.check == "V->X->(X1,X2)"
        assert exc_info.value.violation > 0.1
        assert "max TV" in str(exc_info.value)

    def test_constant_aux_instance(self, dsbs_025, hamming2):
        report = run_duality(dsbs_025, hamming2, 0.3, SMALL)
        assert report.byp_sum_rate == pytest.approx(1.0, abs=1e-9)
        assert report.sbc_sum_rate == pytest.approx(1.0, abs=1e-4)
        assert report.gap_ok

    def test_perturbed_channel_is_caught(self, dsbs_025, hamming2):
        report = run_duality(dsbs_025, hamming2, 0.0, SMALL, perturb=(0, 0.5))
        assert report.gap > 0.03
        assert not report.gap_ok

    def test_report_dict(self, dsbs_025, hamming2):
        data = run_duality(dsbs_025, hamming2, 0.0, SMALL).to_dict()
        assert {"byp_sum_rate", "sbc_sum_rate", "gap", "markov_checks"} <= set(data)
        assert len(data["markov_checks"]) == 4
        assert data["cost"]["c1"] == 1.0

    def test_precomputed_solution_is_reused(self, dsbs_025, hamming2, lossless_solution, mocker):
        spy = mocker.patch("duality.minimize_sum_rate")
        report = run_duality(dsbs_025, hamming2, 0.0, SMALL, solution=lossless_solution)
        spy.assert_not_called()
        assert report.byp_sum_rate == lossless_solution.sum_rate

    @pytest.mark.slow
    def test_gap_at_default_grid(self, dsbs_025, hamming2):
        report = run_duality(dsbs_025, hamming2, 0.0, SolverParams(grid=32))
        assert report.gap < 0.03
