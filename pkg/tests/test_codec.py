#!/usr/bin/env python3
"""Tests for the random-binning codec: codebooks, graph induction, encoders,
decoder and the Monte-Carlo harness."""

import numpy as np
import pytest

from bigraph import check_nearly_semi_regular
from codec import (
    CSV_COLUMNS,
    CodebookPair,
    CodecConfig,
    check_degree_events,
    choose_codeword2,
    codebook_size,
    decode,
    degree_params,
    draw_source_block,
    draw_typical_sequences,
    encode1,
    encode2,
    estimate_degree_events,
    find_codeword1,
    generate_codebooks,
    induce_graph,
    run_monte_carlo,
    run_trial,
    stream_rng,
)
from config import EPS_PRIME_MARGIN
from errors import CapacityError, ConfigurationError, DecodeError
from probcore import JointPMF, bsc_channel, compose_markov, identity_channel
from region import evaluate_channel
from typicality import (
    TypicalityParams,
    epsilon_prime_for,
    measure_epsilon1,
    pairwise_typical,
    typical_mask,
)

RECON_V = np.tile(np.arange(2), (2, 1))

# (x, v) pair counts 3/1/1/3 match DSBS(0.25) exactly
X_TRUE = [0, 0, 0, 0, 1, 1, 1, 1]
X_TWIN = [0, 0, 0, 1, 0, 1, 1, 1]
X_BAD = [1, 1, 1, 1, 1, 1, 1, 1]
V_WORD = [0, 0, 0, 1, 1, 1, 1, 0]


def lossless_joint(source):
    return compose_markov(source, identity_channel(source.axes[1]))


def small_config(**overrides):
    values = dict(n=8, eps=0.1, eps_prime=0.5, rates=(0.25, 0.25, 0.25, 0.25))
    values.update(overrides)
    return CodecConfig(**values)


def point_d_config(source, aux, n, **overrides):
    solution = evaluate_channel(source, aux, RECON_V, np.ones((2, 2)) - np.eye(2))
    values = dict(n=n, eps=0.2, eps_prime=0.5, seed=11)
    values.update(overrides)
    return CodecConfig.for_point(solution.corner_points["D"], 0.2, **values)


@pytest.fixture
def hand_codebook():
    """Bin 0 holds X_TRUE, bin 1 holds two typical partners of V_WORD, bin 2 none."""
    c1 = np.array([X_TRUE, X_TWIN, X_TRUE, X_BAD])
    c2 = np.array([V_WORD])
    return CodebookPair(
        c1, c2, np.array([0, 1, 1, 2]), np.array([0]), 3, 1, 2, 2
    )


class TestCodecConfig:
    def test_eps_tilde(self):
        assert small_config(eps=0.2).eps_tilde == pytest.approx(0.6)
        assert small_config(eps=0.2, markov_k=2.0).eps_tilde == pytest.approx(0.4)

    def test_sum_rate_equality_enforced(self):
        with pytest.raises(ConfigurationError) as exc_info:
            small_config(rates=(0.5, 0.25, 0.25, 0.25))
        assert exc_info.value.field == "rates"

    def test_negative_rate_rejected(self):
        with pytest.raises(ConfigurationError):
            small_config(rates=(-0.1, 0.0, -0.1, 0.0))

    def test_seed_must_fit_64_bits(self):
        with pytest.raises(ConfigurationError) as exc_info:
            small_config(seed=2**64)
        assert exc_info.value.field == "seed"

    def test_unknown_graph_mode(self):
        with pytest.raises(ConfigurationError):
            small_config(graph_mode="lazy")

    def test_eps_prime_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            small_config(eps_prime=0.0)

    def test_for_point_adds_margin(self, dsbs_025):
        cfg = point_d_config(dsbs_025, identity_channel(dsbs_025.axes[1]), 8)
        h = 0.8112781244591328  # h(0.25)
        assert cfg.rates == pytest.approx((1.2, 1.2, h + 0.2, h + 0.2))

    def test_to_dict(self):
        assert small_config(seed=3).to_dict()["seed"] == 3


class TestStreams:
    def test_same_stream_replays(self):
        cfg = small_config(seed=5)
        a = stream_rng(cfg, "trial", 3).integers(2**32, size=8)
        b = stream_rng(cfg, "trial", 3).integers(2**32, size=8)
        assert np.array_equal(a, b)

    def test_streams_are_distinct(self):
        cfg = small_config(seed=5)
        a = stream_rng(cfg, "trial", 3).integers(2**32, size=8)
        b = stream_rng(cfg, "trial", 4).integers(2**32, size=8)
        c = stream_rng(cfg, "codebook1").integers(2**32, size=8)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_source_block_shape(self, dsbs_025):
        x1, x2 = draw_source_block(dsbs_025, small_config(), 0)
        assert x1.shape == x2.shape == (8,)
        assert set(np.unique(np.concatenate([x1, x2]))) <= {0, 1}


class TestCodebooks:
    def test_codebook_size(self):
        assert codebook_size(8, 1.0) == 256
        assert codebook_size(8, 0.51) == 32

    def test_codebook_cap(self):
        with pytest.raises(CapacityError) as exc_info:
            codebook_size(100, 1.0)
        assert exc_info.value.cap_name == "CODEBOOK_CAP"

    def test_drawn_sequences_are_typical(self, rng):
        fair = JointPMF.from_array([0.5, 0.5])
        draws = draw_typical_sequences(fair, 8, 0.25, 200, rng)
        assert draws.shape == (200, 8)
        assert typical_mask(draws, fair.mass, 0.25).all()
        assert set(draws.sum(axis=1).tolist()) <= {3, 4, 5}

    def test_empty_typical_set(self, rng):
        fair = JointPMF.from_array([0.5, 0.5])
        with pytest.raises(ConfigurationError):
            draw_typical_sequences(fair, 9, 0.0, 10, rng)

    def test_needs_composed_joint(self, dsbs_025):
        with pytest.raises(ConfigurationError):
            generate_codebooks(dsbs_025, small_config())

    def test_sizes_bins_and_replay(self, dsbs_025):
        joint = lossless_joint(dsbs_025)
        cfg = small_config(eps=0.2, rates=(0.5, 0.5, 0.5, 0.5), seed=9)
        cb = generate_codebooks(joint, cfg)
        assert cb.c1.shape == (1024, 8)
        assert cb.n_bins1 == cb.n_bins2 == 16
        assert cb.bin1.min() >= 0 and cb.bin1.max() < 16
        assert sum(len(b) for b in cb.bins1) == 1024
        again = generate_codebooks(joint, cfg)
        assert np.array_equal(cb.c1, again.c1)
        assert np.array_equal(cb.bin2, again.bin2)
        other = generate_codebooks(joint, small_config(eps=0.2, rates=(0.5,) * 4, seed=10))
        assert not np.array_equal(cb.bin1, other.bin1)


class TestGraphInduction:
    def test_edges_match_brute_force(self, dsbs_025):
        joint = lossless_joint(dsbs_025)
        cfg = small_config(eps=0.2, rates=(0.5, 0.5, 0.5, 0.5), seed=4)
        cb = generate_codebooks(joint, cfg)
        graph = induce_graph(cb, cfg, joint)
        p_xv = joint.marginal((0, 2))
        for i in range(cb.n_bins1):
            for j in range(cb.n_bins2):
                xs = cb.c1[cb.bin_members1(i)]
                vs = cb.c2[cb.bin_members2(j)]
                expected = bool(pairwise_typical(xs, vs, p_xv, cfg.eps).any())
                assert graph.has_edge(i, j) == expected

    def test_event_free_graph_is_nearly_semi_regular(self, dsbs_025):
        joint = lossless_joint(dsbs_025)
        cfg = small_config(eps=0.2, rates=(0.5, 0.5, 0.5, 0.5), eps_prime=1.0, seed=4)
        graph = induce_graph(generate_codebooks(joint, cfg), cfg, joint)
        e1, e2 = check_degree_events(graph, cfg)
        ok = check_nearly_semi_regular(graph, degree_params(graph, cfg)).ok
        assert ok == (not (e1 or e2))

    def test_degree_event_estimate(self, dsbs_025):
        joint = lossless_joint(dsbs_025)
        cfg = small_config(eps=0.2, rates=(0.5, 0.5, 0.5, 0.5), eps_prime=1.0)
        estimate = estimate_degree_events(joint, cfg, range(4))
        assert estimate.seeds == (0, 1, 2, 3)
        assert 0.0 <= estimate.event_rate <= 1.0
        assert estimate.consistent
        assert estimate.to_dict()["runs"] == 4

    def test_degree_events_rare_with_measured_slackness(self, dsbs_025):
        joint = lossless_joint(dsbs_025)
        p_xv = joint.marginal((0, 2))
        params = TypicalityParams(0.2, 8)
        eps_prime = epsilon_prime_for(p_xv, params)
        assert eps_prime == pytest.approx(3 * measure_epsilon1(p_xv, params) + EPS_PRIME_MARGIN)

        aux = identity_channel(dsbs_025.axes[1])
        cfg = point_d_config(dsbs_025, aux, 8, eps_prime=eps_prime)
        estimate = estimate_degree_events(joint, cfg, range(10))
        assert estimate.event_rate < 0.2
        assert estimate.consistent
        assert len(estimate.semi_regular_on_clean) >= 8


class TestEncodeDecode:
    def test_encode1_uses_codeword_bin(self, hand_codebook):
        assert find_codeword1(X_TRUE, hand_codebook) == 0
        assert encode1(X_TRUE, hand_codebook, small_config()) == 0
        assert encode1(X_TWIN, hand_codebook, small_config()) == 1

    def test_encode1_fallback_is_seeded(self, hand_codebook):
        missing = [0, 1] * 4
        assert find_codeword1(missing, hand_codebook) is None
        cfg = small_config(seed=21)
        first = encode1(missing, hand_codebook, cfg, trial=2)
        assert 0 <= first < 3
        assert encode1(missing, hand_codebook, cfg, trial=2) == first

    def test_encode2(self, dsbs_025, hand_codebook):
        joint = lossless_joint(dsbs_025)
        cfg = small_config()
        assert choose_codeword2(V_WORD, hand_codebook, cfg, joint) == 0
        assert choose_codeword2([0] * 8, hand_codebook, cfg, joint) is None
        assert encode2([0] * 8, hand_codebook, cfg, joint) == 0

    def test_unique_decode(self, dsbs_025, hand_codebook):
        joint = lossless_joint(dsbs_025)
        x1_hat, x2_hat = decode(0, 0, hand_codebook, small_config(), joint, RECON_V)
        assert x1_hat.tolist() == X_TRUE
        assert x2_hat.tolist() == V_WORD

    def test_ambiguous_decode(self, dsbs_025, hand_codebook):
        joint = lossless_joint(dsbs_025)
        with pytest.raises(DecodeError) as exc_info:
            decode(1, 0, hand_codebook, small_config(), joint, RECON_V)
        assert exc_info.value.kind == DecodeError.AMBIGUOUS
        assert exc_info.value.count == 2

    def test_no_candidate(self, dsbs_025, hand_codebook):
        joint = lossless_joint(dsbs_025)
        with pytest.raises(DecodeError) as exc_info:
            decode(2, 0, hand_codebook, small_config(), joint, RECON_V)
        assert exc_info.value.kind == DecodeError.NO_CANDIDATE

    def test_recon_shape_checked(self, dsbs_025, hand_codebook):
        with pytest.raises(ConfigurationError):
            decode(0, 0, hand_codebook, small_config(), lossless_joint(dsbs_025), [[0, 1]])

    def test_clean_trial(self, dsbs_025, hand_codebook, hamming2):
        joint = lossless_joint(dsbs_025)
        x1 = np.array(X_TRUE)
        x2 = np.array(V_WORD)
        result = run_trial(0, x1, x2, hand_codebook, small_config(), joint, RECON_V, hamming2)
        assert result.decode_status == "success"
        assert result.clean
        assert result.distortion_x1 == 0.0
        assert result.distortion_x2 == 0.0
        assert result.events["e1"] is None


class TestMonteCarlo:
    def test_trials_must_be_positive(self, dsbs_025, hamming2):
        aux = identity_channel(dsbs_025.axes[1])
        with pytest.raises(ConfigurationError) as exc_info:
            run_monte_carlo(dsbs_025, aux, RECON_V, hamming2, small_config(), 0)
        assert exc_info.value.field == "trials"

    def test_degenerate_source_never_errs(self, hamming2):
        source = JointPMF.from_array([[1.0, 0.0], [0.0, 0.0]])
        aux = identity_channel(source.axes[1])
        cfg = small_config(eps=0.2)
        result = run_monte_carlo(source, aux, RECON_V, hamming2, cfg, 10)
        assert result.decode_error_rate == 0.0
        assert result.tau_x1 == 0.0
        assert result.tau_x2 == 0.0
        assert result.outcomes["success"] == 10

    def test_replay_is_identical(self, dsbs_025, hamming2):
        aux = identity_channel(dsbs_025.axes[1])
        cfg = point_d_config(dsbs_025, aux, 8)
        a = run_monte_carlo(dsbs_025, aux, RECON_V, hamming2, cfg, 20)
        b = run_monte_carlo(dsbs_025, aux, RECON_V, hamming2, cfg, 20)
        assert a.to_dict() == b.to_dict()
        assert a.to_row() == b.to_row()

    def test_event_free_trials_decode_losslessly(self, dsbs_025, hamming2):
        joint = lossless_joint(dsbs_025)
        cfg = point_d_config(dsbs_025, identity_channel(dsbs_025.axes[1]), 8)
        cb = generate_codebooks(joint, cfg)
        for t in range(40):
            x1, x2 = draw_source_block(dsbs_025, cfg, t)
            result = run_trial(t, x1, x2, cb, cfg, joint, RECON_V, hamming2)
            if result.decode_status == "success" and result.decoded_correct:
                assert result.distortion_x1 == 0.0
            if not result.any_event:
                assert result.decode_status != DecodeError.NO_CANDIDATE
                if result.decode_status == "success":
                    assert result.decoded_correct

    def test_skip_mode_and_row_layout(self, dsbs_025, hamming2):
        aux = identity_channel(dsbs_025.axes[1])
        cfg = point_d_config(dsbs_025, aux, 8, graph_mode="skip")
        result = run_monte_carlo(dsbs_025, aux, RECON_V, hamming2, cfg, 15)
        row = result.to_row()
        assert len(row) == len(CSV_COLUMNS)
        assert result.graph_events == (None, None)
        assert result.event_rates["e1"] is None
        assert sum(result.outcomes.values()) == 15

    def test_lossy_distortion_bound(self, dsbs_025, hamming2):
        # Bin counts equal codebook sizes, so every bin holds one codeword
        aux = bsc_channel(0.25)
        cfg = CodecConfig(
            n=8, eps=0.5, eps_prime=0.5, rates=(1.5, 0.75, 1.5, 0.75), seed=11, graph_mode="skip"
        )
        result = run_monte_carlo(dsbs_025, aux, RECON_V, hamming2, cfg, 300)
        assert result.codebook_summary["codebook1"] == result.codebook_summary["bins1"]
        assert result.codebook_summary["codebook2"] == result.codebook_summary["bins2"]
        assert result.expected_distortion == pytest.approx(0.25, abs=1e-12)
        assert result.eps_star == pytest.approx(0.375)
        assert result.clean_trials > 0
        assert result.max_clean_tau_x2 <= result.expected_distortion + result.eps_star + 1e-12
        assert result.tau_x2 <= result.distortion_bound + 1e-12

    @pytest.mark.slow
    def test_decode_errors_fall_with_block_length(self, dsbs_025, hamming2):
        aux = identity_channel(dsbs_025.axes[1])
        results = {}
        for n in (8, 16):
            cfg = point_d_config(dsbs_025, aux, n, graph_mode="skip")
            results[n] = run_monte_carlo(dsbs_025, aux, RECON_V, hamming2, cfg, 500)
        assert results[16].decode_error_rate < results[8].decode_error_rate
        # x1 outside C1 always decodes wrongly; at n=16, eps=0.2 only 7..9 ones are typical
        e4 = results[16].event_rates["e4"]
        assert e4 == pytest.approx(1 - 35750 / 65536, abs=0.08)
        assert results[16].decode_error_rate >= e4

    @pytest.mark.slow
    def test_rates_below_the_region_do_not_decode(self, dsbs_025, hamming2):
        aux = identity_channel(dsbs_025.axes[1])
        solution = evaluate_channel(dsbs_025, aux, RECON_V, np.ones((2, 2)) - np.eye(2))
        below = solution.corner_points["D"].shifted(-0.15)
        cfg = CodecConfig(
            n=16, eps=0.2, eps_prime=0.5, rates=below.rates(), seed=11, graph_mode="skip"
        )
        result = run_monte_carlo(dsbs_025, aux, RECON_V, hamming2, cfg, 100)
        assert result.codebook_summary["codebook1"] > result.codebook_summary["bins1"]
        assert result.decode_error_rate >= 0.5
