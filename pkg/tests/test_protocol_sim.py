import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crcap.channel_capacity import SisoChannelSpec
from crcap.errors import ConfigError, ValidationError
from crcap.prob_core import binary_source
from crcap.protocol_sim import (Codebook, SchemeParams, build_codebooks, decode_batch,
                                encode_batch, entropy_rate_estimate, round_to_type,
                                run_simulation, terminal_a_encode, terminal_b_decode,
                                transmit_batch, transmit_index, wilson_interval)

U_EQ_X = np.array([[0.5, 0.0], [0.0, 0.5], [0.0, 0.0]])


def params(n=8, delta=0.15, mu=0.2, **kw):
    return SchemeParams(n, delta, U_EQ_X, binary_source(mu), **kw)


class TestSizes:
    def test_lossless_source(self):
        p = params(12, 0.1, 0.0)
        assert p.N1 == math.ceil(math.exp(3 * 12 * 0.1))
        assert p.N2 == math.ceil(math.exp(12 * (math.log(2) - 0.2)))

    def test_noisy_source(self):
        p = params(12, 0.05, 0.2)
        assert p.N1 == 2453
        assert p.N2 == 4

    def test_memory_cap(self):
        with pytest.raises(ConfigError):
            params(16, 0.15, memory_cap=10_000)

    @pytest.mark.parametrize("kw", [dict(n=0), dict(delta=0.0), dict(trials=0),
                                    dict(channel_mode="fiber"), dict(tie_break="last")])
    def test_validation(self, kw):
        with pytest.raises(ValidationError):
            params(**kw)

    def test_marginal_mismatch(self):
        aux = np.array([[0.6, 0.0], [0.0, 0.4], [0.0, 0.0]])
        with pytest.raises(ValidationError):
            SchemeParams(8, 0.1, aux, binary_source(0.2))


class TestUtilities:
    def test_round_to_type(self):
        np.testing.assert_array_equal(round_to_type([0.5, 0.5, 0], 12), [6, 6, 0])
        np.testing.assert_array_equal(round_to_type([1 / 3] * 3, 10), [4, 3, 3])

    @given(st.integers(1, 50), st.integers(0, 2**32 - 1))
    def test_round_to_type_is_nearest(self, n, seed):
        p = np.random.default_rng(seed).dirichlet(np.ones(4))
        c = round_to_type(p, n)
        assert c.sum() == n
        assert np.all(np.abs(c / n - p) < 1 / n + 1e-12)

    def test_wilson(self):
        lo, hi = wilson_interval(50, 100)
        assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)
        assert wilson_interval(0, 100)[0] == pytest.approx(0.0, abs=1e-15)
        with pytest.raises(ValidationError):
            wilson_interval(0, 0)

    def test_entropy_rate_estimate(self):
        sym = np.repeat(np.arange(4), 1000)
        assert entropy_rate_estimate(sym, 2) == pytest.approx((math.log(4) + 3 / 8000) / 2)
        assert entropy_rate_estimate(np.zeros(10), 3) == 0.0


class TestCodebook:
    def test_audit(self):
        p = params(12, 0.1)
        cb = build_codebooks(p)
        assert cb.sequences.shape == (p.N1, p.N2, 12)
        seqs = cb.sequences.reshape(-1, 12)
        types = np.stack([(seqs == u).mean(1) for u in range(3)], 1)
        assert np.all(np.abs(types - p.p_u) <= 1 / 12 + 1e-12)

    def test_deterministic(self):
        a = build_codebooks(params(seed=5))
        b = build_codebooks(params(seed=5))
        c = build_codebooks(params(seed=6))
        np.testing.assert_array_equal(a.sequences, b.sequences)
        assert not np.array_equal(a.sequences, c.sequences)

    def test_no_faithful_type(self):
        aux = np.array([[0.45, 0.05], [0.05, 0.45], [0.0, 0.0]])
        aux2 = np.array([[0.49, 0.0], [0.0, 0.5], [0.01, 0.0]])
        build_codebooks(SchemeParams(8, 0.1, aux, binary_source(0.2)))
        with pytest.raises(ValidationError, match="block length"):
            build_codebooks(SchemeParams(8, 0.1, aux2, binary_source(0.2)))


class TestEncoder:
    def test_match_is_the_sequence_itself(self):
        p = params(8, 0.1)
        cb = build_codebooks(p)
        x = cb.sequences[3, 0].copy()
        (i, j), row = terminal_a_encode(x, cb, p)
        np.testing.assert_array_equal(cb.sequences[i, j], x)
        assert row == i

    def test_tie_break_first(self):
        p = params(8, 0.15, tie_break="first")
        cb = build_codebooks(p)
        x = cb.sequences[5, 0].copy()
        k = encode_batch(x, cb, p)[0]
        flat = cb.sequences.reshape(-1, 8)
        cand = [m for m in range(flat.shape[0])
                if np.abs(np.array([[np.mean((flat[m] == u) & (x == a)) for a in range(2)]
                                    for u in range(3)]) - U_EQ_X).max() <= 0.15 + 1e-12]
        assert k == cand[0]

    def test_atypical_gives_constant(self):
        p = params(12, 0.1, mu=0.5)
        cb = build_codebooks(p)
        assert terminal_a_encode(np.zeros(12, dtype=np.uint8), cb, p) == (None, 0)

    def test_wrong_length(self):
        p = params(8, 0.1)
        with pytest.raises(ValidationError):
            encode_batch(np.zeros((1, 7)), build_codebooks(p), p)

    def test_fallback_monotone_in_delta(self):
        rates = [run_simulation(params(8, d, channel_mode="ideal", trials=2000)).fallback_rate
                 for d in (0.1, 0.15, 0.2)]
        assert rates[0] >= rates[1] >= rates[2]

    @pytest.mark.xfail(strict=True, reason="fallback is dominated by x-typicality at n=12")
    def test_fallback_small_at_moderate_n(self):
        assert run_simulation(params(12, 0.1, channel_mode="ideal", trials=2000)).fallback_rate <= 0.05


class TestChannel:
    def test_ideal_below_capacity(self):
        p = params(8, 0.1, channel_mode="ideal")
        i = np.arange(p.N1)
        np.testing.assert_array_equal(transmit_batch(i, p), i)

    def test_ideal_stress_mode_above_capacity(self):
        p = params(8, 0.1, channel=SisoChannelSpec(0.01), channel_mode="ideal", trials=10)
        i = np.zeros(10_000, dtype=np.int64)
        err = np.mean(transmit_batch(i, p) != i)
        assert err == pytest.approx(0.5, abs=0.03)

    def test_awgn_low_rate(self):
        p = params(12, 0.038, mu=0.0)
        assert p.N1 == 4
        i = np.random.default_rng(0).integers(0, 4, 10_000)
        assert np.mean(transmit_batch(i, p) != i) <= 0.01

    def test_awgn_above_capacity(self):
        p = params(12, 0.038, mu=0.0, channel=SisoChannelSpec(0.1))
        i = np.random.default_rng(0).integers(0, 4, 10_000)
        assert np.mean(transmit_batch(i, p) != i) >= 0.2

    def test_index_range(self):
        p = params(8, 0.1)
        with pytest.raises(ValidationError):
            transmit_index(p.N1, p)
        assert transmit_index(0, p) in range(p.N1)


class TestDecoder:
    def test_identical_observation_unique_row(self):
        # one row with two well separated codewords
        p = params(8, 0.1, mu=0.0)
        seqs = np.array([[[0, 0, 0, 0, 1, 1, 1, 1], [1, 1, 1, 1, 0, 0, 0, 0]]], dtype=np.uint8)
        cb = Codebook(seqs, np.zeros(2, dtype=np.int64), np.array([4, 4, 0]))
        assert terminal_b_decode(seqs[0, 1], 0, cb, p) == (0, 1)

    def test_several_candidates_give_constant(self):
        p = params(8, 0.1, mu=0.0)
        row = np.array([0, 0, 0, 0, 1, 1, 1, 1], dtype=np.uint8)
        cb = Codebook(np.stack([row, row])[None], np.zeros(2, dtype=np.int64),
                      np.array([4, 4, 0]))
        L, nok = decode_batch(row[None], np.array([0]), cb, p)
        assert L[0] == -1 and nok[0] == 2
        assert terminal_b_decode(row, 0, cb, p) is None


class TestSimulation:
    def test_report_bounds_and_decomposition(self):
        p = params(8, 0.15, trials=3000)
        r = run_simulation(p)
        for v in (r.est_mismatch, r.channel_error_rate, r.fallback_rate, r.ambiguity_rate):
            assert 0 <= v <= 1
        assert r.mismatch_ci[0] <= r.est_mismatch <= r.mismatch_ci[1]
        assert 0 <= r.est_entropy_rate <= math.log(3) + p.delta
        assert r.est_mismatch <= r.channel_error_rate + r.decode_mismatch_rate + 1 / r.trials
        assert (r.N1, r.N2) == (p.N1, p.N2)

    def test_reproducible(self):
        p = params(8, 0.15, trials=1000, seed=9)
        assert run_simulation(p) == run_simulation(p)

    def test_lossless_ideal_measured(self):
        r = run_simulation(params(12, 0.1, mu=0.0, channel_mode="ideal", trials=2000))
        assert r.channel_error_rate == 0
        # every mismatch is a decoding-stage event
        assert r.est_mismatch == r.decode_mismatch_rate

    @pytest.mark.xfail(strict=True, reason="near-duplicate codewords in a row pass the "
                                           "L-infinity test at n=12, delta=0.1")
    def test_lossless_ideal_small_mismatch(self):
        r = run_simulation(params(12, 0.1, mu=0.0, channel_mode="ideal", trials=10_000))
        assert r.est_mismatch <= 0.01
