import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import all_masks, gf2_encode
from polaridma.bp_decoder import (
    LLR_MAX, DecoderConfig, FactorGraphState, StopCriterion, _distances, boxplus, check_stop,
    decode, decode_warm, graph_schedule, identity_schedule, initialize, llr2bit, one_iteration,
    pe_update,
)
from polaridma.crc import CRC8, crc_attach
from polaridma.polar_code import InformationSet, construct_bhattacharyya, encode
from polaridma.user_chain import map_bpsk

llrs = st.floats(-60, 60, allow_nan=False)


def f_ref(x: float, y: float) -> float:
    return math.log((1 + math.exp(x + y)) / (math.exp(x) + math.exp(y)))


def iterate_ref(L, R, schedule, llr_max=LLR_MAX):
    """One BP iteration written PE by PE with plain Python scalars."""
    n = len(schedule)
    N = L.shape[1]
    L, R = L.tolist(), R.tolist()
    c = lambda v: max(-llr_max, min(llr_max, v))
    pairs = []
    for s in range(n):
        d = 2 ** (schedule[s] - 1)
        pairs.append([(i, i + d) for i in range(N) if (i // d) % 2 == 0])
    for s in reversed(range(n)):
        for i1, i2 in pairs[s]:
            l1, l2, r1, r2 = L[s + 1][i1], L[s + 1][i2], R[s][i1], R[s][i2]
            L[s][i1] = c(f_ref(l1, l2 + r2))
            L[s][i2] = c(f_ref(r1, l1) + l2)
    for s in range(n):
        for i1, i2 in pairs[s]:
            l1, l2, r1, r2 = L[s + 1][i1], L[s + 1][i2], R[s][i1], R[s][i2]
            R[s + 1][i1] = c(f_ref(r1, l2 + r2))
            R[s + 1][i2] = c(f_ref(r1, l1) + r2)
    return np.array(L), np.array(R)


class TestBoxplus:
    def test_examples(self):
        assert boxplus(0.0, 3.7) == 0.0
        assert boxplus(2.0, 3.0) == pytest.approx(f_ref(2, 3), abs=1e-12)
        assert boxplus(2.0, 3.0) == pytest.approx(1.6935, abs=1e-4)
        assert boxplus(-2.0, 3.0) == pytest.approx(-1.6935, abs=1e-4)

    def test_no_overflow_at_saturation(self):
        assert boxplus(100.0, 100.0) == pytest.approx(100.0 - math.log(2), abs=1e-12)
        assert np.isfinite(boxplus(1e4, -1e4))

    @given(llrs, llrs)
    def test_matches_closed_form(self, x, y):
        assert boxplus(x, y) == pytest.approx(f_ref(x, y), abs=1e-9)

    @given(llrs, llrs)
    def test_properties(self, x, y):
        v = boxplus(x, y)
        assert v == boxplus(y, x)
        assert abs(v) <= min(abs(x), abs(y)) + 1e-12
        if v != 0:
            assert np.sign(v) == np.sign(x) * np.sign(y)


class TestPE:
    def test_examples(self):
        out = pe_update(2.0, 3.0, 0.0, 0.0)
        np.testing.assert_allclose(out, [f_ref(2, 3), 3.0, 0.0, 0.0], atol=1e-12)
        assert np.all(np.array(pe_update(0, 0, 0, 0)) == 0)

    def test_saturation(self):
        L1, L2, R1, R2 = pe_update(0.0, 0.0, 100.0, 100.0)
        assert R1 == pytest.approx(100 - math.log(2), abs=1e-9)
        assert R2 == 100.0 and L1 == 0.0 and L2 == 0.0
        assert max(abs(v) for v in pe_update(100, 100, 100, 100)) <= LLR_MAX


def test_llr2bit():
    assert llr2bit([2.0, -0.1, 0.0]).tolist() == [0, 1, 0]


class TestInitialize:
    def test_example(self):
        st_ = initialize([1.5, -0.7], InformationSet([0, 1]))
        assert st_.R[0].tolist() == [100, 0]
        assert st_.L[1].tolist() == [1.5, -0.7]
        assert not st_.L[0].any() and not st_.R[1].any()

    def test_clamp(self):
        assert initialize([250.0, 0.0], InformationSet([0, 1])).L[1, 0] == 100

    @pytest.mark.parametrize("bad", [[np.nan, 0.0], [np.inf, 1.0]])
    def test_non_finite(self, bad):
        with pytest.raises(ValueError):
            initialize(bad, InformationSet([0, 1]))

    def test_length(self):
        with pytest.raises(ValueError, match="length mismatch"):
            initialize([1.0, 2.0, 3.0], InformationSet([0, 1]))


class TestOneIteration:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_matches_scalar_reference(self, n, rng):
        N = 2 ** n
        A, _ = construct_bhattacharyya(N, max(1, N // 2))
        for sched in set(itertools.permutations(range(1, n + 1))) if n <= 3 else [
                identity_schedule(n), (3, 1, 4, 2)]:
            st_ = initialize(rng.normal(0, 4, N), A)
            st_.L[1:-1] = rng.normal(0, 3, st_.L[1:-1].shape)
            st_.R[1:] = rng.normal(0, 3, st_.R[1:].shape)
            want_L, want_R = iterate_ref(st_.L, st_.R, sched)
            got = one_iteration(st_, sched)
            np.testing.assert_allclose(got.L, want_L, atol=1e-9)
            np.testing.assert_allclose(got.R, want_R, atol=1e-9)

    def test_n2_example(self):
        A = InformationSet([0, 1])
        st_ = one_iteration(initialize([100.0, 100.0], A))
        u, x = llr2bit(st_.L[0] + st_.R[0]), llr2bit(st_.L[1] + st_.R[1])
        assert u[1] == 0 and x.tolist() == [0, 0]

    def test_n2_is_exact_app(self, rng):
        # single stage: BP marginals equal brute-force marginals over the 4 codewords
        A = InformationSet([1, 1])
        lch = rng.normal(0, 2, 2)
        st_ = one_iteration(initialize(lch, A))
        post = st_.L[0] + st_.R[0]
        for i in range(2):
            p = [0.0, 0.0]
            for u in itertools.product((0, 1), repeat=2):
                x = gf2_encode(u, A.a)
                p[u[i]] += math.exp(sum(-lch[t] * x[t] for t in range(2)))
            assert post[i] == pytest.approx(math.log(p[0] / p[1]), abs=1e-9)

    def test_fixed_point(self):
        A, _ = construct_bhattacharyya(8, 4)
        st_ = initialize(100 * map_bpsk(encode([1, 0, 1, 1], A)), A)
        for _ in range(6):
            st_ = one_iteration(st_)
        again = one_iteration(one_iteration(st_))
        np.testing.assert_array_equal(again.L, st_.L)
        np.testing.assert_array_equal(again.R, st_.R)

    @pytest.mark.parametrize("sched", [(1, 1, 2), (0, 1, 2), (1, 2)])
    def test_invalid_schedule(self, sched):
        A, _ = construct_bhattacharyya(8, 4)
        with pytest.raises(ValueError):
            one_iteration(initialize(np.zeros(8), A), sched)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=8))
    def test_saturation_invariant(self, lch):
        A, _ = construct_bhattacharyya(8, 3)
        st_ = initialize(lch, A)
        for _ in range(3):
            st_ = one_iteration(st_)
            assert np.abs(st_.L).max() <= LLR_MAX and np.abs(st_.R).max() <= LLR_MAX


class TestSchedules:
    def test_graph_one_is_identity(self):
        assert graph_schedule(5, 1, seed=99) == (1, 2, 3, 4, 5)

    def test_seeded(self):
        assert graph_schedule(6, 3, 7) == graph_schedule(6, 3, 7)
        assert sorted(graph_schedule(6, 3, 7)) == [1, 2, 3, 4, 5, 6]
        assert len({graph_schedule(8, g, 0) for g in range(2, 10)}) > 1

    def test_distances(self):
        assert _distances((1, 2, 3), 3) == [1, 2, 4]
        assert _distances((3, 1, 2), 3) == [4, 1, 2]


class TestStop:
    def test_converged_zero_frame(self):
        A, _ = construct_bhattacharyya(8, 4)
        st_ = one_iteration(initialize(np.full(8, 100.0), A))
        assert check_stop(st_, StopCriterion())

    def test_genie(self):
        A, _ = construct_bhattacharyya(8, 4)
        u = np.array([1, 0, 1, 1])
        st_ = one_iteration(initialize(100 * map_bpsk(encode(u, A)), A))
        assert check_stop(st_, StopCriterion.genie(u))
        assert not check_stop(st_, StopCriterion.genie(1 - u))
        with pytest.raises(ValueError):
            check_stop(st_, StopCriterion.genie([1, 0]))

    def test_none_never_fires(self):
        A, _ = construct_bhattacharyya(8, 4)
        assert not check_stop(one_iteration(initialize(np.full(8, 100.0), A)), StopCriterion("none"))

    def test_crc(self):
        A, _ = construct_bhattacharyya(32, 16)
        u = crc_attach(np.array([1, 0, 1, 1, 0, 0, 1, 0]), CRC8)
        res = decode(100 * map_bpsk(encode(u, A)), A, DecoderConfig(stop=StopCriterion.crc_aided(CRC8)))
        assert res.stopped_early and np.array_equal(res.u_hat, u)

    def test_constructor_errors(self):
        with pytest.raises(ValueError):
            StopCriterion("crc")
        with pytest.raises(ValueError):
            StopCriterion("genie")
        with pytest.raises(ValueError):
            StopCriterion("sometimes")

    def test_gmatrix_soundness(self, rng):
        A, _ = construct_bhattacharyya(64, 32)
        x = encode(rng.integers(0, 2, (200, 32)), A)
        lch = 2 * map_bpsk(x) / 0.8 + rng.normal(0, 1.5, x.shape)
        res = decode(lch, A, DecoderConfig(max_iters=30))
        fired = res.stopped_early
        assert fired.any()
        assert np.array_equal(encode(res.u_hat[fired], A), res.x_hat[fired])


class TestDecode:
    @pytest.mark.parametrize("N", [2, 4, 8, 16])
    def test_high_snr_all_codes(self, N):
        masks = list(all_masks(N))
        if N == 16:
            masks = masks[::97]
        for a in masks:
            A = InformationSet(a)
            U = np.array(list(itertools.product((0, 1), repeat=A.k)))
            if len(U) > 64:
                U = U[:: len(U) // 64]
            X = encode(U, A)
            res = decode(LLR_MAX * map_bpsk(X), A, DecoderConfig(max_iters=2))
            assert res.stopped_early.all() and (res.iters_used <= 2).all()
            assert np.array_equal(res.u_hat, U) and np.array_equal(res.x_hat, X)

    def test_noiseless_stops_fast(self):
        A, _ = construct_bhattacharyya(64, 32)
        res = decode(20 * map_bpsk(encode(np.ones(32, dtype=int), A)), A)
        assert res.stopped_early and res.iters_used <= 2 and res.graphs_used == 1

    def test_deterministic(self, rng):
        A, _ = construct_bhattacharyya(64, 32)
        lch = rng.normal(1, 2, 64)
        cfg = DecoderConfig(max_iters=5, num_graphs=3, schedule_seed=4)
        r1, r2 = decode(lch, A, cfg), decode(lch, A, cfg)
        assert np.array_equal(r1.u_hat, r2.u_hat) and np.array_equal(r1.ext_out, r2.ext_out)

    def test_batch_matches_single(self, rng):
        A, _ = construct_bhattacharyya(32, 16)
        U = rng.integers(0, 2, (12, 16))
        lch = 2 * map_bpsk(encode(U, A)) + rng.normal(0, 1.3, (12, 32))
        cfg = DecoderConfig(max_iters=8, num_graphs=2)
        batch = decode(lch, A, cfg)
        for i in range(12):
            one = decode(lch[i], A, cfg)
            assert np.array_equal(one.u_hat, batch.u_hat[i])
            assert np.array_equal(one.ext_out, batch.ext_out[i])
            assert one.iters_used == batch.iters_used[i] and one.graphs_used == batch.graphs_used[i]

    def test_multi_trellis_genie_oracle(self, rng):
        A, _ = construct_bhattacharyya(64, 32)
        U = rng.integers(0, 2, (150, 32))
        lch = 2 * map_bpsk(encode(U, A)) / 0.9 + rng.normal(0, 1.9, (150, 64))
        q, seed = 3, 11
        multi = decode(lch, A, DecoderConfig(max_iters=10, num_graphs=q, schedule_seed=seed,
                                             stop=StopCriterion.genie(U)))
        # each schedule run on its own graph, as an independent brute force
        any_ok = np.zeros(150, dtype=bool)
        for g in range(1, q + 1):
            sched = graph_schedule(A.n, g, seed)
            for i in range(150):
                st_ = initialize(lch[i], A, schedule=sched)
                for _ in range(10):
                    st_ = one_iteration(st_)
                    if check_stop(st_, StopCriterion.genie(U[i])):
                        any_ok[i] = True
                        break
        ok = np.all(multi.u_hat == U, axis=1)
        assert np.array_equal(ok, any_ok)
        assert np.all(multi.iters_used <= q * 10)
        single = decode(lch, A, DecoderConfig(max_iters=10, stop=StopCriterion.genie(U)))
        assert np.all(ok[np.all(single.u_hat == U, axis=1)])

    def test_app_output(self, rng):
        A, _ = construct_bhattacharyya(16, 8)
        lch = rng.normal(0, 3, 16)
        ext = decode(lch, A, DecoderConfig(max_iters=3, stop=StopCriterion("none")))
        app = decode(lch, A, DecoderConfig(max_iters=3, stop=StopCriterion("none"), output="app"))
        np.testing.assert_allclose(app.ext_out, ext.ext_out + lch)

    def test_config_errors(self):
        with pytest.raises(ValueError):
            DecoderConfig(max_iters=0)
        with pytest.raises(ValueError):
            DecoderConfig(num_graphs=0)
        with pytest.raises(ValueError):
            DecoderConfig(output="both")


class TestWarm:
    def setup_method(self):
        self.A, _ = construct_bhattacharyya(64, 32)

    def test_zero_iterations_unchanged(self, rng):
        st_ = initialize(rng.normal(0, 2, 64), self.A)
        for _ in range(3):
            st_ = one_iteration(st_)
        new, _ = decode_warm(st_, st_.L[-1], 0)
        np.testing.assert_array_equal(new.L, st_.L)
        np.testing.assert_array_equal(new.R, st_.R)

    def test_input_untouched(self, rng):
        st_ = initialize(rng.normal(0, 2, 64), self.A)
        L0 = st_.L.copy()
        decode_warm(st_, rng.normal(0, 2, 64), 3)
        np.testing.assert_array_equal(st_.L, L0)

    def test_reset_equals_fresh(self, rng):
        lch = rng.normal(0.5, 2, 64)
        _, warm = decode_warm(initialize(np.zeros(64), self.A), lch, 7)
        cold = decode(lch, self.A, DecoderConfig(max_iters=7, stop=StopCriterion("none")))
        np.testing.assert_array_equal(warm.ext_out, cold.ext_out)
        np.testing.assert_array_equal(warm.u_hat, cold.u_hat)

    def test_state_dependence_regression(self):
        # recorded seed: a graph that has converged on one frame mis-decodes the next,
        # while a fresh graph with the same iteration budget decodes it correctly
        rng = np.random.default_rng(20)
        u1, u2 = rng.integers(0, 2, (2, 32))
        old = initialize(6 * map_bpsk(encode(u1, self.A)), self.A)
        for _ in range(10):
            old = one_iteration(old)
        lch = 2 * map_bpsk(encode(u2, self.A)) / 0.7 + rng.normal(0, 1.7, 64)
        _, warm = decode_warm(old, lch, 2)
        cold = decode(lch, self.A, DecoderConfig(max_iters=2, stop=StopCriterion("none")))
        assert not np.array_equal(warm.u_hat, cold.u_hat)
        assert np.array_equal(cold.u_hat, u2)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            decode_warm(initialize(np.zeros(64), self.A), np.zeros(32), 1)

    def test_batched_state(self, rng):
        st_ = initialize(np.zeros((3, 64)), self.A)
        new, res = decode_warm(st_, rng.normal(0, 2, (3, 64)), 2, StopCriterion())
        assert new.L.shape == (3, 7, 64) and res.u_hat.shape == (3, 32)
        assert isinstance(st_, FactorGraphState)
