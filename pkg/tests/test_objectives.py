import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from oracles import span_objectives_loop
from vlmdiag.errors import ParameterError
from vlmdiag.objectives import (
    GroupRollouts,
    TokenizedResponse,
    grpo_advantages,
    grpo_objective,
    ngdiff_weight,
    reweighted_grpo_objective,
    rescale_advantages,
    sft_losses,
    sft_reweighted,
    span_objectives,
)

finite = st.floats(0.0, 20.0, allow_nan=False)
ratio = st.floats(0.05, 5.0, allow_nan=False)


@st.composite
def responses(draw, values=finite, min_span=0):
    p = draw(st.integers(min_span, 12))
    r = draw(st.integers(max(min_span, 1 if p == 0 else 0), 30))
    vals = draw(st.lists(values, min_size=p + r, max_size=p + r))
    return TokenizedResponse(vals, p, r)


@st.composite
def groups(draw):
    g = draw(st.integers(1, 6))
    resps = [draw(responses(values=ratio, min_span=1)) for _ in range(g)]
    adv = draw(st.lists(st.floats(-3, 3, allow_nan=False), min_size=g, max_size=g))
    return GroupRollouts([0.0] * g, resps), adv


class TestSFT:
    def test_example_sums(self):
        lp, lr, std = sft_losses(TokenizedResponse([0.5, 0.5, 0.3, 0.3, 0.3, 0.3], 2, 4))
        assert lp == pytest.approx(1.0, abs=1e-15)
        assert lr == pytest.approx(1.2, abs=1e-15)
        assert std == pytest.approx(2.2 / 6, abs=1e-15)

    def test_all_zero(self):
        assert sft_losses(TokenizedResponse([0.0] * 5, 2, 3)) == (0, 0, 0)

    def test_empty_reasoning(self):
        assert sft_losses(TokenizedResponse([1, 1], 2, 0)) == (2, 0, 1)

    def test_empty_response(self):
        with pytest.raises(ParameterError):
            sft_losses(TokenizedResponse([], 0, 0))

    def test_negative_nll(self):
        with pytest.raises(ParameterError):
            sft_losses(TokenizedResponse([1, -0.1], 1, 1))

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            TokenizedResponse([1, 2, 3], 1, 1)

    def test_reweighted_examples(self):
        assert sft_reweighted(2, 30, 4, 96, 4 / 100) == pytest.approx(0.32, rel=1e-12)
        assert sft_reweighted(2, 30, 4, 96, 0.5) == pytest.approx(0.40625, rel=1e-15)
        assert sft_reweighted(2, 30, 4, 96, 1.0) == 0.5

    def test_zero_span_with_weight(self):
        with pytest.raises(ParameterError):
            sft_reweighted(1.0, 2.0, 0, 4, 0.3)
        with pytest.raises(ParameterError):
            sft_reweighted(1.0, 2.0, 3, 0, 0.3)
        assert sft_reweighted(1.0, 2.0, 0, 4, 0.0) == 0.5

    @pytest.mark.parametrize("lam", [-0.1, 1.1])
    def test_lambda_range(self, lam):
        with pytest.raises(ParameterError):
            sft_reweighted(1, 1, 1, 1, lam)

    @settings(max_examples=200, deadline=None)
    @given(responses())
    def test_reweighting_identity(self, resp):
        lp, lr, std = sft_losses(resp)
        lam = resp.perception_len / resp.length
        got = sft_reweighted(lp, lr, resp.perception_len, resp.reasoning_len, lam)
        assert math.isclose(got, std, rel_tol=1e-12, abs_tol=1e-300)

    @settings(max_examples=100, deadline=None)
    @given(responses(min_span=1), st.floats(0, 1), st.floats(0, 1))
    def test_linear_in_lambda(self, resp, l1, l2):
        lp, lr, _ = sft_losses(resp)
        p, r = resp.perception_len, resp.reasoning_len
        slope = lp / p - lr / r
        diff = sft_reweighted(lp, lr, p, r, l2) - sft_reweighted(lp, lr, p, r, l1)
        assert diff == pytest.approx(slope * (l2 - l1), abs=1e-9)


class TestNGDiff:
    def test_examples(self):
        assert ngdiff_weight(2, 2) == (0.5, False)
        assert ngdiff_weight(1, 3).weight == 0.75

    def test_reciprocal_form(self):
        gp, gr = 0.37, 2.9
        expected = (1 / gp) / (1 / gp + 1 / gr)
        assert ngdiff_weight(gp, gr).weight == pytest.approx(expected, rel=1e-15)

    def test_degenerate(self):
        assert ngdiff_weight(0.0, 1.0) == (0.5, True)
        assert ngdiff_weight(1.0, 1e-13) == (0.5, True)

    @pytest.mark.parametrize("bad", [-1.0, float("nan"), float("inf")])
    def test_invalid(self, bad):
        with pytest.raises(ParameterError):
            ngdiff_weight(bad, 1.0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.floats(1e-3, 1e3))
    def test_scale_invariance(self, a, b, c):
        assert ngdiff_weight(c * a, c * b).weight == pytest.approx(ngdiff_weight(a, b).weight, rel=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1.001, 10))
    def test_decreasing_in_gp(self, a, b, k):
        assert ngdiff_weight(a * k, b).weight < ngdiff_weight(a, b).weight


class TestAdvantages:
    def test_example(self):
        assert grpo_advantages([1, 1, 0, 0]).tolist() == [1, 1, -1, -1]

    def test_constant_group(self):
        assert grpo_advantages([0.5, 0.5, 0.5]).tolist() == [0, 0, 0]

    def test_too_small(self):
        with pytest.raises(ParameterError):
            grpo_advantages([1.0])

    def test_non_finite(self):
        with pytest.raises(ParameterError):
            grpo_advantages([1.0, float("nan")])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=32))
    def test_normalization(self, rewards):
        r = np.asarray(rewards)
        assume(r.std() > 1e-6)
        adv = grpo_advantages(rewards)
        assert abs(adv.mean()) < 1e-12
        assert abs(adv.std() - 1) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=12), st.randoms(use_true_random=False))
    def test_permutation_equivariant(self, rewards, rnd):
        perm = list(range(len(rewards)))
        rnd.shuffle(perm)
        base = grpo_advantages(rewards)
        shuffled = grpo_advantages([rewards[i] for i in perm])
        np.testing.assert_allclose(shuffled, base[perm], rtol=1e-12, atol=1e-12)


class TestRescale:
    def test_share_gives_unity(self):
        assert rescale_advantages(TokenizedResponse([1] * 10, 2, 8), 1.0, 0.2).tolist() == [1.0] * 10

    def test_half(self):
        out = rescale_advantages(TokenizedResponse([1] * 10, 2, 8), 1.0, 0.5)
        assert out[:2] == pytest.approx([2.5, 2.5], rel=1e-15)
        assert out[2:] == pytest.approx([0.625] * 8, rel=1e-15)

    def test_zero_advantage(self):
        assert rescale_advantages(TokenizedResponse([1] * 5, 2, 3), 0.0, 0.9).tolist() == [0.0] * 5

    def test_zero_span(self):
        with pytest.raises(ParameterError):
            rescale_advantages(TokenizedResponse([1, 1], 2, 0), 1.0, 0.5)

    @settings(max_examples=300, deadline=None)
    @given(responses(values=ratio, min_span=1), st.floats(-5, 5))
    def test_rescaling_identity_exact(self, resp, adv):
        lam = resp.perception_len / resp.length
        out = rescale_advantages(resp, adv, lam)
        assert (out == adv).all()


class TestObjective:
    def test_unit_ratios(self):
        resps = [TokenizedResponse([1.0] * n, 1, n - 1) for n in (3, 5, 7)]
        adv = [0.5, -1.0, 2.0]
        per_token = [[a] * r.length for r, a in zip(resps, adv)]
        assert grpo_objective(GroupRollouts([0, 0, 0], resps), per_token) == pytest.approx(sum(adv) / 3)

    def test_single_zero(self):
        resp = TokenizedResponse([1.3, 0.7], 1, 1)
        assert grpo_objective(GroupRollouts([0.0], [resp]), [[0.0, 0.0]]) == 0

    def test_length_mismatch(self):
        resp = TokenizedResponse([1.0, 1.0], 1, 1)
        with pytest.raises(ParameterError):
            grpo_objective(GroupRollouts([0.0], [resp]), [[1.0]])

    @settings(max_examples=200, deadline=None)
    @given(groups(), st.floats(0, 1))
    def test_decomposition(self, ga, lam):
        group, adv = ga
        got = reweighted_grpo_objective(group, adv, lam)
        jp, jr = span_objectives_loop(
            [list(r.values) for r in group.responses], [r.perception_len for r in group.responses], adv
        )
        want = lam * jp + (1 - lam) * jr
        assert math.isclose(got, want, rel_tol=1e-10, abs_tol=1e-12)

    def test_span_objectives_matches_loop(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            g = rng.integers(1, 6)
            resps = []
            for _ in range(g):
                p, r = rng.integers(1, 8), rng.integers(1, 20)
                resps.append(TokenizedResponse(rng.uniform(0.2, 3, p + r).tolist(), int(p), int(r)))
            adv = rng.normal(size=g).tolist()
            got = span_objectives(GroupRollouts([0.0] * g, resps), adv)
            want = span_objectives_loop([list(r.values) for r in resps], [r.perception_len for r in resps], adv)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-14)


def test_ngdiff_grid_strictly_between():
    for a, b in itertools.product([0.01, 1, 100], repeat=2):
        assert 0 < ngdiff_weight(a, b).weight < 1
