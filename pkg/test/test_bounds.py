"""
Test script for bounds.py calculators.
"""

import numpy as np
import pytest
from mixsim.bounds import (
    BoundInputs,
    BoundResult,
    DecaySequence,
    bstar_sequence,
    cor_mixing_bound,
    coupling_bound,
    lemma_ult3_bound,
    lemma_ult3_recursion,
    lemma_ult_bound,
    lemma_ult_oracle,
    omega,
    optimized_thm1_bound,
    rate_schedule,
    simulate_renewal,
    tail_sums,
    thm1_bound,
    thm2_bound,
    thm3_bound,
)
from mixsim.contraction import DerivedDecay
from mixsim.utils import NonSummableError, make_stream


class TestDecaySequence(object):
    """
    Tests for tabulated sequences with analytic tails.
    """

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            DecaySequence([0.1, -0.1])

        with pytest.raises(ValueError):
            DecaySequence([0.1], tail="exponential")

        with pytest.raises(ValueError):
            DecaySequence([0.1], tail="geometric")

        with pytest.raises(ValueError):
            DecaySequence([0.1], tail="power", scale=1.0, rate=-1.0)

        with pytest.raises(ValueError):
            DecaySequence.geometric(-0.5)

    def test_values(self):
        seq = DecaySequence([0.5, 0.25])
        assert seq[1] == 0.25
        assert seq.n_tabulated == 2

        with pytest.raises(IndexError):
            seq[2]

        with pytest.raises(IndexError):
            seq.values_at([-1])

        # tabulated values are read-only
        with pytest.raises(ValueError):
            seq.values[0] = 1.0

        assert DecaySequence.zeros()[100] == 0.0

    def test_geometric(self):
        seq = DecaySequence.geometric(0.5, scale=2.0, start=1)
        assert seq[0] == 0.0
        assert seq[1] == 2.0
        assert np.isclose(seq[3], 0.5)
        assert np.isclose(seq.tail_sum(1), 4.0)
        assert np.isclose(seq.tail_sum(3), 1.0)
        assert seq.summable
        assert seq.is_nonincreasing(10) is False  # zero at index 0
        assert DecaySequence.geometric(0.5).is_nonincreasing(10)

        c, q = seq.geometric_envelope()
        assert q == 0.5
        assert np.all(seq.head(20)[1:] <= c * q ** np.arange(1, 20) + 1e-15)

        assert DecaySequence.geometric(0.0, scale=1.0).tail == "zero"

    def test_power(self):
        seq = DecaySequence.power(2.0)
        assert seq[0] == 1.0
        assert np.isclose(seq[2], 0.25)
        assert np.isclose(seq.tail_sum(1), np.pi ** 2 / 6.0)

        with pytest.raises(NonSummableError):
            DecaySequence.power(1.0).tail_sum(1)

        with pytest.raises(NonSummableError):
            seq.geometric_envelope()

        with pytest.raises(NonSummableError):
            DecaySequence([0.1]).total()

    def test_tail_sums(self):
        e = DecaySequence.geometric(0.3)
        S = tail_sums(e)
        for j in (0, 1, 5):
            assert np.isclose(S[j], 0.3 ** j / 0.7)

        with pytest.raises(NonSummableError):
            tail_sums(DecaySequence.power(2.0))


class TestLemmas(object):
    """
    Tests for the product expectation and recursion lemmas.
    """

    P = np.array([[0.9, 0.1], [0.2, 0.8]])

    def test_lemma_ult_bound(self):
        alpha = DecaySequence(10.0 ** -np.arange(10))
        value, j = lemma_ult_bound(0.5, alpha, 4, factor=1.0, return_j=True)
        assert np.isclose(value, 0.2625)
        assert j == 1

        # the independent case
        assert np.isclose(lemma_ult_bound(0.3, DecaySequence.zeros(), 6), 0.3 ** 6)
        assert lemma_ult_bound(0.0, DecaySequence.zeros(), 3) == 0.0

        with pytest.raises(ValueError):
            lemma_ult_bound(0.5, alpha, 1)

        with pytest.raises(ValueError):
            lemma_ult_bound(1.0, alpha, 4)

    def test_lemma_ult_oracle(self):
        values = np.array([0.2, 0.8])

        iid = np.array([[0.3, 0.7], [0.3, 0.7]])
        assert np.isclose(lemma_ult_oracle(values, iid, 3), 0.62 ** 3)
        assert np.isclose(lemma_ult_oracle([1.0, 1.0], self.P, 7), 1.0)

        assert np.isclose(lemma_ult_oracle(values, self.P, 1), 0.4)
        assert np.isclose(lemma_ult_oracle(values, self.P, 2), 0.216)

        with pytest.raises(ValueError):
            lemma_ult_oracle([0.2, 1.2], self.P, 2)

        with pytest.raises(ValueError):
            lemma_ult_oracle(values, self.P, 0)

    def test_lemma_ult3(self):
        a = DecaySequence([0.0, 0.3, 0.2], tail="zero")
        v = DecaySequence.geometric(0.9)

        assert np.isclose(lemma_ult3_bound(2.0, a, DecaySequence.zeros(), 4, 2), 2.0 * 0.25)
        assert np.isclose(lemma_ult3_bound(2.0, a, v, 0, 2), 2.0 + 1.0 / (1.0 - np.sqrt(0.5)))

        u = lemma_ult3_recursion(2.0, a, v, 50, 2)
        assert len(u) == 51
        assert u[0] == 2.0
        assert np.isclose(u[1], 0.3 * 2.0 + 0.2 * 2.0 + 0.9)
        for t in range(51):
            assert u[t] <= lemma_ult3_bound(2.0, a, v, t, 2) + 1e-12

        with pytest.raises(ValueError):
            lemma_ult3_bound(1.0, DecaySequence([0.0, 0.6, 0.5], tail="zero"), v, 3, 2)

        with pytest.raises(ValueError):
            lemma_ult3_bound(1.0, a, v, 3, 0)


class TestRenewal(object):
    """
    Tests for the renewal return probabilities.
    """

    def test_bstar(self):
        b = DecaySequence.geometric(0.5, scale=0.5)
        bstar = bstar_sequence(b, 10)
        assert bstar.n_tabulated == 11
        assert bstar[0] == 0.5
        assert np.isclose(bstar[1], 0.5)
        assert np.isclose(bstar[2], 0.375)

        constant = bstar_sequence(DecaySequence(np.full(21, 0.3)), 20)
        assert np.allclose(constant.values, 0.3, atol=1e-14)

        absorbed = bstar_sequence(DecaySequence([1.0], tail="geometric", scale=1.0, rate=1.0), 10)
        assert np.allclose(absorbed.values, 1.0)

        with pytest.raises(ValueError):
            bstar_sequence(DecaySequence(np.full(5, 1.5)), 3)

        with pytest.raises(ValueError):
            bstar_sequence(b, -1)

    def test_simulate_renewal(self):
        b = DecaySequence.geometric(0.5, scale=0.5)
        est, se = simulate_renewal(b, 15, 20000, make_stream(11, 1))
        exact = bstar_sequence(b, 15).values

        assert est[0] == 1.0
        assert np.all(np.abs(est[1:] - exact[1:]) <= 4.0 * np.maximum(se[1:], 1e-3))

        again, _ = simulate_renewal(b, 15, 20000, make_stream(11, 1))
        assert np.array_equal(est, again)


class TestCouplingBounds(object):
    """
    Tests for the coupling bounds of the mixing coefficients.
    """

    zero = DecaySequence.zeros()

    def test_inputs(self):
        with pytest.raises(TypeError):
            BoundInputs(10.0, 5, 1, 0.5, self.zero)

        with pytest.raises(ValueError):
            BoundInputs(10, 10, 1, 0.5, self.zero)

        with pytest.raises(ValueError):
            BoundInputs(10, 5, 0, 0.5, self.zero)

        with pytest.raises(ValueError):
            BoundInputs(10, 5, 1, 1.0, self.zero)

        with pytest.raises(TypeError):
            BoundInputs(10, 5, 1, 0.5, [0.0])

        with pytest.raises(ValueError):
            BoundInputs(10, 5, 1, 0.5, self.zero, eta=1.5)

        inputs = BoundInputs(12, 4, 2, 0.5, self.zero)
        assert inputs.s(12) == 4
        assert np.array_equal(inputs.s([13, 14]), [4, 5])

    def test_thm1_independent(self):
        result = thm1_bound(BoundInputs(10, 5, 1, 0.5, self.zero))
        assert isinstance(result, BoundResult)
        assert np.isclose(float(result), 2.0 * 0.5 ** 5 / 0.5, rtol=1e-12)
        assert result.remainder >= 0.0

        # the first block is only partly counted
        result = thm1_bound(BoundInputs(12, 4, 2, 0.5, self.zero))
        assert np.isclose(result.value, 0.5, rtol=1e-12)

        assert thm1_bound(BoundInputs(10, 5, 1, 0.0, self.zero)).value == 0.0

    def test_thm1_deterministic_eta(self):
        inputs = BoundInputs(10, 5, 1, 0.9, DecaySequence.geometric(0.5, scale=0.01), eta=0.5)
        expected = 4.0 * 0.01 * 0.5 ** 5 + 2.0 * 0.5 ** 5 / 0.5
        assert np.isclose(thm1_bound(inputs).value, expected, rtol=1e-12)

        with pytest.raises(NonSummableError):
            thm1_bound(BoundInputs(10, 5, 1, 0.5, self.zero, eta=0.0))

    def test_thm1_errors(self):
        with pytest.raises(ValueError):
            thm1_bound(BoundInputs(6, 5, 1, 0.5, self.zero))

        # a purely tabulated alpha has no certified tail
        with pytest.raises(NonSummableError):
            thm1_bound(BoundInputs(10, 5, 1, 0.5, DecaySequence(np.full(2000, 0.01))))

    def test_thm1_geometric_alpha(self):
        alpha = DecaySequence.geometric(0.6, scale=0.2)
        half = thm1_bound(BoundInputs(40, 20, 1, 0.5, alpha))
        assert np.isfinite(half.value)
        assert half.value > 4.0 * alpha[20]

        best = optimized_thm1_bound(alpha, 0.5, 1, 40)
        assert best.value <= min(half.value, 0.25)

        # no feasible restart
        assert optimized_thm1_bound(alpha, 0.5, 1, 2).details["r"] is None

        # bounds decrease with the lag
        values = [optimized_thm1_bound(alpha, 0.5, 1, n).value for n in (20, 40, 80)]
        assert values[0] >= values[1] >= values[2]

    def test_thm3(self):
        inputs = BoundInputs(10, 5, 1, 0.5, self.zero, lag_shift=0)
        assert np.isclose(thm3_bound(inputs).value, 0.125, rtol=1e-12)

        # minimal window n = r + 2m
        inputs = BoundInputs(7, 5, 1, 0.5, self.zero, lag_shift=0)
        assert np.isclose(thm3_bound(inputs).value, 2.0 * 0.5 ** 2 / 0.5, rtol=1e-12)

        alpha = DecaySequence.geometric(0.5, scale=0.1)
        inputs = BoundInputs(10, 5, 1, 0.5, alpha, lag_shift=0)
        assert thm3_bound(inputs).value >= alpha[6]

    def test_thm3_default_lag(self):
        alpha = DecaySequence.geometric(0.5, scale=0.1)
        result = thm3_bound(BoundInputs(10, 5, 1, 0.5, alpha))

        # s = 5: min over j of 0.5^floor(5/j) + 8 alpha(j - 1) is 0.6 at j = 4
        assert np.isclose(result.details["terms"][0], 0.6, rtol=1e-12)
        assert np.isclose(result.value, 13.0016, rtol=1e-4)
        assert result.value == thm3_bound(BoundInputs(10, 5, 1, 0.5, alpha, lag_shift=0)).value
        assert result.value > thm3_bound(BoundInputs(10, 5, 1, 0.5, alpha, lag_shift=1)).value

        # the theorem 1 convention is unchanged
        shifted = thm1_bound(BoundInputs(10, 5, 1, 0.5, alpha))
        assert np.isclose(shifted.details["terms"][0], 0.5 ** 5 + 8.0 * 0.05, rtol=1e-12)

    def test_coupling_bound(self):
        disagreement = DecaySequence.geometric(0.5)
        result = coupling_bound(0.01, disagreement, 3)
        assert np.isclose(result.value, 0.01 + 2.0 * 0.5 ** 3 / 0.5)

    def test_thm2(self):
        alpha = DecaySequence.geometric(0.5, scale=0.1)
        result = thm2_bound(alpha, self.zero, self.zero, 0.0, 20, 10)
        assert np.isclose(result.value, 4.0 * 0.1 * 0.5 ** 10)

        b = DecaySequence.geometric(0.5, scale=0.5)
        S = tail_sums(DecaySequence.geometric(0.3))
        result = thm2_bound(alpha, b, S, 1.0, 20, 10, cap=200)
        assert np.isfinite(result.value)
        assert result.remainder >= 0.0
        assert result.value >= 4.0 * 0.1 * 0.5 ** 10

        # constant b has no summable b*
        constant = DecaySequence([0.3], tail="geometric", scale=0.3, rate=1.0)
        with pytest.raises(NonSummableError):
            thm2_bound(alpha, constant, S, 0.0, 20, 10)

        with pytest.raises(ValueError):
            thm2_bound(alpha, b, S, 1.0, 20, 1)


class TestOmega(object):
    """
    Tests for the truncation/contraction trade-off.
    """

    def test_finite_support(self):
        a = DecaySequence([0.0, 0.5], tail="zero")
        value, p = omega(a, DecaySequence.zeros(), 8, 5, p_max=8, return_p=True)
        assert np.isclose(value, 0.125)
        assert p == 1

    def test_decay(self):
        a = DecaySequence.geometric(0.5, scale=0.25, start=1)
        b = DecaySequence.geometric(0.5, scale=0.1, start=1)
        values = np.array([omega(a, b, 10 + k, 10) for k in range(1, 101)])
        assert np.all(values > 0.0)
        assert values[-1] < 1e-2 * values[0]

    def test_errors(self):
        a = DecaySequence([0.0, 1.0], tail="zero")
        with pytest.raises(ValueError):
            omega(a, DecaySequence.zeros(), 8, 5)

        a = DecaySequence([0.0, 0.5], tail="zero")
        with pytest.raises(ValueError):
            omega(a, DecaySequence.zeros(), 5, 5)

        with pytest.raises(ValueError):
            omega(a, DecaySequence.zeros(), 8, 5, p_max=0)

    def test_cor_mixing_bound(self):
        decay = DerivedDecay(
            DecaySequence.geometric(0.5, scale=0.25 * 0.3, start=1),
            DecaySequence.geometric(0.5, scale=0.25 * 0.1, start=1),
        )
        alpha = DecaySequence.geometric(0.5, scale=0.1)

        binary = cor_mixing_bound("binary", alpha, decay, 30, 15)
        assert np.isfinite(binary.value)
        assert binary.value >= alpha[16]
        assert binary.remainder >= 0.0

        loglinear = cor_mixing_bound("ingarch_log", alpha, decay, 30, 15, K=4.0)
        assert loglinear.value >= binary.value

        with pytest.raises(ValueError):
            cor_mixing_bound("probit", alpha, decay, 30, 15)

        with pytest.raises(ValueError):
            cor_mixing_bound("binary", alpha, decay, 15, 15)

        with pytest.raises(ValueError):
            cor_mixing_bound("binary", alpha, decay, 30, 15, K=0.0)


def test_rate_schedule():
    schedule = rate_schedule("geometric", 20)
    assert schedule.r == 10
    assert schedule.j(9) == 3
    assert schedule.j(2) == 1
    table = schedule.table([20, 21])
    assert np.array_equal(table, [[20, 10, 4], [21, 11, 4]])

    power = rate_schedule("power", 20, kappa=3.0)
    assert np.isclose(power.ell, 2.0 / 3.0)
    assert not power.degenerate

    with pytest.warns(UserWarning):
        assert rate_schedule("power", 20, kappa=1.005).degenerate

    with pytest.raises(ValueError):
        rate_schedule("power", 20, kappa=1.0)

    with pytest.raises(ValueError):
        rate_schedule("power", 20, kappa=3.0, ell=0.2)

    with pytest.raises(ValueError):
        rate_schedule("harmonic", 20)
