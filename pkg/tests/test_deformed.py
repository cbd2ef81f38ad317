import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpath_ais.deformed import (
    exp_q,
    ln_q,
    log_power_mean,
    power_mean,
    q_product_identity_sides,
    q_sum_identity_sides,
    verify_q_identities,
)
from qpath_ais.errors import DegenerateInputError, DomainError, PreconditionError

Q_GRID = [-1.0, 0.0, 0.5, 0.9, 1.0, 1.1, 2.0, 3.0]


class TestLnQ:
    def test_one_maps_to_zero(self):
        for q in Q_GRID:
            assert ln_q(1.0, q) == 0.0

    def test_closed_form_half(self):
        # (4^0.5 - 1) / 0.5
        assert ln_q(4.0, 0.5) == pytest.approx(2.0, abs=1e-14)

    def test_closed_form_two(self):
        # (2^-1 - 1) / (-1)
        assert ln_q(2.0, 2.0) == pytest.approx(0.5, abs=1e-14)

    def test_rejects_nonpositive_and_nan(self):
        for bad in (0.0, -1.0, float("nan")):
            with pytest.raises(DomainError):
                ln_q(bad, 0.5)

    def test_vectorized(self):
        out = ln_q(np.array([1.0, 4.0]), 0.5)
        np.testing.assert_allclose(out, [0.0, 2.0])


class TestExpQ:
    def test_zero_maps_to_one(self):
        for q in Q_GRID:
            assert exp_q(0.0, q) == 1.0

    def test_closed_form(self):
        assert exp_q(2.0, 0.5) == pytest.approx(4.0, abs=1e-14)

    def test_clamp_returns_zero(self):
        assert exp_q(-2.0, 0.0) == 0.0

    def test_rejects_nan(self):
        with pytest.raises(DomainError):
            exp_q(float("nan"), 0.5)


@given(
    log_u=st.floats(min_value=-13.8, max_value=13.8),
    q=st.sampled_from(Q_GRID),
)
@settings(max_examples=300, deadline=None)
def test_inverse_pair(log_u, q):
    # For q > 1 and large u the intermediate v = ln_q(u) stores u only in
    # its last bits: one ulp of v moves the round trip by
    # spacing(v)/(1 + (1-q) v) relatively, which can exceed 1e-12 no
    # matter how exp_q is computed.  The bound below is that first-order
    # propagation limit; everywhere it is small the strict 1e-12 applies.
    u = math.exp(log_u)
    v = ln_q(u, q)
    # the clamp must be inactive on this range for these orders
    assert 1.0 + (1.0 - q) * v > 0.0
    rep_limit = 4.0 * np.spacing(abs(v)) / abs(1.0 + (1.0 - q) * v)
    assert abs(exp_q(v, q) - u) / u <= max(1e-12, rep_limit)


def test_continuity_at_log_branch():
    for u in np.geomspace(1e-3, 1e3, 41):
        bound = 1e-6 * (1.0 + math.log(u) ** 2)
        assert abs(ln_q(u, 1.0 + 1e-7) - math.log(u)) <= bound
        assert abs(ln_q(u, 1.0 - 1e-7) - math.log(u)) <= bound


class TestPowerMean:
    def test_constant_inputs(self):
        for q in Q_GRID:
            assert power_mean((0.5, 0.5), (1.0, 1.0), q) == pytest.approx(1.0, abs=1e-15)

    def test_arithmetic_case(self):
        assert power_mean((0.25, 0.75), (2.0, 4.0), 0.0) == pytest.approx(3.5, abs=1e-13)

    def test_geometric_case(self):
        assert power_mean((0.5, 0.5), (1.0, 4.0), 1.0) == pytest.approx(2.0, abs=1e-13)

    def test_nonpositive_value_rejected(self):
        with pytest.raises(DomainError):
            power_mean((0.5, 0.5), (1.0, 0.0), 0.5)

    def test_weight_sum_violation_rejected(self):
        with pytest.raises(PreconditionError):
            power_mean((0.5, 0.6), (1.0, 2.0), 0.5)
        with pytest.raises(PreconditionError):
            power_mean((0.5, -0.5, 1.0), (1.0, 2.0, 3.0), 0.5)


@given(
    q=st.sampled_from(Q_GRID),
    w0=st.floats(min_value=0.05, max_value=0.95),
    u=st.lists(st.floats(min_value=0.01, max_value=100.0), min_size=2, max_size=2),
    c=st.floats(min_value=1e-3, max_value=1e3),
)
@settings(max_examples=200, deadline=None)
def test_homogeneity(q, w0, u, c):
    w = (w0, 1.0 - w0)
    lhs = power_mean(w, [c * x for x in u], q)
    rhs = c * power_mean(w, u, q)
    assert abs(lhs - rhs) <= 1e-12 * abs(rhs)


@given(
    q=st.sampled_from([-1.0, 0.0, 0.5, 2.0, 3.0]),
    w0=st.floats(min_value=0.05, max_value=0.95),
    u=st.lists(st.floats(min_value=0.1, max_value=10.0), min_size=3, max_size=3),
    a=st.floats(min_value=0.5, max_value=2.0),
    b=st.floats(min_value=-3.0, max_value=3.0),
    flip=st.booleans(),
)
@settings(max_examples=200, deadline=None)
def test_affine_invariance(q, w0, u, a, b, flip):
    # the mean through h(u) = a u^(1-q) + b must not depend on (a, b)
    if flip:
        a = -a
    w = np.array([w0, (1.0 - w0) / 2, (1.0 - w0) / 2])
    u = np.asarray(u)
    s = 1.0 - q
    hval = float(np.sum(w * (a * u**s + b)))
    via_h = ((hval - b) / a) ** (1.0 / s)
    direct = power_mean(w, u, q)
    assert abs(via_h - direct) <= 1e-12 * abs(direct)


def test_monotone_in_order_parameter():
    # the mean is non-increasing in q (arithmetic at q=0 beats geometric at
    # q=1 and the q -> +inf limit is the minimum)
    w = (0.3, 0.7)
    u = (2.0, 5.0)
    qs = np.linspace(-3.0, 4.0, 29)
    vals = [power_mean(w, u, q) for q in qs]
    assert all(x >= y - 1e-12 for x, y in zip(vals, vals[1:]))


class TestLogPowerMean:
    def test_degenerate_weight_is_exact(self):
        for other in (0.0, 123.0, -np.inf):
            assert log_power_mean((1.0, 0.0), (3.25, other), 0.7) == 3.25

    def test_matches_linear_domain(self, rng):
        for _ in range(50):
            q = rng.choice(Q_GRID)
            w0 = rng.uniform(0.05, 0.95)
            u = rng.uniform(0.1, 20.0, size=2)
            expected = math.log(power_mean((w0, 1 - w0), u, q))
            got = log_power_mean((w0, 1 - w0), np.log(u), q)
            assert got == pytest.approx(expected, abs=1e-11)

    def test_geometric_example(self):
        got = log_power_mean((0.5, 0.5), (math.log(1.0), math.log(4.0)), 1.0)
        assert got == pytest.approx(math.log(2.0), abs=1e-14)

    def test_zero_density_drops_out_below_one(self):
        got = log_power_mean((0.3, 0.7), (-np.inf, 0.0), 0.5)
        assert got == pytest.approx(2.0 * math.log(0.7), abs=1e-14)

    def test_all_zero_density_below_one(self):
        assert log_power_mean((0.3, 0.7), (-np.inf, -np.inf), 0.5) == -np.inf

    def test_zero_density_kills_mean_above_one(self):
        assert log_power_mean((0.3, 0.7), (-np.inf, 0.0), 2.0) == -np.inf
        assert log_power_mean((0.3, 0.7), (0.0, -np.inf), 1.5) == -np.inf

    def test_equal_values_are_bit_exact(self):
        for q in Q_GRID:
            assert log_power_mean((0.3, 0.7), (-1234.5678, -1234.5678), q) == -1234.5678

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            log_power_mean((0.5, 0.5), (0.0, np.nan), 0.5)

    def test_vectorized_matches_scalar(self, rng):
        lv = rng.normal(size=(2, 17))
        lv[0, 3] = -np.inf
        for q in (0.0, 0.5, 1.0, 2.0):
            batch = log_power_mean((0.4, 0.6), lv, q)
            single = [log_power_mean((0.4, 0.6), lv[:, i], q) for i in range(17)]
            np.testing.assert_allclose(batch, single, rtol=0, atol=0)


class TestQIdentities:
    def test_single_element_base_case(self):
        for q in (0.0, 0.5, 1.0, 2.0):
            assert verify_q_identities([0.37], q, 1e-12)

    def test_spec_point(self):
        assert verify_q_identities([0.1, 0.2, -0.05], 0.5, 1e-10)

    def test_log_branch_collapses_to_exp(self):
        assert verify_q_identities([0.3, 0.4], 1.0, 1e-12)

    def test_randomized_clamp_safe(self, rng):
        for q in (0.0, 0.5, 1.0, 1.5, 2.0):
            for _ in range(40):
                xs = rng.uniform(-0.1, 0.1, size=rng.integers(1, 6))
                assert verify_q_identities(xs, q, 1e-10)

    def test_sides_agree_numerically(self):
        l1, r1 = q_sum_identity_sides([0.1, 0.2, -0.05], 0.5)
        l2, r2 = q_product_identity_sides([0.1, 0.2, -0.05], 0.5)
        assert l1 == pytest.approx(r1, rel=1e-12)
        assert l2 == pytest.approx(r2, rel=1e-12)

    def test_vanishing_denominator_is_distinguishable(self):
        # partial sum hits 1 + (1-q) * 1 = 0 at q = 2
        with pytest.raises(DegenerateInputError):
            q_sum_identity_sides([1.0, 0.5], 2.0)
