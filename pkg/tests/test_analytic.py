import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bayesnam import analytic as an
from bayesnam.errors import ConfigError

SIG = math.sqrt(2.0)


def mp_cdf(z):
    mpmath.mp.dps = 40
    return float(mpmath.ncdf(z))


class TestCdf:
    def test_anchors(self):
        assert an.std_normal_cdf(0.0) == 0.5
        assert an.std_normal_cdf(3.0) == pytest.approx(0.99865, abs=5e-6)
        assert an.std_normal_cdf(1.96) == pytest.approx(0.97500, abs=5e-6)

    def test_against_mpmath_grid(self):
        z = np.linspace(-8, 8, 1601)
        got = an.std_normal_cdf(z)
        ref = np.array([mp_cdf(v) for v in z])
        assert np.max(np.abs(got - ref)) <= 1e-12

    @settings(max_examples=200)
    @given(st.floats(-8, 8))
    def test_against_mpmath(self, z):
        assert abs(an.std_normal_cdf(z) - mp_cdf(z)) <= 1e-12

    def test_vectorized_shape(self):
        assert an.std_normal_cdf(np.zeros((2, 3))).shape == (2, 3)


class TestQ:
    def test_zero_lambda(self):
        assert np.all(an.q_values(6, 0.0, 1.3) == 0.5)

    def test_value(self):
        assert an.q_value(1, 3.0, SIG) == pytest.approx(0.98305, abs=5e-6)
        assert an.q_value(1, 3.0, SIG) == pytest.approx(mp_cdf(3 / math.sqrt(2)), abs=1e-12)

    def test_monotone(self):
        q = an.q_values(10, 3.0, SIG)
        assert np.all(np.diff(q) >= 0)

    def test_bad_j(self):
        with pytest.raises(ConfigError):
            an.q_value(0, 1.0, 1.0)


class TestLemma1:
    def test_case_two(self):
        assert an.lemma1_accuracy(3.0, 2.0, 3) == pytest.approx(0.99865, abs=5e-6)

    @pytest.mark.parametrize("s2,d", [(0.5, 2), (4.0, 7)])
    def test_zero_lambda(self, s2, d):
        assert an.lemma1_accuracy(0.0, s2, d) == 0.5

    def test_bad_d(self):
        with pytest.raises(ConfigError):
            an.lemma1_accuracy(1.0, 1.0, 1)

    def test_monte_carlo(self):
        rng = np.random.default_rng(12)
        n = 1_000_000
        y = rng.choice([-1.0, 1.0], n)
        x = 1.0 * y[:, None] + 2.0 * rng.standard_normal((n, 3))
        acc = np.mean(np.sign(x.mean(axis=1)) == y)
        assert abs(acc - an.lemma1_accuracy(1.0, 4.0, 4)) <= 0.002


def brute_p_acc(k, tau, lam, sigma):
    """Direct sum with math.comb and mpmath cdf."""
    return sum(
        mp_cdf(lam * math.sqrt(j) / sigma) * math.comb(k, j) * (1 - tau) ** j * tau ** (k - j)
        for j in range(1, k + 1)
    )


class TestPAcc:
    @pytest.mark.parametrize("k", [1, 2, 5, 20])
    def test_tau_zero(self, k):
        assert an.p_acc(k, 0.0, 3.0, SIG) == pytest.approx(an.q_value(k, 3.0, SIG), abs=1e-15)

    @pytest.mark.parametrize("k", [1, 4, 200])
    def test_tau_one(self, k):
        assert an.p_acc(k, 1.0, 3.0, SIG) == 0.0

    @pytest.mark.parametrize("k,tau", [(3, 0.25), (7, 0.6), (30, 0.1), (60, 0.9)])
    def test_brute_sum(self, k, tau):
        assert an.p_acc(k, tau, 0.7, 1.3) == pytest.approx(brute_p_acc(k, tau, 0.7, 1.3), abs=1e-12)

    def test_large_k_finite(self):
        v = an.p_acc(200, 0.5, 0.01, 1.0)
        assert 0.0 < v < 1.0

    @pytest.mark.parametrize("kw", [{"k": 0, "tau": 0.1}, {"k": 2, "tau": 1.5}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            an.p_acc(lam=1.0, sigma=1.0, **kw)

    @settings(max_examples=100, deadline=None)
    @given(
        k=st.integers(1, 60),
        tau=st.floats(0.0, 1.0),
        lam=st.floats(0.0, 5.0),
        sigma=st.floats(0.2, 5.0),
    )
    def test_sandwich(self, k, tau, lam, sigma):
        p = an.p_acc(k, tau, lam, sigma)
        mass = 1.0 - tau**k
        q1, qk = an.q_value(1, lam, sigma), an.q_value(k, lam, sigma)
        assert q1 * mass - 1e-12 <= p <= qk * mass + 1e-12
        assert 0.0 <= p <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(
        k=st.integers(1, 40),
        tau=st.floats(0.0, 0.95),
        lam=st.floats(0.0, 3.0),
        dl=st.floats(0.05, 1.0),
        sigma=st.floats(0.5, 3.0),
    )
    def test_increasing_in_lambda(self, k, tau, lam, dl, sigma):
        # past z ~ 8.3, Phi rounds to 1.0 and strictness cannot show
        assume((lam + dl) * math.sqrt(k) / sigma < 8.0)
        assert an.p_acc(k, tau, lam + dl, sigma) > an.p_acc(k, tau, lam, sigma)


class TestDelta:
    @pytest.mark.parametrize("k", [3, 5, 12])
    def test_at_zero(self, k):
        d, _ = an.delta_p(k, 0.0, 3.0, SIG)
        assert d == pytest.approx(an.q_value(k, 3.0, SIG) - an.q_value(1, 3.0, SIG), abs=1e-15)
        assert d > 0

    @pytest.mark.parametrize("tau", [0.0, 0.3, 1.0])
    def test_k_one(self, tau):
        assert an.delta_p(1, tau, 3.0, SIG) == (0.0, 0.0)

    def test_matches_difference(self):
        for k, tau in [(2, 0.3), (8, 0.45)]:
            d, _ = an.delta_p(k, tau, 1.2, 0.9)
            assert d == pytest.approx(an.p_acc(k, tau, 1.2, 0.9) - an.p_acc(1, tau, 1.2, 0.9), abs=1e-15)

    def test_k3_slope_positive(self):
        for tau in np.arange(0, 0.501, 0.01):
            assert an.delta_p(3, tau, 3.0, SIG)[1] > 0

    @settings(max_examples=100, deadline=None)
    @given(
        k=st.integers(2, 50),
        tau=st.floats(0.01, 0.99),
        lam=st.floats(0.0, 4.0),
        sigma=st.floats(0.3, 3.0),
    )
    def test_derivative_vs_central_difference(self, k, tau, lam, sigma):
        h = 1e-6
        fd = (an.delta_p(k, tau + h, lam, sigma)[0] - an.delta_p(k, tau - h, lam, sigma)[0]) / (2 * h)
        assert abs(an.delta_p(k, tau, lam, sigma)[1] - fd) <= 1e-6

    @pytest.mark.parametrize("tau", [0.0, 1.0])
    def test_derivative_at_edges(self, tau):
        # one-sided differences at the ends of [0, 1]
        h = 1e-7
        s = 1 if tau == 0 else -1
        fd = s * (an.delta_p(4, tau + s * h, 2.0, 1.0)[0] - an.delta_p(4, tau, 2.0, 1.0)[0]) / h
        assert abs(an.delta_p(4, tau, 2.0, 1.0)[1] - fd) <= 1e-5


class TestMonteCarlo:
    def test_all_dropped(self):
        est, se = an.mc_oracle(4, 1.0, 3.0, SIG, 10_000)
        assert est == 0.0 and se == 0.0

    def test_separated(self):
        est, se = an.mc_oracle(3, 0.0, 10.0, 1.0, 20_000)
        assert est == pytest.approx(1.0, abs=max(se, 1e-12))

    @pytest.mark.parametrize("k,tau", [(3, 0.25), (5, 0.3)])
    def test_agrees(self, k, tau):
        est, se = an.mc_oracle(k, tau, 3.0, SIG, 1_000_000, seed=k)
        assert abs(est - an.p_acc(k, tau, 3.0, SIG)) <= 3 * se

    def test_reproducible(self):
        assert an.mc_oracle(3, 0.2, 1.0, 1.0, 5000, seed=4) == an.mc_oracle(3, 0.2, 1.0, 1.0, 5000, seed=4)

    def test_chunking_invisible_to_count(self):
        est, _ = an.mc_oracle(3, 0.2, 1.0, 1.0, 1000, chunk=7)
        assert 0 < est < 1 and round(est * 1000) == est * 1000


class TestLemma2:
    def test_gap_peak_grid_search(self):
        # independent oracle: dense grid search of Phi(a sqrt 2) - Phi(a) using mpmath
        a = np.linspace(0.01, 3.0, 30_000)
        gap = np.array([mp_cdf(v * math.sqrt(2)) - mp_cdf(v) for v in a[::10]])
        i = int(np.argmax(gap))
        assert abs(a[::10][i] - math.sqrt(math.log(2))) < 2e-3
        assert an.adjacent_gap_bound(1) == pytest.approx(gap.max(), abs=1e-6)
        assert an.adjacent_gap_bound(1) == pytest.approx(0.08302, abs=5e-4)
        assert an.adjacent_gap_bound(1) < 1 / 6

    def test_constants(self):
        assert an.lemma2_bound(2) == pytest.approx(0.147, abs=1e-3)
        assert an.lemma2_bound(2) / 3 <= 0.049
        assert an.lemma2_bound(3) / 4 <= 0.035

    def test_decreasing(self):
        b = [an.lemma2_bound(j) for j in range(1, 40)]
        assert all(x > y for x, y in zip(b, b[1:]))

    @settings(max_examples=60)
    @given(j=st.integers(1, 30), lam=st.floats(0.0, 10.0), sigma=st.floats(0.1, 10.0))
    def test_bound_holds(self, j, lam, sigma):
        q = an.q_values(j + 1, lam, sigma)
        assert (j + 1) * (q[j] - q[j - 1]) <= an.lemma2_bound(j) + 1e-12


class TestReport:
    def test_tau_star(self):
        grid = np.round(np.arange(0, 1.0001, 0.01), 10)
        rep = an.theorem1_report([2, 100], grid, 3.0, SIG)
        assert rep.tau_star[100] >= 0.9
        assert rep.tau_star[2] >= 0.4
        assert len(rep.rows) == 2 * len(grid)

    def test_tau_star_none_when_slope_starts_negative(self):
        # derivative at tau=1 for k=2 is negative (dropping the last feature hurts)
        rep = an.theorem1_report([2], [1.0], 3.0, SIG)
        assert rep.tau_star[2] is None

    def test_small_lambda(self):
        grid = np.round(np.arange(0, 0.5001, 0.01), 10)
        rep = an.theorem1_report(range(3, 11), grid, 0.01, SIG)
        assert all(r["delta"] > 0 and r["ddelta_dtau"] > 0 for r in rep.rows)

    def test_empty(self):
        with pytest.raises(ConfigError):
            an.theorem1_report([], [0.1], 1.0, 1.0)

    def test_serialization(self, tmp_path):
        rep = an.theorem1_report([3], [0.0, 0.25], 3.0, SIG)
        an.mc_crosscheck(rep, 20_000)
        rep.to_csv(tmp_path / "r.csv")
        rep.to_json(tmp_path / "r.json")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert lines[0] == "k,tau,delta,ddelta_dtau" and len(lines) == 3
        assert float(lines[2].split(",")[2]) == rep.rows[1]["delta"]
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["tau_star"] == {"3": 0.25}
        assert doc["mc"]["max_dev_in_stderr"] < 4

    def test_theory_point(self):
        tp = an.theory_point(3, 0.2, 3.0, SIG)
        assert len(tp.q) == 3 and 0 <= tp.p_acc <= 1
        assert (tp.delta_p, tp.ddelta_dtau) == an.delta_p(3, 0.2, 3.0, SIG)
