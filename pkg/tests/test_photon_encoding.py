"""Tests for the photon-number encoding: Bob's windows, Eve's states, rates."""

import math

import numpy as np
import pytest
from scipy import stats

from lcqkd.channels import ChannelPair, EffectiveLine, LineGeometry, split_line
from lcqkd.errors import TruncationError, ValidationError
from lcqkd.photon_encoding import (
    EveIntegralKernel,
    FockDiagonal,
    PhotonNumberEncoding,
    bob_conditional_probs,
    eve_conditional_state,
    holevo_bound,
    key_rate,
    window_overlap,
)
from lcqkd.numerics import ProbabilityDistribution

from oracles import kappa_integral_mp, poisson_window

# p(b|a) at mu0=40, mu1=60, thetas (1.5, 2.5, 30.5, 29.5), s1=5, s2=3,
# r_E=0.02, from the 2-D adaptive-quadrature oracle (oracles.bob_prob_bruteforce).
BOB_SMALL_MU_REFERENCE = {
    (0, 0): 4.385077873622e-01,
    (1, 0): 2.450539606700e-01,
    (0, 1): 2.786652011326e-01,
    (1, 1): 3.193854619513e-01,
}

# Leading diagonal weights of Eve's state at the same configuration, from the
# nested-quadrature oracle (oracles.eve_fock_bruteforce); truncations 52 / 30.
EVE_SMALL_MU_REFERENCE = {
    0: [
        4.341769613552009e-01,
        3.412410441808847e-01,
        1.538276545136952e-01,
        5.184299259636552e-02,
        1.445136973644665e-02,
        3.508294838222931e-03,
        7.647628174587292e-04,
        1.527065080664262e-04,
    ],
    1: [
        3.436148496702217e-01,
        3.459251512534322e-01,
        1.941732885415353e-01,
        7.967379621841281e-02,
        2.654667600076650e-02,
        7.586675142309355e-03,
        1.922302272712652e-03,
        4.414462077756032e-04,
    ],
}
EVE_SMALL_MU_MEANS = {0: 0.885710541153581, 1: 1.132991107434909}

# chi(Poisson(9), Poisson(11), 1/2) from a 50-digit mpmath evaluation at N=400.
HOLEVO_POISSON_9_11 = 0.068868919334109237

# Exact-Poisson window probability for the bright reference windows below
# (oracles.poisson_window at intensity 9000 over [7000, 9500]).
BRIGHT_P00_POISSON = 0.9999999150959931


def line_of(s1: float, s2: float, r: float) -> EffectiveLine:
    return EffectiveLine(
        pre_eve=ChannelPair(transmittance=1.0 / (1.0 + s1), gain=1.0 + s1),
        post_eve=ChannelPair(transmittance=1.0 / (1.0 + s2), gain=1.0 + s2),
        leak_fraction=r,
    )


def small_mu_case():
    enc = PhotonNumberEncoding(
        mu0=40.0, mu1=60.0, theta1=1.5, theta2=2.5, theta3=30.5, theta4=29.5
    )
    return enc, line_of(5.0, 3.0, 0.02)


def bright_enc():
    return PhotonNumberEncoding(
        mu0=9000.0, mu1=11000.0, theta1=500.0, theta2=500.0, theta3=3000.0, theta4=3000.0
    )


class TestPhotonNumberEncoding:
    def test_validation(self):
        with pytest.raises(ValidationError):
            PhotonNumberEncoding(mu0=0.0, mu1=10.0, theta1=0, theta2=0, theta3=1, theta4=1)
        with pytest.raises(ValidationError):
            PhotonNumberEncoding(mu0=10.0, mu1=10.0, theta1=0, theta2=0, theta3=1, theta4=1)
        with pytest.raises(ValidationError):
            PhotonNumberEncoding(mu0=9.0, mu1=11.0, theta1=5.0, theta2=0, theta3=2.0, theta4=1)
        with pytest.raises(ValidationError):
            PhotonNumberEncoding(mu0=9.0, mu1=11.0, theta1=-1.0, theta2=0, theta3=2.0, theta4=1)
        with pytest.raises(ValidationError):
            # mu - theta3 < 0: lower window would cross zero counts
            PhotonNumberEncoding(mu0=9.0, mu1=11.0, theta1=0, theta2=0, theta3=11.0, theta4=1)

    def test_amplitudes_enter_through_intensity_only(self):
        # the encoding carries |gamma_a|^2; any phase convention for the
        # amplitude itself is unobservable after phase randomization
        enc = PhotonNumberEncoding(mu0=9.0, mu1=16.0, theta1=0, theta2=0, theta3=12.0, theta4=12.0)
        assert enc.gamma(0) == 3.0
        assert enc.gamma(1) == 4.0
        assert enc.mean_photons(0) == 9.0
        assert enc.mu_mid == 12.5

    def test_windows(self):
        enc = bright_enc()
        assert enc.window(0) == (7000.0, 9500.0)
        assert enc.window(1) == (10500.0, 13000.0)
        assert enc.uses_erf_windows
        enc_small, _ = small_mu_case()
        assert not enc_small.uses_erf_windows


class TestWindowOverlap:
    def test_matches_inclusive_poisson_sums(self):
        for t in (3.0, 20.0, 57.0):
            got = window_overlap(t, 53.0, 80.0, use_erf=False)
            assert got == pytest.approx(poisson_window(t, 53.0, 80.0), abs=1e-12)

    def test_open_lower_drops_boundary_count(self):
        # (53, 80] excludes the count 53 that [53, 80] includes
        for t in (40.0, 53.0, 60.0):
            open_ = window_overlap(t, 53.0, 80.0, use_erf=False, open_lower=True)
            assert open_ == pytest.approx(poisson_window(t, 54.0, 80.0), abs=1e-12)
            gap = window_overlap(t, 53.0, 80.0, use_erf=False) - open_
            assert gap == pytest.approx(stats.poisson.pmf(53, t), abs=1e-12)

    def test_erf_branch_tracks_exact_sums_for_bright_windows(self):
        t = np.array([8000.0, 9000.0, 9700.0])
        exact = window_overlap(t, 7000.0, 9500.0, use_erf=False)
        approx = window_overlap(t, 7000.0, 9500.0, use_erf=True)
        assert np.max(np.abs(exact - approx)) < 2e-3

    def test_rejects_inverted_window(self):
        with pytest.raises(ValidationError):
            window_overlap(5.0, 10.0, 3.0, use_erf=False)


class TestBobConditionalProbs:
    def test_small_mu_matches_bruteforce(self):
        enc, line = small_mu_case()
        table = bob_conditional_probs(enc, line)
        for (b, a), ref in BOB_SMALL_MU_REFERENCE.items():
            assert table.prob(b, a) == pytest.approx(ref, abs=1e-9)

    def test_bright_noiseless_windows(self):
        probs = bob_conditional_probs(bright_enc(), line_of(0.0, 0.0, 0.0))
        assert probs.prob(0, 0) == pytest.approx(BRIGHT_P00_POISSON, abs=1e-5)
        assert probs.prob(1, 0) < 1e-6
        assert probs.prob(1, 1) > 0.999
        assert probs.prob(0, 1) < 1e-6

    def test_full_leak_decouples_bob_from_bit(self):
        enc, _ = small_mu_case()
        probs = bob_conditional_probs(enc, line_of(5.0, 3.0, 1.0))
        assert probs.prob(0, 0) == probs.prob(0, 1)
        assert probs.prob(1, 0) == probs.prob(1, 1)

    def test_intensity_swap_mirrors_table(self):
        enc, line = small_mu_case()
        swapped = PhotonNumberEncoding(
            mu0=enc.mu1, mu1=enc.mu0, theta1=enc.theta1, theta2=enc.theta2,
            theta3=enc.theta3, theta4=enc.theta4,
        )
        t = bob_conditional_probs(enc, line)
        s = bob_conditional_probs(swapped, line)
        for a in (0, 1):
            for b in (0, 1):
                assert s.prob(b, a) == pytest.approx(t.prob(b, 1 - a), rel=1e-12)

    def test_row_sums_bounded(self):
        enc, line = small_mu_case()
        probs = bob_conditional_probs(enc, line)
        assert np.all(probs.p_conclusive_given_a <= 1.0 + 1e-9)
        assert np.all(probs.p_fail_given_a >= -1e-9)
        assert probs.p_conclusive == pytest.approx(0.5 * probs.table.sum())

    def test_widening_outer_cuts_grows_conclusive(self):
        line = line_of(2.0, 1.0, 0.01)
        prev = -1.0
        for width in (5.0, 10.0, 20.0, 35.0):
            enc = PhotonNumberEncoding(
                mu0=40.0, mu1=60.0, theta1=2.0, theta2=2.0,
                theta3=width, theta4=width,
            )
            p = bob_conditional_probs(enc, line).p_conclusive
            assert p >= prev - 1e-12
            prev = p


class TestEveConditionalState:
    def test_small_mu_matches_bruteforce(self):
        enc, line = small_mu_case()
        for a in (0, 1):
            state = eve_conditional_state(a, enc, line, method="direct")
            head = EVE_SMALL_MU_REFERENCE[a]
            got = state.probs.weights
            for n, ref in enumerate(head):
                assert got[n] == pytest.approx(ref, abs=1e-9)
            assert state.mean_photons == pytest.approx(EVE_SMALL_MU_MEANS[a], rel=1e-9)

    def test_normalized(self):
        enc, line = small_mu_case()
        for a in (0, 1):
            state = eve_conditional_state(a, enc, line)
            assert state.probs.weights.sum() == pytest.approx(1.0, abs=1e-6)
            assert len(state.probs) == state.truncation + 1

    def test_vanishing_leak_gives_vacuum(self):
        enc, _ = small_mu_case()
        state = eve_conditional_state(0, enc, line_of(5.0, 3.0, 1e-12))
        assert state.probs.weights[0] > 1.0 - 1e-6

    def test_wide_open_window_mean(self):
        # without post-selection Eve's mean is r_E (eta1 mu_a + G1 - 1)
        mu0, mu1 = 40.0, 60.0
        mu = 0.5 * (mu0 + mu1)
        enc = PhotonNumberEncoding(
            mu0=mu0, mu1=mu1, theta1=0.0, theta2=0.0, theta3=mu, theta4=4.0 * mu
        )
        line = line_of(4.0, 2.0, 0.05)
        eta1 = line.pre_eve.eta
        for a, mu_a in ((0, mu0), (1, mu1)):
            state = eve_conditional_state(a, enc, line)
            expect = 0.05 * (eta1 * mu_a + 4.0)
            assert state.mean_photons == pytest.approx(expect, rel=1e-3)

    def test_small_pre_gain_reduces_to_poisson(self):
        mu0, mu1 = 40.0, 60.0
        mu = 0.5 * (mu0 + mu1)
        enc = PhotonNumberEncoding(
            mu0=mu0, mu1=mu1, theta1=0.0, theta2=0.0, theta3=mu, theta4=4.0 * mu
        )
        line = line_of(0.0, 3.0, 0.05)
        for a, mu_a in ((0, mu0), (1, mu1)):
            state = eve_conditional_state(a, enc, line)
            lam = 0.05 * mu_a
            ref = stats.poisson.pmf(np.arange(state.truncation + 1), lam)
            assert np.max(np.abs(state.probs.weights - ref)) < 1e-9

    def test_kernel_route_agrees_with_direct(self):
        # bright, strongly amplified regime where the product-expansion
        # kernels are valid; "auto" must select them here
        enc = bright_enc()
        line = line_of(10.0, 10.0, 1e-3)
        for a in (0, 1):
            direct = eve_conditional_state(a, enc, line, method="direct")
            kernel = eve_conditional_state(a, enc, line, method="kernel")
            auto = eve_conditional_state(a, enc, line, method="auto")
            n = min(direct.truncation, kernel.truncation) + 1
            tv = 0.5 * np.sum(
                np.abs(direct.probs.weights[:n] - kernel.probs.weights[:n])
            )
            assert tv < 2e-5
            assert np.array_equal(auto.probs.weights, kernel.probs.weights)

    def test_truncation_cap(self):
        enc = PhotonNumberEncoding(
            mu0=1e12, mu1=2e12, theta1=0.0, theta2=0.0, theta3=1.5e12, theta4=1.5e12
        )
        with pytest.raises(TruncationError):
            eve_conditional_state(0, enc, line_of(5.0, 3.0, 0.5))

    def test_validation(self):
        enc, line = small_mu_case()
        with pytest.raises(ValidationError):
            eve_conditional_state(2, enc, line)
        with pytest.raises(ValidationError):
            eve_conditional_state(0, enc, line, method="fastest")


class TestEveIntegralKernel:
    def test_kappa_against_quadrature(self):
        kern = EveIntegralKernel(a_coef=1.9, b_offset=0.0, b_slope=1.0)
        for n in (0, 1, 3):
            for b_val in (0.5, 4.0):
                got = kern.log_kappa(n, np.array([b_val]))[0]
                ref = math.log(kappa_integral_mp(n, 1.9, b_val))
                assert got == pytest.approx(ref, abs=1e-12)

    def test_kappa_tilde_against_quadrature(self):
        # the tilde moment carries one power of x less than kappa
        kern = EveIntegralKernel(a_coef=2.3, b_offset=0.0, b_slope=1.0)
        for n in (1, 2, 4):
            for b_val in (0.7, 3.0):
                got = kern.log_kappa_tilde(n, np.array([b_val]))[0]
                ref = math.log(kappa_integral_mp(n, 2.3, b_val, power_shift=-1))
                assert got == pytest.approx(ref, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValidationError):
            EveIntegralKernel(a_coef=0.0, b_offset=0.0, b_slope=1.0)
        kern = EveIntegralKernel(a_coef=1.0, b_offset=0.0, b_slope=1.0)
        with pytest.raises(ValidationError):
            kern.log_kappa_tilde(0, np.array([1.0]))


class TestHolevoBound:
    def test_identical_states(self):
        p = ProbabilityDistribution(np.array([0.3, 0.7]))
        rho = FockDiagonal(probs=p, truncation=1)
        assert holevo_bound(rho, rho, 0.5, 0.5) == 0.0

    def test_disjoint_supports(self):
        rho0 = FockDiagonal(probs=ProbabilityDistribution(np.array([1.0, 0.0])), truncation=1)
        rho1 = FockDiagonal(probs=ProbabilityDistribution(np.array([0.0, 1.0])), truncation=1)
        assert holevo_bound(rho0, rho1, 0.5, 0.5) == pytest.approx(1.0, abs=1e-12)

    def test_poisson_pair_reference(self):
        n = np.arange(200)
        rho0 = stats.poisson.pmf(n, 9.0)
        rho1 = stats.poisson.pmf(n, 11.0)
        rho0 /= rho0.sum()
        rho1 /= rho1.sum()
        got = holevo_bound(rho0, rho1, 0.5, 0.5)
        assert got == pytest.approx(HOLEVO_POISSON_9_11, abs=1e-6)

    def test_unequal_truncations_padded(self):
        out = holevo_bound(
            np.array([0.5, 0.5]), np.array([0.2, 0.3, 0.5]), 0.4, 0.6
        )
        assert 0.0 <= out <= 1.0

    def test_weight_validation(self):
        p = ProbabilityDistribution(np.array([1.0]))
        rho = FockDiagonal(probs=p, truncation=0)
        with pytest.raises(ValidationError):
            holevo_bound(rho, rho, 0.7, 0.7)


class TestKeyRate:
    def test_noiseless_wide_windows(self):
        enc = PhotonNumberEncoding(
            mu0=9000.0, mu1=11000.0, theta1=0.0, theta2=0.0,
            theta3=10000.0, theta4=1e6,
        )
        out = key_rate(enc, line_of(0.0, 0.0, 0.0))
        assert out.i_ab == pytest.approx(1.0, abs=1e-9)
        assert out.normalized_rate == pytest.approx(1.0, abs=1e-9)
        assert out.eve_bound == 0.0

    def test_reference_breakdown_mid_line(self):
        geometry = LineGeometry(span_km=1000.0, eve_position_km=500.0)
        line = split_line(geometry, 1e-4)
        out = key_rate(bright_enc(), line)
        assert out.i_ab == pytest.approx(0.1177723225229339, rel=1e-9)
        assert out.eve_bound == pytest.approx(0.005330889569310049, rel=1e-9)
        assert out.p_conclusive == pytest.approx(0.6564654112844832, rel=1e-9)
        assert out.normalized_rate == pytest.approx(0.07381391152931732, rel=1e-9)

    def test_rate_monotone_in_leak_fraction(self):
        geometry = LineGeometry(span_km=1000.0, eve_position_km=500.0)
        enc = bright_enc()
        rates = []
        for r in (0.0, 1e-5, 1e-4, 1e-3, 1e-2):
            rates.append(key_rate(enc, split_line(geometry, r)).normalized_rate)
        assert all(hi >= lo - 1e-12 for hi, lo in zip(rates, rates[1:]))

    def test_zero_conclusive_terminates(self):
        # both windows contain no integer count: [0.5, 0.5] and (5, 5]
        enc = PhotonNumberEncoding(
            mu0=4.0, mu1=6.0, theta1=4.5, theta2=0.0, theta3=4.5, theta4=0.0
        )
        out = key_rate(enc, line_of(0.0, 0.0, 0.0))
        assert out.p_conclusive == 0.0
        assert out.normalized_rate == 0.0
