"""Closed-form pricing model: hand-checked values, identities, Monte Carlo."""

import numpy as np
import pytest

from emopanel.toymodel import (
    Signals,
    ToyParams,
    delta_comparative,
    eta_sweep,
    gamma,
    posterior,
    price_q0_bayes,
    price_q0_em,
    price_q1_bayes,
)


class TestGamma:
    def test_fully_revealing_signal(self):
        p = ToyParams(sigma_12=0.0, sigma_i2=0.7)
        g1, _ = gamma(p)
        assert g1 == 1.0

    def test_hand_ratio(self):
        p = ToyParams(sigma_i2=0.1, sigma_12=0.3)
        g1, _ = gamma(p)
        assert g1 == pytest.approx(0.25, abs=1e-12)

    def test_uninformative_limit(self):
        p = ToyParams(sigma_22=1e12)
        _, g2 = gamma(p)
        assert g2 == pytest.approx(0.0, abs=1e-10)

    def test_zero_denominator(self):
        with pytest.raises(ZeroDivisionError):
            gamma(ToyParams(sigma_i2=0.0, sigma_12=0.0))


class TestPosterior:
    def test_zero_signals_zero_mean(self):
        mean, _ = posterior(ToyParams(), Signals(0.0, 0.0))
        assert mean == 0.0

    def test_fully_revealing_zero_variance(self):
        p = ToyParams(sigma_12=0.0, sigma_22=0.0)
        _, var = posterior(p, Signals(1.0, -1.0))
        assert var == pytest.approx(0.0, abs=1e-15)

    def test_variance_never_exceeds_prior(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            p = ToyParams(
                sigma_i2=rng.uniform(0.01, 2),
                sigma_a2=rng.uniform(0.01, 2),
                sigma_12=rng.uniform(0.0, 2),
                sigma_22=rng.uniform(0.0, 2),
            )
            _, var = posterior(p, Signals(0.0, 0.0))
            assert var <= p.sigma_i2 + p.sigma_a2 + 1e-12

    def test_monte_carlo_regression_conditioning(self):
        # independent oracle: simulate shocks and signals, recover the
        # conditional mean of eps_i + eps_a by sample regression on (s1, s2)
        p = ToyParams(sigma_i2=0.8, sigma_a2=0.5, sigma_12=0.6, sigma_22=0.9)
        g1, g2 = gamma(p)
        rng = np.random.default_rng(123)
        n = 1_000_000
        eps_i = rng.normal(0.0, np.sqrt(p.sigma_i2), n)
        eps_a = rng.normal(0.0, np.sqrt(p.sigma_a2), n)
        s1 = eps_i + rng.normal(0.0, np.sqrt(p.sigma_12), n)
        s2 = eps_a + rng.normal(0.0, np.sqrt(p.sigma_22), n)
        target = eps_i + eps_a
        X = np.column_stack([np.ones(n), s1, s2])
        beta, *_ = np.linalg.lstsq(X, target, rcond=None)
        resid = target - X @ beta
        sigma2 = resid @ resid / (n - 3)
        cov = sigma2 * np.linalg.inv(X.T @ X)
        se = np.sqrt(np.diag(cov))
        assert abs(beta[1] - g1) < 3 * se[1]
        assert abs(beta[2] - g2) < 3 * se[2]


class TestPrices:
    def test_q0_no_risk_aversion(self):
        assert price_q0_bayes(ToyParams(m=1.3, rho=0.0)) == pytest.approx(1.3)

    def test_q0_hand_substitution(self):
        p = ToyParams(m=1.0, rho=2.0, n=2, sigma_i2=0.04, sigma_a2=0.02)
        assert price_q0_bayes(p) == pytest.approx(0.92, abs=1e-12)

    def test_q0_large_n_diversifies_idiosyncratic_risk(self):
        p = ToyParams(m=1.0, rho=1.0, n=10**9, sigma_i2=0.5, sigma_a2=0.2)
        assert price_q0_bayes(p) == pytest.approx(1.0 - 0.2, abs=1e-6)

    def test_q1_equals_q0_with_uninformative_signals(self):
        p = ToyParams(sigma_12=1e15, sigma_22=1e15)
        q1 = price_q1_bayes(p, Signals(0.0, 0.0))
        assert q1 == pytest.approx(price_q0_bayes(p), abs=1e-9)

    def test_q1_fully_revealing(self):
        p = ToyParams(m=0.7, rho=3.0, sigma_12=0.0, sigma_22=0.0)
        q1 = price_q1_bayes(p, Signals(0.4, -0.1))
        assert q1 == pytest.approx(0.7 + 0.4 - 0.1, abs=1e-12)

    def test_q1_hand_substitution(self):
        p = ToyParams(m=0.0, rho=1.0, n=1, sigma_i2=1.0, sigma_a2=1.0,
                      sigma_12=1.0, sigma_22=1.0)
        assert price_q1_bayes(p, Signals(1.0, 1.0)) == pytest.approx(0.0, abs=1e-12)

    def test_em_price_equals_bayes_at_zero_eta(self):
        p = ToyParams(eta=0.0)
        assert price_q0_em(p) == price_q0_bayes(p)

    def test_em_price_hand(self):
        p = ToyParams(m=2.0, rho=0.0, eta=0.1)
        assert price_q0_em(p) == pytest.approx(2.2, abs=1e-12)

    def test_em_discount_linear_in_eta(self):
        p = ToyParams(m=1.5, eta=-0.5)
        assert price_q0_bayes(p) - price_q0_em(p) == pytest.approx(0.75, abs=1e-12)

    def test_em_price_increasing_in_eta(self):
        lo = price_q0_em(ToyParams(m=1.0, eta=-0.3))
        hi = price_q0_em(ToyParams(m=1.0, eta=0.3))
        assert hi > lo


class TestComparativeStatic:
    def test_zero_eta(self):
        assert delta_comparative(ToyParams(eta=0.0), Signals(0.3, 0.4)) == 0.0

    def test_hand_value_independent_of_signals(self):
        p = ToyParams(m=2.0, eta=0.1)
        for s in (Signals(0.0, 0.0), Signals(5.0, -3.0)):
            assert delta_comparative(p, s) == pytest.approx(-0.2, abs=1e-12)

    def test_identity_over_random_parameterizations(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            p = ToyParams(
                m=rng.uniform(-3, 3),
                n=int(rng.integers(1, 20)),
                rho=rng.uniform(0, 4),
                sigma_i2=rng.uniform(0.01, 2),
                sigma_a2=rng.uniform(0.01, 2),
                sigma_12=rng.uniform(0.0, 2),
                sigma_22=rng.uniform(0.0, 2),
                eta=rng.uniform(-0.99, 0.99),
            )
            s = Signals(rng.normal(), rng.normal())
            assert abs(delta_comparative(p, s) - (-p.eta * p.m)) < 1e-12


class TestValidation:
    def test_eta_bounds(self):
        with pytest.raises(ValueError):
            ToyParams(eta=1.0)

    def test_n_must_be_positive_integer(self):
        with pytest.raises(ValueError):
            ToyParams(n=0)

    def test_sweep_columns(self):
        rows = eta_sweep(ToyParams(), [0.0, 0.2], Signals(0.1, 0.1))
        assert rows[0]["q0_em"] == rows[0]["q0_bayes"]
        assert rows[1]["q0_em"] != rows[1]["q0_bayes"]
