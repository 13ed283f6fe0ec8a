"""Closed-form two-signal pricing model with an emotion-distorted date-0 price.

One asset pays ``d = m + eps_a + eps_i`` with independent normal shocks.
At date 1 the agent observes two noisy signals about the idiosyncratic and
the aggregate shock and prices the asset off the normal posterior. The
emotion variant scales the mean dividend by ``1 + eta`` at date 0, which
shifts the date-0 price by ``eta * m`` and leaves date-1 prices untouched,
so the price-adjustment differential is ``-eta * m`` identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ToyParams:
    m: float = 1.0
    m_tilde: float = 1.0  # other-asset mean; carried but never priced
    n: int = 1
    rho: float = 1.0
    sigma_i2: float = 1.0
    sigma_a2: float = 1.0
    sigma_12: float = 1.0
    sigma_22: float = 1.0
    eta: float = 0.0

    def __post_init__(self) -> None:
        if self.n < 1 or int(self.n) != self.n:
            raise ValueError("n must be an integer >= 1")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        for name in ("sigma_i2", "sigma_a2", "sigma_12", "sigma_22"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not -1.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (-1, 1)")


@dataclass(frozen=True)
class Signals:
    s1: float
    s2: float


@dataclass(frozen=True)
class ToyPrices:
    q0_bayes: float
    q1_bayes: float
    q0_em: float


def gamma(params: ToyParams) -> tuple[float, float]:
    """Signal-extraction regression coefficients (gamma1, gamma2)."""
    d1 = params.sigma_i2 + params.sigma_12
    d2 = params.sigma_a2 + params.sigma_22
    if d1 <= 0 or d2 <= 0:
        raise ZeroDivisionError("signal variance is zero; gammas undefined")
    return params.sigma_i2 / d1, params.sigma_a2 / d2


def posterior(params: ToyParams, s: Signals) -> tuple[float, float]:
    """Posterior (mean, variance) of the combined shock eps_i + eps_a."""
    g1, g2 = gamma(params)
    mean = g1 * s.s1 + g2 * s.s2
    var = (1.0 - g1) * params.sigma_i2 + (1.0 - g2) * params.sigma_a2
    return mean, var


def price_q0_bayes(params: ToyParams) -> float:
    """Date-0 price under Bayesian valuation: mean minus the risk premium."""
    return params.m - params.rho * (params.sigma_i2 / params.n + params.sigma_a2)


def price_q1_bayes(params: ToyParams, s: Signals) -> float:
    """Date-1 price: posterior mean dividend minus the shrunken risk premium."""
    g1, g2 = gamma(params)
    premium = params.rho * ((1.0 - g1) * params.sigma_i2 / params.n + (1.0 - g2) * params.sigma_a2)
    return params.m + g1 * s.s1 + g2 * s.s2 - premium


def price_q0_em(params: ToyParams) -> float:
    """Date-0 price when the mean dividend is overweighted by (1 + eta)."""
    return params.m * (1.0 + params.eta) - params.rho * (
        params.sigma_i2 / params.n + params.sigma_a2
    )


def prices(params: ToyParams, s: Signals) -> ToyPrices:
    return ToyPrices(
        q0_bayes=price_q0_bayes(params),
        q1_bayes=price_q1_bayes(params, s),
        q0_em=price_q0_em(params),
    )


def delta_comparative(params: ToyParams, s: Signals) -> float:
    """Difference in date-0-to-date-1 price adjustments, Bayesian minus
    emotional.

    Computed as (q0_bayes - q1) - (q0_em - q1); the date-1 price cancels,
    leaving -eta * m for every admissible parameterization, independent of
    the signals.
    """
    p = prices(params, s)
    delta = (p.q0_bayes - p.q1_bayes) - (p.q0_em - p.q1_bayes)
    expected = -params.eta * params.m
    if not math.isclose(delta, expected, rel_tol=0.0, abs_tol=1e-9 * (1 + abs(expected))):
        raise AssertionError(
            f"comparative-static identity violated: {delta} != {expected}"
        )
    return delta


def eta_sweep(params: ToyParams, etas: list[float], s: Signals) -> list[dict[str, float]]:
    """Price columns over an eta grid, for CSV emission by the CLI."""
    rows = []
    for eta in etas:
        p = ToyParams(
            m=params.m, m_tilde=params.m_tilde, n=params.n, rho=params.rho,
            sigma_i2=params.sigma_i2, sigma_a2=params.sigma_a2,
            sigma_12=params.sigma_12, sigma_22=params.sigma_22, eta=eta,
        )
        pr = prices(p, s)
        rows.append({
            "eta": eta,
            "q0_bayes": pr.q0_bayes,
            "q1_bayes": pr.q1_bayes,
            "q0_em": pr.q0_em,
            "delta_gap": delta_comparative(p, s),
        })
    return rows
