"""Threshold crossing fits and the below-threshold scaling law."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import curve_fit, least_squares
from scipy.special import erfc, erfcinv

SCALING_PREFACTOR = 0.143


class NoCrossingError(RuntimeError):
    """The failure-rate curves of different distances do not cross in the data."""


class InsufficientDataError(ValueError):
    pass


# --------------------------------------------------------------------------
# threshold
# --------------------------------------------------------------------------


@dataclass
class ThresholdFit:
    epsilon_th: float
    nu: float
    A: float
    B: float
    C: float
    stderr: float
    cov: np.ndarray
    crossing_guess: float
    n_points: int

    @property
    def t_p(self) -> float:
        return qubit_error_proxy(self.epsilon_th)


def _rows_arrays(rows):
    d = np.array([r.d for r in rows], dtype=float)
    e = np.array([r.epsilon for r in rows], dtype=float)
    k = np.array([r.n_failures for r in rows], dtype=float)
    n = np.array([r.n_trials for r in rows], dtype=float)
    return d, e, k, n


def crossing_estimates(rows) -> list[float]:
    """Pairwise crossings of linearly interpolated ``P_fail(eps)`` curves.

    A crossing is where the larger distance goes from failing less to failing
    more often.
    """
    by_d: dict[int, dict[float, float]] = {}
    for r in rows:
        by_d.setdefault(int(r.d), {})[float(r.epsilon)] = r.rate
    out = []
    for d1, d2 in combinations(sorted(by_d), 2):
        eps = sorted(set(by_d[d1]) & set(by_d[d2]))
        diff = [by_d[d2][e] - by_d[d1][e] for e in eps]
        for i in range(len(eps) - 1):
            a, b = diff[i], diff[i + 1]
            if a < 0 <= b or a <= 0 < b:
                out.append(eps[i] + (eps[i + 1] - eps[i]) * (-a) / (b - a) if b != a else eps[i])
    return out


def _ansatz(X, eps_th, nu, A, B, C):
    e, d = X
    x = (e - eps_th) * d ** (1.0 / nu)
    return A + B * x + C * x * x


def fit_threshold(rows, window: float = 0.3, min_distances: int = 3, min_points: int = 5) -> ThresholdFit:
    """Universal-scaling crossing fit ``P = A + B x + C x^2``, ``x = (eps - eps_th) d^(1/nu)``.

    Parameters
    ----------
    rows : sequence of SweepRow
        One preparation / swap probability, several distances.
    window : float
        Keep points with ``|eps - eps_c| <= window * eps_c`` around the
        pairwise-crossing estimate ``eps_c``.

    Raises
    ------
    NoCrossingError
        If no pair of distances crosses inside the data.
    InsufficientDataError
        Fewer than ``min_distances`` distances or ``min_points`` epsilons.
    """
    rows = list(rows)
    ds = sorted({int(r.d) for r in rows})
    if len(ds) < min_distances:
        raise InsufficientDataError(f"need >= {min_distances} distances, got {ds}")
    if len({r.epsilon for r in rows}) < min_points:
        raise InsufficientDataError(f"need >= {min_points} epsilon points")
    guesses = crossing_estimates(rows)
    if not guesses:
        raise NoCrossingError("failure-rate curves do not cross in the sampled range")
    eps_c = float(np.median(guesses))
    sel = [r for r in rows if abs(r.epsilon - eps_c) <= window * eps_c]
    d, e, k, n = _rows_arrays(sel)
    if len(sel) < 5:
        raise InsufficientDataError("too few points inside the fit window")
    rate = k / n
    # binomial error with a floor so empty / saturated cells keep finite weight
    sigma = np.sqrt(np.maximum(rate * (1 - rate), 1.0 / n) / n)
    slope = np.polyfit(e - eps_c, rate, 1)[0] if len(set(e)) > 1 else 1.0
    p0 = [eps_c, 1.0, float(np.mean(rate)), float(slope), 0.0]
    popt, pcov = curve_fit(_ansatz, (e, d), rate, p0=p0, sigma=sigma, absolute_sigma=True,
                           maxfev=20000, xtol=1e-14, ftol=1e-14)
    stderr = float(math.sqrt(pcov[0, 0])) if np.isfinite(pcov[0, 0]) else float("nan")
    return ThresholdFit(float(popt[0]), float(popt[1]), float(popt[2]), float(popt[3]), float(popt[4]),
                        stderr, pcov, eps_c, len(sel))


# --------------------------------------------------------------------------
# scaling law
# --------------------------------------------------------------------------


def qubit_error_proxy(epsilon):
    """``erfc(sqrt(pi) / (2 sqrt(2 eps)))``: tail mass of an ``N(0, eps)`` shift beyond ``sqrt(pi)/2``."""
    eps = np.asarray(epsilon, dtype=float)
    if np.any(eps <= 0):
        raise ValueError("epsilon must be positive")
    out = erfc(math.sqrt(math.pi) / (2.0 * np.sqrt(2.0 * eps)))
    return float(out) if out.ndim == 0 else out


def epsilon_from_proxy(t: float) -> float:
    """Inverse of :func:`qubit_error_proxy`."""
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    return math.pi / (8.0 * float(erfcinv(t)) ** 2)


@dataclass(frozen=True)
class ScalingParams:
    t: float
    a: float
    nu: float
    mu: float

    def __post_init__(self):
        if not 0 < self.t < 1:
            raise ValueError("t_p must lie in (0, 1)")
        if min(self.a, self.nu, self.mu) <= 0:
            raise ValueError("a, nu and mu must be positive")

    @property
    def epsilon_th(self) -> float:
        return epsilon_from_proxy(self.t)


# swap-out probability -> fitted parameters of the below-threshold law
TABLE_I = {
    0.00: ScalingParams(4.73e-3, 5.0e2, 1.04, 1.21),
    0.06: ScalingParams(3.35e-3, 6.0e2, 1.02, 1.21),
    0.12: ScalingParams(2.30e-3, 5.3e2, 0.99, 1.14),
    0.18: ScalingParams(1.51e-3, 8.5e2, 1.04, 1.14),
    0.24: ScalingParams(0.94e-3, 2.8e3, 1.03, 1.28),
    0.30: ScalingParams(0.53e-3, 8.0e3, 1.06, 1.34),
    0.36: ScalingParams(0.25e-3, 1.3e4, 1.14, 1.27),
    0.42: ScalingParams(0.087e-3, 1.9e4, 1.04, 1.23),
    0.48: ScalingParams(0.016e-3, 1.2e6, 1.31, 1.42),
}


def eval_scaling(epsilon, d, params: ScalingParams, prefactor: float = SCALING_PREFACTOR):
    """``P = 0.143 exp(-a ((t - erfc(sqrt(pi)/(2 sqrt(2 eps)))) d^(1/nu))^mu)``.

    Raises
    ------
    ValueError
        For ``eps <= 0`` or above the threshold (``erfc(...) > t``), where the
        law is undefined.
    """
    gap = np.asarray(params.t - qubit_error_proxy(epsilon))
    if np.any(gap < -1e-12 * params.t):
        raise ValueError("scaling law only holds below threshold")
    gap = np.maximum(gap, 0.0)  # round-off at exactly the threshold
    out = prefactor * np.exp(-params.a * (gap * np.asarray(d, dtype=float) ** (1.0 / params.nu)) ** params.mu)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class ScalingFit:
    params: ScalingParams
    residuals: np.ndarray
    n_points: int
    cost: float


def fit_scaling(rows, p_swap: float | None = None, min_failures: int = 10, t_init: float | None = None,
                prefactor: float = SCALING_PREFACTOR) -> ScalingFit:
    """Least-squares fit of the scaling law on ``log P_fail``.

    Only rows with at least ``min_failures`` failures and ``P < prefactor``
    enter. ``t`` is fitted together with ``a, nu, mu``; ``t_init`` (e.g.
    from a threshold fit) seeds it.
    """
    rows = [r for r in rows if (p_swap is None or abs(r.p_swap - p_swap) < 1e-12)]
    rows = [r for r in rows if r.n_failures >= min_failures and r.rate < prefactor]
    if len(rows) < 5 or len({r.d for r in rows}) < 2:
        raise InsufficientDataError("need >= 5 usable points over >= 2 distances")
    d, e, k, n = _rows_arrays(rows)
    logp = np.log(k / n)
    y = qubit_error_proxy(e)
    ymax = float(np.max(y))
    t0 = t_init if t_init is not None and t_init > ymax else 1.3 * ymax
    # linearised start: log(-log(P/A)) = log a + mu log(t - y) + (mu/nu) log d
    lhs = np.log(-(logp - math.log(prefactor)))
    M = np.column_stack([np.ones_like(d), np.log(t0 - y), np.log(d)])
    c, *_ = np.linalg.lstsq(M, lhs, rcond=None)
    mu0 = float(c[1]) if c[1] > 0.1 else 1.2
    nu0 = float(mu0 / c[2]) if c[2] > 0.05 else 1.0
    a0 = float(math.exp(c[0]))

    def resid(theta):
        t, la, nu, mu = theta
        gap = np.maximum(t - y, 1e-300)
        model = math.log(prefactor) - math.exp(la) * (gap * d ** (1.0 / nu)) ** mu
        return model - logp

    lo = [ymax * (1 + 1e-9), -50.0, 0.1, 0.1]
    hi = [1.0, 50.0, 10.0, 10.0]
    x0 = np.clip([t0, math.log(a0), nu0, mu0], np.array(lo) + 1e-12, np.array(hi) - 1e-12)
    sol = least_squares(resid, x0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    t, la, nu, mu = sol.x
    return ScalingFit(ScalingParams(float(t), float(math.exp(la)), float(nu), float(mu)), sol.fun, len(rows),
                      float(sol.cost))
