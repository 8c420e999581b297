"""Noise parameters: finite squeezing plus uniform loss folded into one variance."""

from __future__ import annotations

import math
from dataclasses import dataclass

# Vacuum quadrature variance in the frame where GKP peaks sit at multiples of
# sqrt(pi) ([q, p] = i). Squeezing levels are quoted relative to the vacuum, so
# a noise figure epsilon in vacuum units is an outcome variance epsilon / 2.
VACUUM_VARIANCE = 0.5
NOISE_UNITS = ("vacuum", "absolute")


def detector_variance(epsilon: float, units: str = "vacuum") -> float:
    """Outcome variance in the ``sqrt(pi)`` frame for a noise figure ``epsilon``.

    ``units="vacuum"`` (default) treats ``epsilon`` as a multiple of the vacuum
    variance; ``units="absolute"`` uses it as the outcome variance directly.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if units == "vacuum":
        return epsilon * VACUUM_VARIANCE
    if units == "absolute":
        return float(epsilon)
    raise ValueError(f"unknown noise units {units!r}; choose from {NOISE_UNITS}")


def loss_variance(eta: float) -> float:
    """Outcome variance ``(1 - eta) / (2 eta)`` of loss undone by ``1/sqrt(eta)`` rescaling."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"transmissivity must lie in (0, 1], got {eta!r}")
    return (1.0 - eta) / (2.0 * eta)


def db_to_variance(db: float) -> float:
    """Squeezing in dB to variance, ``sigma^2 = 10^(-dB/10)``; ``inf`` dB gives 0."""
    if math.isnan(db):
        raise ValueError("squeezing must be a number")
    if math.isinf(db):
        if db < 0:
            raise ValueError("squeezing of -inf dB is meaningless")
        return 0.0
    return 10.0 ** (-db / 10.0)


def variance_to_db(sigma2: float) -> float:
    if sigma2 < 0:
        raise ValueError("variance must be non-negative")
    return math.inf if sigma2 == 0 else -10.0 * math.log10(sigma2)


@dataclass(frozen=True)
class NoiseModel:
    """Finite-squeezing variance and transmissivity.

    ``epsilon = sigma2_fin_sq + (1 - eta) / (2 eta)`` is the only quantity the
    simulation consumes.
    """

    sigma2_fin_sq: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        if not self.sigma2_fin_sq >= 0:
            raise ValueError("finite-squeezing variance must be non-negative")
        loss_variance(self.eta)  # validates eta

    @property
    def epsilon(self) -> float:
        return self.sigma2_fin_sq + loss_variance(self.eta)

    @property
    def db(self) -> float:
        """Equivalent lossless squeezing level of the combined noise."""
        return variance_to_db(self.epsilon)

    @classmethod
    def from_epsilon(cls, epsilon: float) -> "NoiseModel":
        return cls(float(epsilon), 1.0)


def noise_convert(squeezing_db: float, eta: float = 1.0) -> NoiseModel:
    """Build a :class:`NoiseModel` from a squeezing level in dB and a transmissivity.

    Examples
    --------
    >>> round(noise_convert(10.1).epsilon, 4)
    0.0977
    >>> round(noise_convert(float("inf"), 0.95).epsilon, 4)
    0.0263
    """
    return NoiseModel(db_to_variance(float(squeezing_db)), float(eta))
