import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from macronode.fitting import epsilon_from_proxy
from macronode.noise import (
    NoiseModel,
    db_to_variance,
    detector_variance,
    loss_variance,
    noise_convert,
    variance_to_db,
)


def test_noise_convert_examples():
    assert math.isclose(noise_convert(10.1).epsilon, 0.0977, abs_tol=5e-5)
    assert math.isclose(noise_convert(float("inf"), 0.95).epsilon, 0.05 / 1.9, rel_tol=1e-12)
    assert math.isclose(noise_convert(13.6).epsilon, 0.0437, abs_tol=5e-5)


def test_db_convention_matches_threshold_proxy():
    # inverting the all-GKP qubit-error proxy 4.73e-3 gives ~0.0983, i.e.
    # 10.1 dB only under dB = -10 log10(variance)
    eps = epsilon_from_proxy(4.73e-3)
    assert math.isclose(eps, 0.0983, abs_tol=2e-4)
    assert math.isclose(variance_to_db(eps), 10.1, abs_tol=0.05)


def test_lossless_infinite_squeezing_is_noiseless():
    assert NoiseModel(0.0, 1.0).epsilon == 0.0
    assert noise_convert(float("inf")).epsilon == 0.0
    assert NoiseModel(0.0, 1.0).db == math.inf


@given(st.floats(-20, 40))
def test_db_roundtrip(db):
    assert math.isclose(variance_to_db(db_to_variance(db)), db, rel_tol=1e-12, abs_tol=1e-12)


@given(st.floats(1e-3, 1.0), st.floats(0.0, 1.0))
def test_epsilon_is_sum(eta, s2):
    m = NoiseModel(s2, eta)
    assert math.isclose(m.epsilon, s2 + (1 - eta) / (2 * eta), rel_tol=1e-14)
    assert NoiseModel.from_epsilon(m.epsilon).epsilon == m.epsilon


def test_detector_variance_units():
    assert detector_variance(0.1) == 0.05
    assert detector_variance(0.1, "absolute") == 0.1
    with pytest.raises(ValueError):
        detector_variance(0.1, "shot")
    with pytest.raises(ValueError):
        detector_variance(-0.1)


@pytest.mark.parametrize("eta", [0.0, -0.1, 1.1])
def test_invalid_transmissivity(eta):
    with pytest.raises(ValueError):
        loss_variance(eta)


def test_invalid_squeezing():
    with pytest.raises(ValueError):
        NoiseModel(-0.1)
    with pytest.raises(ValueError):
        db_to_variance(float("nan"))
    with pytest.raises(ValueError):
        db_to_variance(float("-inf"))
    with pytest.raises(ValueError):
        variance_to_db(-1.0)
