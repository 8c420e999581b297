import os
import subprocess
import sys

import numpy as np
import pytest

from macronode import _accel

has_numba = _accel.HAS_NUMBA
jit_enabled = _accel.USE_NUMBA


@pytest.fixture
def fn():
    def func(x):
        return x * 5.0

    return func


@pytest.mark.skipif("not has_numba")
def test_try_jit_bare(fn):
    import numba

    out = _accel.try_jit(fn)
    if jit_enabled:
        assert isinstance(out, numba.core.registry.CPUDispatcher)
    else:
        assert out is fn
    assert out(2.0) == 10.0


@pytest.mark.skipif("not has_numba")
def test_try_jit_with_kwargs(fn):
    out = _accel.try_jit(cache=False)(fn)
    assert out(np.ones(3)).tolist() == [5.0, 5.0, 5.0]


@pytest.mark.skipif("not has_numba")
def test_force_jit_always_compiles(fn):
    import numba

    assert isinstance(_accel.force_jit(fn), numba.core.registry.CPUDispatcher)


def _run_with_flag(code, flag):
    env = dict(os.environ, MACRONODE_DISABLE_NUMBA=flag)
    return subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout


def test_env_flag_selects_fallback():
    code = "from macronode import _accel; print(_accel.USE_NUMBA)"
    assert _run_with_flag(code, "1").strip() == "False"
    assert _run_with_flag(code, "yes").strip() == "False"
    if has_numba:
        assert _run_with_flag(code, "0").strip() == "True"


def test_fallback_trial_matches_accelerated():
    # a full decode through the pure numpy/scipy path gives the same verdicts
    code = (
        "from macronode.montecarlo import count_failures\n"
        "from macronode.gaussian import StatePrepConfig\n"
        "print(count_failures(3, 0.09, StatePrepConfig('iid', 0.1), 1, 0, 60))\n"
    )
    assert _run_with_flag(code, "1") == _run_with_flag(code, "0")
