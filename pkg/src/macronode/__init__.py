"""Fault-tolerance simulation of a macronode RHG cluster state built from GKP
and momentum-squeezed sources.

Modules
-------
lattice      periodic RHG macronode lattice, stabilizers and correlation surfaces
gaussian     symplectic toolkit, macronode beamsplitter network and input sampling
noise        finite squeezing and loss folded into one Gaussian variance
reduction    macronode-to-canonical outcome dictionary and theta-function error estimates
decoder      GKP binning, weights, Dijkstra matching graph, exact MWPM and failure check
montecarlo   seeded trials, checkpointed sweeps and Wilson intervals
fitting      threshold crossing fits and below-threshold scaling law
cli          command-line front end

Hot kernels use numba when available; set ``MACRONODE_DISABLE_NUMBA=1`` to
force the pure numpy/scipy fallbacks.
"""

from ._accel import HAS_NUMBA, USE_NUMBA
from .decoder import DecodingGraph, decode, gkp_bin, mwpm
from .fitting import TABLE_I, ScalingParams, eval_scaling, fit_scaling, fit_threshold, qubit_error_proxy
from .gaussian import SQRT_PI, ModeType, StatePrepConfig, verify_identities
from .lattice import LatticeSpec, RHGGraph, build_lattice
from .montecarlo import SweepRow, TrialConfig, estimate_rate, run_trial, sweep, wilson_interval
from .noise import NoiseModel, noise_convert
from .reduction import reduce_lattice, reduce_p, reduce_q, select_central, theta_ratio

__version__ = "0.1.0"

__all__ = [
    "HAS_NUMBA",
    "USE_NUMBA",
    "SQRT_PI",
    "TABLE_I",
    "DecodingGraph",
    "LatticeSpec",
    "ModeType",
    "NoiseModel",
    "RHGGraph",
    "ScalingParams",
    "StatePrepConfig",
    "SweepRow",
    "TrialConfig",
    "build_lattice",
    "decode",
    "estimate_rate",
    "eval_scaling",
    "fit_scaling",
    "fit_threshold",
    "gkp_bin",
    "mwpm",
    "noise_convert",
    "qubit_error_proxy",
    "reduce_lattice",
    "reduce_p",
    "reduce_q",
    "run_trial",
    "select_central",
    "sweep",
    "theta_ratio",
    "verify_identities",
    "wilson_interval",
]
