"""Macronode -> canonical lattice reduction and posterior error probabilities.

Wires of a macronode are numbered 0..3 with wire 0 the central mode and
wires 1..3 the satellites (``m_2, m_3, m_4`` in the usual 1-based naming).
Slots are the lattice-facing mode positions; the central permutation maps
wires to slots so that a GKP input sits on wire 0 whenever one exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from ._accel import USE_NUMBA, try_jit
from .gaussian import SQRT_PI, ModeType
from .lattice import MODES_PER_NODE, RHGGraph


class ByproductClass(IntEnum):
    NONE = 0  # wired to the neighbour's central mode
    GKP = 1  # neighbour satellite input was GKP |+>
    P_TYPE = 2  # neighbour satellite input was momentum squeezed


class ByproductRecord(NamedTuple):
    value: float
    cls: ByproductClass


class ReducedNode(NamedTuple):
    effective_outcome: float
    effective_type: str  # "gkp" or "p"
    p_err: float
    binned_bit: int | None = None


@dataclass(frozen=True)
class ThetaParams:
    """Truncation rule for the Gaussian pulse-train sums.

    The argument is first reduced modulo ``2 sqrt(pi)``, so the window only
    depends on the width: ``n`` runs over ``[-n_max, 2 + n_max]`` with
    ``n_max = 4 + ceil(8 sigma / sqrt(pi))``. Terms are normalised by the
    largest one (log-domain), so the ratio never overflows.
    """

    extra: int = 4
    width_sigmas: float = 8.0

    def n_max(self, sigma2: float) -> int:
        return self.extra + int(math.ceil(self.width_sigmas * math.sqrt(sigma2) / SQRT_PI))


_THETA = ThetaParams()
_PERIOD = 2.0 * SQRT_PI


# --------------------------------------------------------------------------
# theta ratio f(x, b, sigma^2)
# --------------------------------------------------------------------------


@try_jit(cache=True)
def _theta_ratio_loop(x, b, s2, out):
    period = 2.0 * np.sqrt(np.pi)
    spacing = np.sqrt(np.pi)
    for i in range(x.shape[0]):
        y = x[i] - period * np.floor(x[i] / period)
        var = s2[i]
        nmax = 4 + int(np.ceil(8.0 * np.sqrt(var) / spacing))
        # nearest lattice point gives the largest exponent
        n0 = np.floor(y / spacing + 0.5)
        top = -((y - n0 * spacing) ** 2) / (2.0 * var)
        num = 0.0
        den = 0.0
        for n in range(-nmax, nmax + 3):
            w = np.exp(-((y - n * spacing) ** 2) / (2.0 * var) - top)
            den += w
            if (n - b[i]) % 2 == 0:
                num += w
        out[i] = num / den
    return out


def _theta_ratio_numpy(x, b, s2, out):
    y = np.mod(x, _PERIOD)
    nmax = 4 + int(np.ceil(8.0 * np.sqrt(s2.max()) / SQRT_PI))
    n = np.arange(-nmax, nmax + 3)
    expo = -((y[:, None] - n[None, :] * SQRT_PI) ** 2) / (2.0 * s2[:, None])
    w = np.exp(expo - expo.max(axis=1, keepdims=True))
    same = (n[None, :] - b[:, None]) % 2 == 0
    out[:] = (w * same).sum(axis=1) / w.sum(axis=1)
    return out


_theta_kernel = _theta_ratio_loop if USE_NUMBA else _theta_ratio_numpy


def theta_ratio(x, b, sigma2):
    """Posterior weight of the parity-``b`` sub-comb at outcome ``x``.

    .. math::

        f(x, b, \\sigma^2) = \\frac{\\sum_n e^{-(x-(2n+b)\\sqrt\\pi)^2/2\\sigma^2}}
                                 {\\sum_n e^{-(x-n\\sqrt\\pi)^2/2\\sigma^2}}

    Parameters
    ----------
    x : float or array_like
        Analog outcome.
    b : {0, 1} or array_like
        Parity of the numerator comb.
    sigma2 : float or array_like
        Gaussian variance, strictly positive.

    Returns
    -------
    float or ndarray
        Value in ``[0, 1]``, broadcast over the inputs.
    """
    x, b, s2 = np.broadcast_arrays(
        np.asarray(x, dtype=np.float64), np.asarray(b, dtype=np.int64), np.asarray(sigma2, dtype=np.float64)
    )
    if s2.size and not np.all(s2 > 0):
        raise ValueError("theta_ratio needs sigma2 > 0")
    if np.any((b != 0) & (b != 1)):
        raise ValueError("b must be 0 or 1")
    shape = x.shape
    xf = np.ascontiguousarray(x.ravel())
    out = np.empty_like(xf)
    if xf.size:
        _theta_kernel(xf, np.ascontiguousarray(b.ravel()), np.ascontiguousarray(s2.ravel()), out)
    return float(out[0]) if shape == () else out.reshape(shape)


# --------------------------------------------------------------------------
# dictionary
# --------------------------------------------------------------------------


def select_central(types) -> np.ndarray:
    """Wire order for one macronode (or a batch): ``order[w]`` is the slot on wire ``w``.

    The first GKP slot becomes wire 0; the remaining slots keep their
    relative order. With no GKP input the identity order is returned and the
    macronode is all-p (see :func:`is_all_p`).

    Examples
    --------
    >>> P, G = ModeType.P_SQUEEZED, ModeType.GKP_PLUS
    >>> select_central([P, P, G, P]).tolist()
    [2, 0, 1, 3]
    """
    t = np.asarray(types)
    single = t.ndim == 1
    is_gkp = np.atleast_2d(t == ModeType.GKP_PLUS)
    central = np.argmax(is_gkp, axis=1)  # 0 when no GKP
    slots = np.arange(MODES_PER_NODE)
    rest = np.sort(np.where(slots[None, :] == central[:, None], -1, slots[None, :]), axis=1)[:, 1:]
    order = np.concatenate([central[:, None], rest], axis=1)
    return order[0] if single else order


def is_all_p(types) -> np.ndarray | bool:
    """True when no mode of the macronode holds a GKP state."""
    t = np.asarray(types)
    return ~np.any(t == ModeType.GKP_PLUS, axis=-1)


def reduce_q(m1q, m2, m3, m4):
    """Effective canonical q outcome ``(m_1q - (m_2 + m_3 - m_4)) / 2``."""
    return (np.asarray(m1q) - (np.asarray(m2) + np.asarray(m3) - np.asarray(m4))) / 2.0


def _byproduct_values(m2, m3, m4):
    """Stack of byproducts indexed by the neighbour wire: central, 2, 3, 4."""
    m2, m3, m4 = np.broadcast_arrays(np.asarray(m2, float), np.asarray(m3, float), np.asarray(m4, float))
    return np.stack([np.zeros_like(m2), m2 - m4, m3 - m4, m2 + m3], axis=-1)


def byproduct(slot: int, neighbor_wire: int, m2: float, m3: float, m4: float, neighbor_type) -> ByproductRecord:
    """Byproduct contributed by the neighbour wired to ``slot``.

    Parameters
    ----------
    slot : int
        Slot of macronode 0 (0..3); only validated, the value depends on
        the neighbour side alone.
    neighbor_wire : int
        Wire (0 = central) of the neighbour's mode connected to ``slot``.
    m2, m3, m4 : float
        The neighbour's satellite q outcomes on wires 1, 2, 3.
    neighbor_type : ModeType
        Input type of the neighbour's connected mode.
    """
    if not 0 <= slot < MODES_PER_NODE:
        raise ValueError(f"slot {slot} out of range")
    if not 0 <= neighbor_wire < MODES_PER_NODE:
        raise ValueError(f"wire {neighbor_wire} out of range")
    if neighbor_wire == 0:
        return ByproductRecord(0.0, ByproductClass.NONE)
    value = float(_byproduct_values(m2, m3, m4)[neighbor_wire])
    cls = ByproductClass.GKP if neighbor_type == ModeType.GKP_PLUS else ByproductClass.P_TYPE
    return ByproductRecord(value, cls)


def _reduce_p_batch(m1p, values, classes, epsilon):
    """Vectorised core of :func:`reduce_p` over ``(N,)`` nodes and ``(N, 4)`` byproducts."""
    gkp = classes == ByproductClass.GKP
    ptype = classes == ByproductClass.P_TYPE
    t = ptype.sum(axis=1)
    remainder = 2.0 * m1p - np.where(ptype, values, 0.0).sum(axis=1)
    r_sat = np.where(gkp, np.rint(values / SQRT_PI), 0.0)
    effective = remainder - SQRT_PI * r_sat.sum(axis=1)
    if epsilon == 0:
        return effective, np.zeros_like(effective)
    r = np.mod(np.rint(remainder / SQRT_PI), 2).astype(np.int64)
    p_err = theta_ratio(remainder, 1 - r, (4.0 + 2.0 * t) * epsilon)
    if gkp.any():
        rows, cols = np.nonzero(gkp)
        vals = values[rows, cols]
        rbar = 1 - np.mod(r_sat[rows, cols], 2).astype(np.int64)
        np.add.at(p_err, rows, theta_ratio(vals, rbar, 2.0 * epsilon))
    return effective, np.minimum(p_err, 1.0)


def reduce_p(m1p: float, byproducts, epsilon: float) -> tuple[float, float]:
    """Effective canonical p outcome and its posterior error probability.

    GKP-class byproducts are binned individually (variance ``2 eps``); the
    remainder ``2 m_1p - sum(p-class)`` is binned with variance
    ``(4 + 2t) eps`` for ``t`` p-class byproducts. The returned outcome has
    the binned GKP byproducts subtracted, so its own binning reproduces the
    combined parity. ``p_err`` is the union bound, clamped to 1; it is 0 at
    ``eps = 0``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    recs = [ByproductRecord(float(v), ByproductClass(c)) for v, c in byproducts]
    if len(recs) != MODES_PER_NODE:
        raise ValueError("expected four byproduct records")
    for rec in recs:
        if rec.cls == ByproductClass.NONE and rec.value != 0.0:
            raise ValueError("class-none byproduct must have value 0")
    values = np.array([[r.value for r in recs]])
    classes = np.array([[int(r.cls) for r in recs]])
    eff, p_err = _reduce_p_batch(np.array([float(m1p)]), values, classes, epsilon)
    return float(eff[0]), float(p_err[0])


@dataclass
class ReducedLattice:
    """Per-macronode data of the canonical lattice after reduction.

    Attributes
    ----------
    effective_outcome : ndarray, shape (N,)
    is_p : ndarray of bool, shape (N,)
        Effective type ``p`` (all four inputs momentum squeezed).
    p_err : ndarray, shape (N,)
    wire_order : ndarray, shape (N, 4)
        Slot on each wire after the central permutation.
    byproduct_values, byproduct_classes : ndarray, shape (N, 4)
        Per slot of the node.
    """

    effective_outcome: np.ndarray
    is_p: np.ndarray
    p_err: np.ndarray
    wire_order: np.ndarray
    byproduct_values: np.ndarray
    byproduct_classes: np.ndarray

    def node(self, k: int) -> ReducedNode:
        return ReducedNode(
            float(self.effective_outcome[k]), "p" if self.is_p[k] else "gkp", float(self.p_err[k])
        )


def measurement_basis(wire_order: np.ndarray) -> np.ndarray:
    """Threshold-simulation pattern: True (p) on every central slot, False (q) elsewhere."""
    wire_order = np.asarray(wire_order)
    basis = np.zeros(wire_order.shape, dtype=bool)
    basis[np.arange(len(wire_order)), wire_order[:, 0]] = True
    return basis.ravel()


def reduce_lattice(graph: RHGGraph, types, outcomes, basis, epsilon: float) -> ReducedLattice:
    """Reduce all macronode outcomes to canonical effective p outcomes.

    Parameters
    ----------
    graph : RHGGraph
    types : array_like, shape (4N,)
        ModeType per mode (mode ``4k + s``).
    outcomes : array_like, shape (4N,)
        Homodyne outcomes per mode after the beamsplitter network.
    basis : array_like of bool, shape (4N,)
        True where the mode was measured in p. Must equal
        :func:`measurement_basis` of the central permutation.
    epsilon : float
        Per-detector noise variance.
    """
    N = graph.n_nodes
    types = np.asarray(types).reshape(N, MODES_PER_NODE)
    out = np.asarray(outcomes, dtype=float).reshape(N, MODES_PER_NODE)
    order = select_central(types)
    if not np.array_equal(np.asarray(basis, dtype=bool), measurement_basis(order)):
        raise ValueError("measurement pattern must be p on central modes and q on satellites")
    wire_of_slot = np.argsort(order, axis=1)
    by_wire = np.take_along_axis(out, order, axis=1)
    combos = _byproduct_values(by_wire[:, 1], by_wire[:, 2], by_wire[:, 3])

    nbr, rs = graph.neighbors, graph.reciprocal
    j = wire_of_slot[nbr, rs]
    values = combos[nbr, j]
    nbr_gkp = types[nbr, rs] == ModeType.GKP_PLUS
    classes = np.where(
        j == 0, ByproductClass.NONE, np.where(nbr_gkp, ByproductClass.GKP, ByproductClass.P_TYPE)
    ).astype(np.int64)
    effective, p_err = _reduce_p_batch(by_wire[:, 0], values, classes, epsilon)
    return ReducedLattice(effective, is_all_p(types), p_err, order, values, classes)
