"""Local coherence functional ``H(k, x)`` and the coherence coefficient fields.

For a germ ``F`` and the mollifier ``phi`` of a stack,

    H(k,x) = sum_l 2^{-lr} avg_{|y-x|<=2^-k} |(F_y - F_x)(phi_y^(k+l))|
           + sum_l avg_{|z-x|<=2^-k} avg_{|y-z|<=2^-k-l} |(F_z - F_y)(phi_y^(k+l))|

truncated at ``l < L``.  Averages use the trapezoid ball rule of
:func:`reconlab.grid.ball_offsets`, thinned to at most ``max_points`` nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveValueError, ScaleBudgetError
from .fields import MultiscaleField, default_stride
from .germ import Germ
from .grid import ball_offsets
from .mollifier import MollifierStack

DECAY_RATIO = 0.95
DECAY_WINDOW = 4
DEFAULT_MAX_POINTS = 33


@dataclass(frozen=True, eq=False)
class CoherenceReport:
    field: MultiscaleField
    truncation_L: int
    tail_estimate: MultiscaleField
    divergence_flag: bool
    first_terms: dict  # k -> array (L, n_points), weighted by 2^{-lr}
    second_terms: dict  # k -> array (L2, n_points)
    ratios: MultiscaleField  # observed per-l decay ratio of the summed terms

    def terms(self, k: int) -> np.ndarray:
        """Per-``l`` summands of ``H(k, .)`` (both sums), shape ``(L, n_points)``."""
        t1, t2 = self.first_terms[k], self.second_terms[k]
        if t1.shape == t2.shape:
            return t1 + t2
        return t1


class _DiagonalCache:
    """Memoized ``F_z(phi_z^(n))`` on demand, index by index."""

    def __init__(self, germ: Germ, stack: MollifierStack):
        self.germ = germ
        self.stack = stack
        self.store = {}

    def __call__(self, n: int, idx: np.ndarray) -> np.ndarray:
        size = self.germ.grid.size
        known = self.store.setdefault(n, np.full(size, np.nan))
        idx = np.asarray(idx) % size
        missing = np.unique(idx[np.isnan(known[idx])])
        if missing.size:
            known[missing] = self.germ.evaluate_diagonal(self.stack.phi_at(n), missing)
        return known[idx]


def _check_budget(grid, ks, top):
    if min(ks) < 0:
        raise ValueError("scales must be nonnegative")
    if max(ks) + top > grid.n_max - 2:
        raise ScaleBudgetError(
            f"k_max + {top} = {max(ks) + top} exceeds n_max - 2 = {grid.n_max - 2}")


def _first_integrand(germ, diag, grid, k, n, base, max_points):
    """``avg_{|h|<=2^-k} |(F_{x+h} - F_x)(phi^(n)_{x+h})|`` at each base index."""
    offs, w = ball_offsets(grid, 2.0**-k, max_points)
    x = np.repeat(base, offs.size)
    y = (x + np.tile(offs, base.size)) % grid.size
    at_y = diag(n, y)
    at_x = germ.evaluate_translates(x, diag.stack.phi_at(n), y)
    return np.abs(at_y - at_x).reshape(base.size, offs.size) @ w


def _second_integrand(germ, diag, grid, k, n, base, max_points):
    """``avg_{|z-x|<=2^-k} avg_{|y-z|<=2^-n} |(F_z - F_y)(phi_y^(n))|``."""
    outer, w_out = ball_offsets(grid, 2.0**-k, max_points)
    inner, w_in = ball_offsets(grid, 2.0**-n, max_points)
    z_all = (base[:, None] + outer[None, :]) % grid.size
    z, inverse = np.unique(z_all, return_inverse=True)
    zz = np.repeat(z, inner.size)
    yy = (zz + np.tile(inner, z.size)) % grid.size
    at_z = germ.evaluate_translates(zz, diag.stack.phi_at(n), yy)
    inner_avg = np.abs(at_z - diag(n, yy)).reshape(z.size, inner.size) @ w_in
    return inner_avg[inverse.reshape(z_all.shape)] @ w_out


def _base_points(grid, k, stride):
    s = default_stride(grid, k) if stride is None else int(stride)
    return s, np.arange(0, grid.size, s)


def coherence_coefficients(germ: Germ, stack: MollifierStack, k_range, l: int,
                           stride: int | None = None,
                           max_points: int = DEFAULT_MAX_POINTS) -> MultiscaleField:
    """Field ``(k, x) -> avg_{|h|<=2^-k} |(F_{x+h} - F_x)(phi^(k+l)_{x+h})|``."""
    grid = germ.grid
    ks = tuple(k_range)
    _check_budget(grid, ks, l)
    diag = _DiagonalCache(germ, stack)
    levels, strides = {}, {}
    for k in ks:
        s, base = _base_points(grid, k, stride)
        levels[k] = _first_integrand(germ, diag, grid, k, k + l, base, max_points)
        strides[k] = s
    return MultiscaleField.from_levels(grid, levels, strides, meta=f"coherence l={l}")


def second_sum_field(germ: Germ, stack: MollifierStack, k_range, l: int,
                     stride: int | None = None,
                     max_points: int = DEFAULT_MAX_POINTS) -> MultiscaleField:
    """Field ``(k, x) -> avg_{|z-x|<=2^-k} avg_{|y-z|<=2^-k-l} |(F_z - F_y)(phi_y^(k+l))|``."""
    grid = germ.grid
    ks = tuple(k_range)
    _check_budget(grid, ks, l)
    diag = _DiagonalCache(germ, stack)
    levels, strides = {}, {}
    for k in ks:
        s, base = _base_points(grid, k, stride)
        levels[k] = _second_integrand(germ, diag, grid, k, k + l, base, max_points)
        strides[k] = s
    return MultiscaleField.from_levels(grid, levels, strides, meta=f"second sum l={l}")


def _decay(terms: np.ndarray, eps: float):
    """Geometric per-step ratio over the last window and the matching tail estimate."""
    L = terms.shape[0]
    if L < 2:
        return np.zeros(terms.shape[1]), np.zeros(terms.shape[1])
    w = min(DECAY_WINDOW, L)
    first, last = terms[L - w], terms[L - 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(last <= eps, 0.0,
                         np.where(first <= eps, np.inf, (last / first) ** (1.0 / (w - 1))))
        tail = np.where(ratio < 1.0, last * ratio / (1.0 - ratio), np.inf)
    return ratio, tail


def h_field(germ: Germ, stack: MollifierStack, r: float, k_range, L: int,
            stride: int | None = None, max_points: int = DEFAULT_MAX_POINTS,
            variant: str = "positive") -> CoherenceReport:
    """Truncated coherence functional with tail extrapolation and divergence flag.

    ``variant="negative"`` replaces the second sum by the finitely many terms
    ``l = -k, ..., 0``.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if L < 1:
        raise ValueError("truncation L must be at least 1")
    if variant not in ("positive", "negative"):
        raise ValueError(f"unknown variant {variant!r}")
    grid = germ.grid
    ks = tuple(k_range)
    _check_budget(grid, ks, L)
    diag = _DiagonalCache(germ, stack)
    H, tails, ratios, firsts, seconds, strides = {}, {}, {}, {}, {}, {}
    flag = False
    for k in ks:
        s, base = _base_points(grid, k, stride)
        strides[k] = s
        t1 = np.array([2.0 ** (-l * r) * _first_integrand(germ, diag, grid, k, k + l, base, max_points)
                       for l in range(L)])
        ls2 = range(L) if variant == "positive" else range(-k, 1)
        t2 = np.array([_second_integrand(germ, diag, grid, k, k + l, base, max_points)
                       for l in ls2])
        firsts[k], seconds[k] = t1, t2
        total = t1 + t2 if variant == "positive" else t1
        H[k] = t1.sum(axis=0) + t2.sum(axis=0)
        eps = 1e-13 * max(1.0, float(np.max(np.abs(total))) if total.size else 1.0)
        ratio, tail = _decay(total, eps)
        ratios[k], tails[k] = ratio, tail
        if L >= DECAY_WINDOW and np.any(ratio > DECAY_RATIO):
            flag = True
    field = MultiscaleField.from_levels(grid, H, strides, meta=f"H r={r} L={L}")
    return CoherenceReport(
        field=field,
        truncation_L=L,
        tail_estimate=MultiscaleField.from_levels(grid, tails, strides, meta="tail"),
        divergence_flag=flag,
        first_terms=firsts,
        second_terms=seconds,
        ratios=MultiscaleField.from_levels(grid, ratios, strides, meta="ratio"),
    )


def fit_alpha_A(data):
    """Fit ``value_l <= 2**(l*alpha) * A`` to ``(l, value)`` pairs.

    ``alpha`` is the least-squares slope of ``log2(value)`` against ``l``,
    clamped at 0; ``A`` is the smallest constant making the bound hold at every
    measured ``l``.  All-zero data returns ``(0.0, 0.0)``.
    """
    data = sorted((int(l), float(v)) for l, v in data)
    if len(data) < 3:
        raise ValueError("need values for at least three l")
    ls = np.array([l for l, _ in data], dtype=float)
    vs = np.array([v for _, v in data])
    if not np.all(np.isfinite(vs)):
        raise NonPositiveValueError("non-finite coherence values")
    if np.all(vs == 0.0):
        return 0.0, 0.0
    if np.any(vs <= 0.0):
        raise NonPositiveValueError(f"values must be all positive or all zero, got {vs.tolist()}")
    logs = np.log2(vs)
    slope = float(np.polyfit(ls, logs, 1)[0])
    alpha = max(0.0, slope)
    A = float(np.max(2.0 ** (logs - alpha * ls)))
    return alpha, A


def per_l_ratio(terms: np.ndarray) -> float:
    """Median over base points of the least-squares per-``l`` decay ratio."""
    L = terms.shape[0]
    ls = np.arange(L, dtype=float)
    with np.errstate(divide="ignore"):
        logs = np.log2(terms)
    ok = np.all(np.isfinite(logs), axis=0)
    if not np.any(ok):
        return math.nan
    slopes = np.polyfit(ls, logs[:, ok], 1)[0]
    return float(2.0 ** np.median(slopes))
