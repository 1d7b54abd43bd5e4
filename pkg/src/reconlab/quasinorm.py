"""Besov and Triebel–Lizorkin type quasinorms acting on multiscale fields.

Discrete conventions: ``L^p_x`` sums over the base points of a level with
weight ``stride * h`` (the torus has measure one), ``l^q_k`` runs over the
field's scales, and ``p`` or ``q`` equal to ``inf`` means a maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import MultiscaleField
from .grid import ball_filter, ball_offsets

BESOV_HIGH = "besov_high"
BESOV_LOW = "besov_low"
TRIEBEL_LIZORKIN = "triebel_lizorkin"
KINDS = (BESOV_HIGH, BESOV_LOW, TRIEBEL_LIZORKIN)

C_SCALING = 32.0


@dataclass(frozen=True)
class QuasinormSpec:
    """``gamma_or_nu`` is ``gamma`` for the Besov (p >= 1) and TL kinds, ``nu`` otherwise."""

    kind: str
    p: float
    q: float
    gamma_or_nu: float

    def __post_init__(self):
        p, q, g = float(self.p), float(self.q), float(self.gamma_or_nu)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "gamma_or_nu", g)
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not (p > 0 and q > 0):
            raise ValueError("p and q must be positive")
        if self.kind == BESOV_HIGH and not (p >= 1 and g > 0):
            raise ValueError(f"{BESOV_HIGH} needs p >= 1 and gamma > 0 (p={p}, gamma={g})")
        if self.kind == BESOV_LOW and not (p < 1 and g > (1.0 / p - 1.0)):
            raise ValueError(f"{BESOV_LOW} needs p < 1 and nu > 1/p - 1 (p={p}, nu={g})")
        if self.kind == TRIEBEL_LIZORKIN and not (1 < p < math.inf and q > 1 and g > 0):
            raise ValueError(f"{TRIEBEL_LIZORKIN} needs 1 < p < inf, q > 1, gamma > 0")

    @property
    def gamma_effective(self) -> float:
        """Exponent in the scaling condition this quasinorm satisfies."""
        if self.kind == BESOV_LOW:
            return self.gamma_or_nu - (1.0 / self.p - 1.0)
        return self.gamma_or_nu

    @property
    def subadditivity_constant(self) -> float:
        return max(1.0, 2.0 ** (1.0 / self.q - 1.0)) * max(1.0, 2.0 ** (1.0 / self.p - 1.0))


def lp_norm(values, weight: float, p: float) -> float:
    v = np.abs(np.asarray(values, dtype=float))
    if v.size == 0:
        return 0.0
    if math.isinf(p):
        return float(np.max(v))
    return (weight * math.fsum(v**p)) ** (1.0 / p)


def lq_norm(values, q: float) -> float:
    return lp_norm(values, 1.0, q)


def _level_spacing(H: MultiscaleField, k: int) -> float:
    return H.stride(k) * H.grid.spacing


def _ball_mean(H, k, values, radius):
    offs, w = ball_offsets(H.grid, radius, spacing=_level_spacing(H, k))
    return ball_filter(values, 0, offs, w)


def _ball_max(H, k, values, radius):
    offs, _ = ball_offsets(H.grid, radius, spacing=_level_spacing(H, k))
    out = np.full(values.size, -np.inf)
    for o in np.unique(offs):
        out = np.maximum(out, np.roll(values, -int(o)))
    return out


def _interpolate(values: np.ndarray, factor: int) -> np.ndarray:
    """Periodic linear interpolation onto a lattice ``factor`` times finer."""
    if factor == 1:
        return values
    m = values.size
    fine = np.arange(m * factor) / factor
    return np.interp(fine, np.arange(m + 1), np.append(values, values[0]))


def apply(spec: QuasinormSpec, H: MultiscaleField) -> float:
    if not H.is_finite():
        raise ValueError("quasinorms are evaluated on finite fields only")
    g = spec.gamma_or_nu
    if spec.kind == BESOV_HIGH:
        per_k = [2.0 ** (g * k) * lp_norm(H.level(k), _level_spacing(H, k), spec.p) for k in H.ks]
        return lq_norm(per_k, spec.q)
    if spec.kind == BESOV_LOW:
        per_k = [2.0 ** (g * k) * lp_norm(_ball_mean(H, k, np.abs(H.level(k)), 2.0**-k),
                                          _level_spacing(H, k), spec.p)
                 for k in H.ks]
        return lq_norm(per_k, spec.q)
    # Triebel-Lizorkin: q-average over the ball, l^q over k, then L^p over x
    finest = min(H.strides)
    rows = []
    for k in H.ks:
        a = np.abs(H.level(k))
        if math.isinf(spec.q):
            m = _ball_max(H, k, a, 2.0**-k)
        else:
            m = np.maximum(_ball_mean(H, k, a**spec.q, 2.0**-k), 0.0) ** (1.0 / spec.q)
        rows.append(2.0 ** (g * k) * _interpolate(m, H.stride(k) // finest))
    rows = np.array(rows)
    if math.isinf(spec.q):
        inner = rows.max(axis=0)
    else:
        inner = (rows**spec.q).sum(axis=0) ** (1.0 / spec.q)
    return lp_norm(inner, finest * H.grid.spacing, spec.p)


@dataclass(frozen=True)
class ScalingCheckResult:
    l: int
    ratio: float
    gamma_effective: float
    lhs: float
    rhs: float


def shifted_average(H: MultiscaleField, l: int) -> MultiscaleField:
    """Field ``(k, x) -> avg_{|z-x|<=2^-k} H(k+l, z)`` on the scales ``k`` with ``k+l`` present."""
    grid = H.grid
    levels, strides = {}, {}
    for k in H.ks:
        if k + l not in H.ks:
            continue
        fine = k + l
        avg = _ball_mean(H, fine, H.level(fine), 2.0**-k)
        s_fine, s_k = H.stride(fine), H.stride(k)
        if s_k % s_fine == 0:
            levels[k] = avg[:: s_k // s_fine]
            strides[k] = s_k
        else:
            levels[k] = avg
            strides[k] = s_fine
    if not levels:
        raise ValueError(f"no scale k with k+{l} in {H.ks}")
    return MultiscaleField.from_levels(grid, levels, strides, meta=f"shifted l={l}")


def scaling_check(spec: QuasinormSpec, H: MultiscaleField, l: int,
                  gamma_effective: float | None = None) -> ScalingCheckResult:
    """Ratio ``N[avg H(k+l, .)] / (2^{-l gamma'} N[H])``.

    The averaged field lives on the scales ``k`` with ``k + l`` in ``H``; the
    reference ``N[H]`` uses every scale of ``H``.  ``gamma_effective`` overrides
    the exponent implied by ``spec``.
    """
    if l < 0:
        raise ValueError("l must be nonnegative")
    gam = spec.gamma_effective if gamma_effective is None else float(gamma_effective)
    lhs = apply(spec, shifted_average(H, l))
    rhs = 2.0 ** (-l * gam) * apply(spec, H)
    if rhs == 0.0:
        ratio = 0.0 if lhs == 0.0 else math.inf
    else:
        ratio = lhs / rhs
    return ScalingCheckResult(l, ratio, gam, lhs, rhs)


def spike_field(grid, k0: int, l: int, stride: int | None = None) -> MultiscaleField:
    """``2**l`` unit spikes at level ``k0 + l``, spaced ``2**(1-k0-l)`` inside one ball of radius ``2**-k0``.

    All other levels ``k0 .. k0+l-1`` vanish.  Used to show that the low-``p``
    Besov quasinorm needs the corrected exponent ``nu - (1/p - 1)``.
    """
    if stride is None:
        stride = max(1, grid.size >> (k0 + l + 4))
    m = grid.size // stride
    gap = (2 * grid.size >> (k0 + l)) // stride
    if gap < 1:
        raise ValueError("grid too coarse for the spike field")
    levels = {}
    for k in range(k0, k0 + l + 1):
        levels[k] = np.zeros(m)
    n_spikes = 1 << l
    start = -(n_spikes // 2) * gap
    idx = (start + gap * np.arange(n_spikes)) % m
    levels[k0 + l][idx] = 1.0
    return MultiscaleField.from_levels(grid, levels, {k: stride for k in levels}, meta="spikes")
