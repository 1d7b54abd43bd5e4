"""Reconstruction engine: ``f_n``, the telescoping pieces and the error field.

``f_n(z) = F_z(rho_z^(n))``.  Writing ``f_{x,n}(z) = (F_z - F_x)(rho_z^(n))``,
the increments split as ``f_{x,n+1} - f_{x,n} = g'_{x,n} + g''_n`` with

    g'_{x,n}(z) = ∫ (F_y - F_x)(phi_y^(n+1)) psi^(n)(y - z) dy
    g''_n(z)    = ∫ (F_z - F_y)(phi_y^(n+1)) psi^(n)(y - z) dy
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coherence import coherence_coefficients, fit_alpha_A, second_sum_field
from .errors import HypothesisViolatedError, ScaleTooFineError
from .fields import MultiscaleField, default_stride
from .germ import Germ, _correlate
from .grid import SampledFunction, TestClassDictionary, ball_offsets, dilate_translate, test_dictionary
from .mollifier import MollifierStack
from .quasinorm import QuasinormSpec, apply

C_THM = 256.0
C_REC = 128.0
C_GPRIME = 64.0

POSITIVE = "positive"
NEGATIVE = "negative"


def _check_level(grid, n, margin=4, what="n"):
    if n < 0:
        raise ValueError(f"{what} must be nonnegative")
    if n > grid.n_max - margin:
        raise ScaleTooFineError(f"{what}={n} exceeds n_max - {margin} = {grid.n_max - margin}")


def _indices(grid, idx):
    if idx is None:
        return np.arange(grid.size)
    return np.atleast_1d(np.asarray(idx, dtype=np.int64)) % grid.size


def f_n_values(germ: Germ, stack: MollifierStack, n: int, idx=None) -> np.ndarray:
    """``F_z(rho_z^(n))`` at the grid indices ``idx`` (default: all)."""
    _check_level(germ.grid, n)
    return germ.evaluate_diagonal(stack.rho_at(n), _indices(germ.grid, idx))


def f_n_field(germ: Germ, stack: MollifierStack, n: int) -> SampledFunction:
    return SampledFunction(germ.grid, f_n_values(germ, stack, n))


def f_x_n(germ: Germ, stack: MollifierStack, x_idx: int, n: int, idx=None) -> np.ndarray:
    """``(F_z - F_x)(rho_z^(n))`` at ``idx``."""
    idx = _indices(germ.grid, idx)
    rho = stack.rho_at(n)
    own = germ.evaluate_diagonal(rho, idx)
    return own - germ.evaluate_translates(np.full(idx.size, x_idx), rho, idx)


def telescope_pieces(germ: Germ, stack: MollifierStack, x_base: float, n: int, idx=None):
    """``(g'_{x,n}, g''_n)`` sampled at ``idx`` (default: every grid point).

    Both are computed by direct summation over ``y`` in the support of
    ``psi^(n)( . - z)``.
    """
    grid = germ.grid
    _check_level(grid, n)
    idx = _indices(grid, idx)
    x_idx = grid.index_of(x_base)
    phi = stack.phi_at(n + 1)
    offs, psi_vals = stack.psi_at(n).stencil()
    h = grid.spacing
    ys = np.unique((idx[:, None] + offs[None, :]) % grid.size)
    own = germ.evaluate_diagonal(phi, ys)
    at_x = germ.evaluate_translates(np.full(ys.size, x_idx), phi, ys)
    u = np.zeros(grid.size)
    u[ys] = own - at_x
    diag = np.zeros(grid.size)
    diag[ys] = own
    g1 = np.empty(idx.size)
    g2 = np.empty(idx.size)
    for j, z in enumerate(idx):
        y = (z + offs) % grid.size
        g1[j] = h * math.fsum(u[y] * psi_vals)
        at_z = germ.evaluate_translates(np.full(y.size, z), phi, y)
        g2[j] = h * math.fsum((at_z - diag[y]) * psi_vals)
    return g1, g2


def telescope_residual(germ: Germ, stack: MollifierStack, x_base: float, n: int, idx=None) -> float:
    """``sup |f_{x,n+1} - f_{x,n} - g'_{x,n} - g''_n|`` relative to the largest of the three terms."""
    grid = germ.grid
    idx = _indices(grid, idx)
    x_idx = grid.index_of(x_base)
    lhs = f_x_n(germ, stack, x_idx, n + 1, idx) - f_x_n(germ, stack, x_idx, n, idx)
    g1, g2 = telescope_pieces(germ, stack, x_base, n, idx)
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(g1)), np.max(np.abs(g2)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(lhs - g1 - g2)) / scale)


def g_dprime_field(germ: Germ, stack: MollifierStack, m: int) -> np.ndarray:
    """``g''_m`` on the whole grid through ``f_{m+1} - f_m - (F_.(phi_.^(m+1)) ⋆ psi^(m))``."""
    grid = germ.grid
    own = germ.evaluate_diagonal(stack.phi_at(m + 1))
    spread = _correlate(grid, own, stack.psi_at(m))
    return f_n_values(germ, stack, m + 1) - f_n_values(germ, stack, m) - spread


@dataclass(frozen=True, eq=False)
class Reconstruction:
    f: SampledFunction
    n_stop: int
    mode: str = POSITIVE
    pieces: dict | None = field(default=None, repr=False)
    last_increment: float = math.nan


def reconstruct(germ: Germ, stack: MollifierStack, n_stop: int | None = None,
                mode: str = POSITIVE, diagnostics: bool = False) -> Reconstruction:
    """Finest approximant ``f_{n_stop}`` (positive mode) or ``f_{n_stop} - sum g''_m``.

    ``last_increment`` records ``sup |f_{n_stop} - f_{n_stop-1}|`` (positive
    mode) as the truncation error proxy.
    """
    grid = germ.grid
    n_stop = grid.n_max - 4 if n_stop is None else int(n_stop)
    _check_level(grid, n_stop, what="n_stop")
    if mode not in (POSITIVE, NEGATIVE):
        raise ValueError(f"mode must be {POSITIVE!r} or {NEGATIVE!r}")
    f = f_n_values(germ, stack, n_stop)
    pieces = {} if diagnostics else None
    last = math.nan
    if mode == POSITIVE:
        if n_stop >= 1:
            last = float(np.max(np.abs(f - f_n_values(germ, stack, n_stop - 1))))
    else:
        for m in range(1, n_stop):
            gm = g_dprime_field(germ, stack, m)
            f = f - gm
            if diagnostics:
                pieces[m] = gm
    return Reconstruction(SampledFunction(grid, f), n_stop, mode, pieces, last)


@dataclass(frozen=True, eq=False)
class ErrorField:
    delta: MultiscaleField
    argmax: dict  # k -> index of the dictionary member attaining the max


def error_field(rec: Reconstruction, germ: Germ, dictionary: TestClassDictionary, k_range,
                stride: int | None = None) -> ErrorField:
    """``Delta(k,x) = max_xi |∫ f xi_x^(k) - F_x(xi_x^(k))|`` over the dictionary."""
    grid = germ.grid
    if len(dictionary) == 0:
        raise ValueError("dictionary is empty")
    ks = tuple(k_range)
    if max(ks) > rec.n_stop - 2:
        raise ScaleTooFineError(f"k_max={max(ks)} exceeds n_stop - 2 = {rec.n_stop - 2}")
    levels, strides, argmax = {}, {}, {}
    for k in ks:
        s = default_stride(grid, k) if stride is None else int(stride)
        base = np.arange(0, grid.size, s)
        vals = []
        for xi in dictionary:
            xik = dilate_translate(xi, k)
            paired = _correlate(grid, rec.f.values, xik)[base]
            vals.append(np.abs(paired - germ.evaluate_diagonal(xik, base)))
        vals = np.array(vals)
        levels[k] = vals.max(axis=0)
        argmax[k] = vals.argmax(axis=0)
        strides[k] = s
    return ErrorField(MultiscaleField.from_levels(grid, levels, strides, meta="Delta"), argmax)


def local_integrability(germ: Germ, stack: MollifierStack, k_range,
                        stride: int | None = None, max_points: int = 33) -> MultiscaleField:
    """``(k, x) -> avg_{|z-x|<=2^-k-1} |f_{x,k}(z)|``."""
    grid = germ.grid
    levels, strides = {}, {}
    for k in k_range:
        _check_level(grid, k)
        s = default_stride(grid, k) if stride is None else int(stride)
        base = np.arange(0, grid.size, s)
        offs, w = ball_offsets(grid, 2.0 ** (-k - 1), max_points)
        rho = stack.rho_at(k)
        x = np.repeat(base, offs.size)
        z = (x + np.tile(offs, base.size)) % grid.size
        vals = germ.evaluate_diagonal(rho, z) - germ.evaluate_translates(x, rho, z)
        levels[k] = np.abs(vals).reshape(base.size, offs.size) @ w
        strides[k] = s
    return MultiscaleField.from_levels(grid, levels, strides, meta="local L1 of f_{x,k}")


@dataclass(frozen=True, eq=False)
class TheoremReport:
    alpha: float
    A: float
    coefficient_norms: dict  # l -> N[coherence coefficients at l]
    delta_norm: float
    ratio: float
    passed: bool
    chain: list
    reconstruction: Reconstruction
    delta: ErrorField
    C_thm: float = C_THM
    floor: float = 0.0


def verify_theorem_2_1(germ: Germ, stack: MollifierStack, spec: QuasinormSpec, r: float,
                       k_range, l_range, n_stop: int | None = None,
                       dictionary: TestClassDictionary | None = None,
                       stride: int | None = None) -> TheoremReport:
    """End-to-end check ``N[Delta] <= C_thm * A`` with ``(alpha, A)`` fitted from the coherence data."""
    grid = germ.grid
    ks = tuple(k_range)
    ls = tuple(l_range)
    coef = {l: coherence_coefficients(germ, stack, ks, l, stride) for l in ls}
    norms = {l: apply(spec, coef[l]) for l in ls}
    alpha, A = fit_alpha_A(list(norms.items()))
    if not r > alpha:
        raise HypothesisViolatedError(f"fitted alpha={alpha:.3f} is not below r={r}")
    rec = reconstruct(germ, stack, n_stop)
    dictionary = test_dictionary(grid, r) if dictionary is None else dictionary
    delta = error_field(rec, germ, dictionary, ks, stride)
    value = apply(spec, delta.delta)
    gamma = spec.gamma_effective
    base_norm = norms.get(0, norms[ls[0]])
    chain = []
    for l in ls:
        second = apply(spec, second_sum_field(germ, stack, ks, l, stride))
        chain.append({
            "l": l,
            "coefficient_norm": norms[l],
            "coherence_bound": 2.0 ** (l * alpha) * A,
            "first_sum_term": 2.0 ** (-l * r) * norms[l],
            "second_sum_term": second,
            "scaling_bound": 2.0 ** (-l * gamma) * base_norm,
        })
    if A > 0:
        ratio = value / A
        passed = ratio <= C_THM
        floor = 0.0
    else:
        ratio = math.nan
        passed = True
        floor = value
    return TheoremReport(alpha, A, norms, value, ratio, passed, chain, rec, delta, C_THM, floor)
