"""Germs ``x -> F_x`` and a zoo of fixtures with known reconstructions.

A germ is queried in two ways:

* ``evaluate(x, test)`` pairs the distribution ``F_x`` (``x`` a grid point)
  with an arbitrary sampled test function;
* ``evaluate_translates(base_idx, kernel, center_idx)`` evaluates
  ``F_{base_i}`` against the centred ``kernel`` translated to ``center_i`` for
  many pairs at once.  This is the access pattern of the coherence and
  reconstruction engines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DisagreementError
from .grid import DyadicGrid, SampledFunction, signed_index

# pairs x stencil points evaluated per chunk in the density route
_CHUNK = 1 << 21


def _as_index_array(idx, n):
    return np.atleast_1d(np.asarray(idx, dtype=np.int64)) % n


def _correlate(grid: DyadicGrid, b: np.ndarray, kernel: SampledFunction) -> np.ndarray:
    """``c -> h * sum_o b[c + o] * kernel(o)`` for every grid index ``c``."""
    spec = np.fft.fft(b) * np.conj(np.fft.fft(kernel.values))
    return grid.spacing * np.real(np.fft.ifft(spec))


def _fd4(offsets: np.ndarray, values: np.ndarray, h: float):
    """Fourth-order centred derivative of a compact stencil, padded by two points."""
    lo, hi = int(offsets[0]) - 2, int(offsets[-1]) + 2
    full = np.zeros(hi - lo + 5)
    full[offsets - lo + 2] = values
    d = (-full[4:] + 8.0 * full[3:-1] - 8.0 * full[1:-3] + full[:-4]) / (12.0 * h)
    return np.arange(lo, hi + 1), d


class Germ:
    """Family of distributions indexed by the grid points of ``grid``."""

    kind = "abstract"

    def __init__(self, grid: DyadicGrid, regularity_hint=None):
        self.grid = grid
        self.regularity_hint = regularity_hint

    def evaluate(self, x: float, test: SampledFunction) -> float:
        raise NotImplementedError

    def evaluate_translates(self, base_idx, kernel: SampledFunction, center_idx) -> np.ndarray:
        """``F_{x_i}(kernel( . - y_i))`` with ``x_i = base_idx[i] * h``, ``y_i = center_idx[i] * h``."""
        n = self.grid.size
        base_idx = _as_index_array(base_idx, n)
        center_idx = _as_index_array(center_idx, n)
        out = np.empty(base_idx.size)
        for j, (b, c) in enumerate(zip(base_idx, center_idx)):
            test = SampledFunction(self.grid, np.roll(kernel.values, int(c)))
            out[j] = self.evaluate(b * self.grid.spacing, test)
        return out

    def evaluate_diagonal(self, kernel: SampledFunction, idx=None) -> np.ndarray:
        """``z -> F_z(kernel_z)`` on ``idx`` (default: every grid point)."""
        if idx is None:
            idx = np.arange(self.grid.size)
        return self.evaluate_translates(idx, kernel, idx)

    def _check_test(self, test):
        if test.grid != self.grid:
            raise ValueError(f"test lives on {test.grid}, germ on {self.grid}")

    def __repr__(self):
        return f"{type(self).__name__}(kind={self.kind!r}, n_max={self.grid.n_max})"


class SeparableGerm(Germ):
    """``F_x(xi) = sum_t a_t(x) * ∫ b_t xi`` with ``a_t``, ``b_t`` sampled on the grid."""

    kind = "separable"

    def __init__(self, grid, terms, regularity_hint=None, kind=None):
        super().__init__(grid, regularity_hint)
        cleaned = []
        for a, b in terms:
            a = np.broadcast_to(np.asarray(a, dtype=float), (grid.size,)).copy()
            b = np.asarray(b, dtype=float).copy()
            if b.shape != (grid.size,):
                raise ValueError("density factor must be sampled on the grid")
            a.setflags(write=False)
            b.setflags(write=False)
            cleaned.append((a, b))
        self.terms = tuple(cleaned)
        if kind is not None:
            self.kind = kind

    def evaluate(self, x, test):
        self._check_test(test)
        i = self.grid.index_of(x)
        h = self.grid.spacing
        return float(sum(a[i] * h * math.fsum(b * test.values) for a, b in self.terms))

    def evaluate_translates(self, base_idx, kernel, center_idx):
        n = self.grid.size
        base_idx = _as_index_array(base_idx, n)
        center_idx = _as_index_array(center_idx, n)
        out = np.zeros(base_idx.size)
        for a, b in self.terms:
            out += a[base_idx] * _correlate(self.grid, b, kernel)[center_idx]
        return out


class DensityGerm(Germ):
    """``F_x(xi) = ∫ D(x, y) xi(y) dy`` with ``y`` taken as ``x + lift(y - x)``.

    ``density(x, y)`` must broadcast over numpy arrays.
    """

    kind = "density"

    def __init__(self, grid, density: Callable, regularity_hint=None, kind=None):
        super().__init__(grid, regularity_hint)
        self.density = density
        if kind is not None:
            self.kind = kind

    def evaluate(self, x, test):
        self._check_test(test)
        x = self.grid.index_of(x) * self.grid.spacing
        y = x + self.grid.lift(self.grid.points - x)
        vals = self.density(np.full_like(y, x), y) * test.values
        return self.grid.spacing * math.fsum(vals)

    def evaluate_translates(self, base_idx, kernel, center_idx):
        offs, vals = kernel.stencil()
        return self._density_pairs(self.density, base_idx, offs, vals, center_idx)

    def _density_pairs(self, density, base_idx, offs, vals, center_idx):
        grid = self.grid
        n, h = grid.size, grid.spacing
        base_idx = _as_index_array(base_idx, n)
        center_idx = _as_index_array(center_idx, n)
        out = np.empty(base_idx.size)
        rows = max(1, _CHUNK // max(1, offs.size))
        for s in range(0, base_idx.size, rows):
            b = base_idx[s:s + rows, None]
            c = center_idx[s:s + rows, None]
            x = b * h
            y = x + signed_index(c - b + offs[None, :], n) * h
            out[s:s + rows] = h * (density(x, y) @ vals)
        return out


@dataclass(frozen=True)
class SmoothFunction:
    """Closed-form periodic function with its first few derivatives."""

    name: str
    derivatives: tuple

    def __call__(self, y):
        return self.derivatives[0](y)

    def derivative(self, j: int):
        if j >= len(self.derivatives):
            raise ValueError(f"{self.name} carries only {len(self.derivatives) - 1} derivatives")
        return self.derivatives[j]


def sine(freq: int = 1) -> SmoothFunction:
    """``sin(2 pi freq y)`` with derivatives up to order 6."""
    w = 2.0 * np.pi * freq
    phases = [np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t)]
    derivs = tuple((lambda y, j=j: w**j * phases[j % 4](w * np.asarray(y, dtype=float)))
                   for j in range(7))
    return SmoothFunction(f"sin{freq}", derivs)


def cosine(freq: int = 1) -> SmoothFunction:
    w = 2.0 * np.pi * freq
    phases = [np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t), np.sin]
    derivs = tuple((lambda y, j=j: w**j * phases[j % 4](w * np.asarray(y, dtype=float)))
                   for j in range(7))
    return SmoothFunction(f"cos{freq}", derivs)


class TaylorGerm(Germ):
    """``F_x`` = degree-``m`` Taylor polynomial of ``f`` at ``x``, locally lifted."""

    kind = "taylor"

    def __init__(self, grid, f: SmoothFunction, m: int):
        if not 0 <= m <= 3:
            raise ValueError(f"Taylor order must lie in 0..3, got {m}")
        super().__init__(grid, regularity_hint=(0.0, float(m + 1)))
        self.f = f
        self.m = m
        self._coef = [(lambda x, j=j: f.derivative(j)(x) / math.factorial(j)) for j in range(m + 1)]

    def _density(self, x, y):
        d = y - x
        return sum(c(x) * d**j for j, c in enumerate(self._coef))

    def evaluate(self, x, test):
        self._check_test(test)
        x = self.grid.index_of(x) * self.grid.spacing
        d = self.grid.lift(self.grid.points - x)
        h = self.grid.spacing
        return float(sum(c(x) * h * math.fsum(d**j * test.values)
                         for j, c in enumerate(self._coef)))

    def evaluate_translates(self, base_idx, kernel, center_idx):
        grid = self.grid
        n, h = grid.size, grid.spacing
        base_idx = _as_index_array(base_idx, n)
        center_idx = _as_index_array(center_idx, n)
        offs, vals = kernel.stencil()
        d = signed_index(center_idx - base_idx, n) * h
        reach = np.max(np.abs(offs)) * h if offs.size else 0.0
        if offs.size and np.max(np.abs(d)) + reach >= 0.5:
            # lift of y - x is not affine over the stencil: evaluate pointwise
            dens = DensityGerm(grid, self._density)
            return dens._density_pairs(self._density, base_idx, offs, vals, center_idx)
        y = offs * h
        mu = [h * math.fsum(y**i * vals) for i in range(self.m + 1)]
        x = base_idx * h
        out = np.zeros(base_idx.size)
        for j, c in enumerate(self._coef):
            mom = sum(math.comb(j, i) * d ** (j - i) * mu[i] for i in range(j + 1))
            out += c(x) * mom
        return out


@dataclass(frozen=True)
class TwoParamProcess:
    """Smooth ``A(s, t)`` with its derivative in the second slot.

    Without ``partial_2`` a fourth-order centred difference of step
    ``fd_step`` is used.
    """

    A: Callable
    partial_2: Callable | None = None
    name: str = "process"
    fd_step: float = 1e-3

    def __call__(self, s, t):
        return self.A(s, t)

    def d2(self, s, t):
        if self.partial_2 is not None:
            return self.partial_2(s, t)
        e = self.fd_step
        A = self.A
        return (-A(s, t + 2 * e) + 8 * A(s, t + e) - 8 * A(s, t - e) + A(s, t - 2 * e)) / (12 * e)

    def scaled(self, c: float) -> "TwoParamProcess":
        return TwoParamProcess(lambda s, t: c * self.A(s, t),
                               None if self.partial_2 is None
                               else (lambda s, t: c * self.partial_2(s, t)),
                               f"{c}*{self.name}", self.fd_step)

    def __add__(self, other: "TwoParamProcess") -> "TwoParamProcess":
        both = self.partial_2 is not None and other.partial_2 is not None
        return TwoParamProcess(lambda s, t: self.A(s, t) + other.A(s, t),
                               (lambda s, t: self.partial_2(s, t) + other.partial_2(s, t))
                               if both else None,
                               f"{self.name}+{other.name}", self.fd_step)


def additive_process(w: SmoothFunction | None = None) -> TwoParamProcess:
    """``A(s,t) = w(t) - w(s)``; ``w = None`` gives ``A(s,t) = t - s``."""
    if w is None:
        return TwoParamProcess(lambda s, t: t - s, lambda s, t: np.ones_like(np.asarray(t + s, dtype=float)),
                               "additive")
    w1 = w.derivative(1)
    return TwoParamProcess(lambda s, t: w(t) - w(s),
                           lambda s, t: w1(t) + 0.0 * s, f"additive_{w.name}")


def young_process(f: SmoothFunction | None = None, g: SmoothFunction | None = None) -> TwoParamProcess:
    """``A(s,t) = f(s) (g(t) - g(s))``; defaults ``f = cos(2 pi .)``, ``g = sin(2 pi .)``."""
    f = cosine(1) if f is None else f
    g = sine(1) if g is None else g
    g1 = g.derivative(1)
    return TwoParamProcess(lambda s, t: f(s) * (g(t) - g(s)),
                           lambda s, t: f(s) * g1(t), f"young_{f.name}_{g.name}")


def square_process() -> TwoParamProcess:
    """``A(s,t) = (t - s)**2``."""
    return TwoParamProcess(lambda s, t: (t - s) ** 2, lambda s, t: 2.0 * (t - s), "square")


class SewingGerm(DensityGerm):
    """``F_x = D_2 A(x, .)``; a second route integrates by parts against ``xi'``."""

    kind = "sewing"

    def __init__(self, grid, process: TwoParamProcess, tol: float = 1e-6):
        super().__init__(grid, process.d2, regularity_hint=None)
        self.process = process
        self.tol = tol

    def evaluate_ibp(self, x, test) -> float:
        """``-∫ A(x, y) xi'(y) dy`` with a fourth-order difference of ``xi``."""
        self._check_test(test)
        grid = self.grid
        h = grid.spacing
        v = test.values
        dv = (-np.roll(v, -2) + 8 * np.roll(v, -1) - 8 * np.roll(v, 1) + np.roll(v, 2)) / (12 * h)
        x = grid.index_of(x) * h
        y = x + grid.lift(grid.points - x)
        return -h * math.fsum(self.process(np.full_like(y, x), y) * dv)

    def evaluate_translates_ibp(self, base_idx, kernel, center_idx):
        offs, vals = kernel.stencil()
        d_offs, d_vals = _fd4(offs, vals, self.grid.spacing)
        return -self._density_pairs(self.process.A, base_idx, d_offs, d_vals, center_idx)

    def evaluate(self, x, test, check: bool = False):
        val = super().evaluate(x, test)
        if check:
            other = self.evaluate_ibp(x, test)
            if abs(val - other) > self.tol:
                raise DisagreementError(
                    f"D2A route {val:.12g} vs integration by parts {other:.12g} at x={x}")
        return val

    def cross_check(self, base_idx, kernel, center_idx) -> float:
        """Max route discrepancy over the pairs; raises above ``tol``."""
        a = self.evaluate_translates(base_idx, kernel, center_idx)
        b = self.evaluate_translates_ibp(base_idx, kernel, center_idx)
        gap = float(np.max(np.abs(a - b))) if a.size else 0.0
        if gap > self.tol:
            raise DisagreementError(f"sewing germ routes differ by {gap:.3e} > {self.tol:g}")
        return gap


class ShiftedGerm(Germ):
    """``F^tau_x(xi) = F_{x - tau}(xi( . + tau))`` for a grid shift ``tau = shift * h``."""

    def __init__(self, base: Germ, shift: int):
        super().__init__(base.grid, base.regularity_hint)
        self.base = base
        self.shift = int(shift)
        self.kind = f"shifted_{base.kind}"

    def evaluate(self, x, test):
        self._check_test(test)
        moved = SampledFunction(self.grid, np.roll(test.values, -self.shift))
        return self.base.evaluate(x - self.shift * self.grid.spacing, moved)

    def evaluate_translates(self, base_idx, kernel, center_idx):
        base_idx = np.asarray(base_idx) - self.shift
        center_idx = np.asarray(center_idx) - self.shift
        return self.base.evaluate_translates(base_idx, kernel, center_idx)


class LinearCombinationGerm(Germ):
    """``sum_i c_i F^i`` for germs on a common grid."""

    kind = "combination"

    def __init__(self, terms: Sequence):
        terms = tuple((float(c), g) for c, g in terms)
        if not terms:
            raise ValueError("empty combination")
        grid = terms[0][1].grid
        if any(g.grid != grid for _, g in terms):
            raise ValueError("germs must share a grid")
        super().__init__(grid)
        self.terms = terms

    def evaluate(self, x, test):
        return float(sum(c * g.evaluate(x, test) for c, g in self.terms))

    def evaluate_translates(self, base_idx, kernel, center_idx):
        out = 0.0
        for c, g in self.terms:
            out = out + c * g.evaluate_translates(base_idx, kernel, center_idx)
        return out


def constant_germ(w: SampledFunction) -> SeparableGerm:
    """``F_x(xi) = ∫ w xi`` for every ``x``."""
    return SeparableGerm(w.grid, [(np.ones(w.grid.size), w.values)],
                         regularity_hint=(0.0, math.inf), kind="constant")


def taylor_germ(grid: DyadicGrid, f: SmoothFunction, m: int) -> TaylorGerm:
    return TaylorGerm(grid, f, m)


def sewing_germ(grid: DyadicGrid, process: TwoParamProcess, tol: float = 1e-6) -> SewingGerm:
    return SewingGerm(grid, process, tol)


def sign_sequence(grid: DyadicGrid, seed: int, block: int = 1) -> np.ndarray:
    """Deterministic ±1 values, constant on blocks of ``block`` grid points."""
    if block < 1 or grid.size % block:
        raise ValueError(f"block {block} must divide {grid.size}")
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=grid.size // block)
    return np.repeat(signs, block)


def incoherent_germ(grid: DyadicGrid, seed: int, block: int = 1) -> SeparableGerm:
    """``F_x(xi) = s(x) ∫ s xi`` for a pseudo-random sign sequence ``s``.

    With ``block = grid.size`` the signs are a single constant and the germ is
    coherent.
    """
    s = sign_sequence(grid, seed, block)
    return SeparableGerm(grid, [(s, s)], kind="incoherent")
