"""Dyadic grids on the unit torus and the numerical substrate built on them.

Every field in the package lives on a :class:`DyadicGrid`: ``2**n_max``
equispaced samples of the torus ``[0, 1)``.  Grid index ``i`` stands for the
point ``i * h``; centred functions (mollifiers, test functions) store their
value at ``-u`` in slot ``N - u``.

Signed offsets use the representative of ``y - x`` in ``(-1/2, 1/2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, ResolutionError, ScaleTooFineError

__all__ = [
    "DyadicGrid",
    "SampledFunction",
    "TestClassDictionary",
    "dilate_translate",
    "quadrature",
    "convolve",
    "ball_offsets",
    "ball_average",
    "ball_filter",
    "holder_seminorm",
    "test_dictionary",
    "sample",
]


@dataclass(frozen=True)
class DyadicGrid:
    """Uniform periodic sampling of the unit torus at spacing ``2**-n_max``."""

    n_max: int
    d: int = 1

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 4:
            raise ValueError(f"n_max must be an integer >= 4, got {self.n_max}")
        if self.d != 1:
            # kernels are one-dimensional; d is carried for readability only
            raise NotImplementedError("only d = 1 grids are implemented")

    @property
    def size(self) -> int:
        return 1 << self.n_max

    @property
    def spacing(self) -> float:
        return 1.0 / self.size

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.size) * self.spacing

    def signed_offsets(self) -> np.ndarray:
        """Index offsets of every slot, lifted to ``(-N/2, N/2]``."""
        return signed_index(np.arange(self.size), self.size)

    def lifted_points(self) -> np.ndarray:
        """Grid coordinates lifted to ``(-1/2, 1/2]``."""
        return self.signed_offsets() * self.spacing

    def index_of(self, x: float) -> int:
        """Grid index of the torus point ``x``; ``x`` must be a grid point."""
        t = x * self.size
        i = round(t)
        if abs(t - i) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"{x!r} is not a grid point of {self}")
        return int(i) % self.size

    def lift(self, dx):
        """Representative of ``dx`` modulo 1 in ``(-1/2, 1/2]``."""
        dx = np.asarray(dx, dtype=float)
        out = dx - np.floor(dx + 0.5)
        return np.where(out <= -0.5, out + 1.0, out)


def signed_index(idx, n):
    idx = np.asarray(idx) % n
    return np.where(idx > n // 2, idx - n, idx)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Real samples on a :class:`DyadicGrid`.

    ``support_radius`` records the radius of the ball around 0 outside which the
    samples vanish (for centred functions); ``None`` means no such claim.
    """

    grid: DyadicGrid
    values: np.ndarray
    support_radius: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} samples, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def _check(self, other):
        if other.grid != self.grid:
            raise GridMismatchError(f"{self.grid} vs {other.grid}")

    def _radius_union(self, other):
        if self.support_radius is None or other.support_radius is None:
            return None
        return max(self.support_radius, other.support_radius)

    def __add__(self, other):
        self._check(other)
        return SampledFunction(self.grid, self.values + other.values,
                               self._radius_union(other))

    def __sub__(self, other):
        self._check(other)
        return SampledFunction(self.grid, self.values - other.values,
                               self._radius_union(other))

    def __mul__(self, c):
        if isinstance(c, SampledFunction):
            self._check(c)
            radii = [r for r in (self.support_radius, c.support_radius) if r is not None]
            return SampledFunction(self.grid, self.values * c.values,
                                   min(radii) if radii else None)
        return SampledFunction(self.grid, float(c) * self.values, self.support_radius)

    __rmul__ = __mul__

    def __neg__(self):
        return SampledFunction(self.grid, -self.values, self.support_radius)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def stencil(self):
        """``(offsets, values)`` of the centred support, offsets in grid units."""
        n = self.grid.size
        offs = self.grid.signed_offsets()
        if self.support_radius is None or self.support_radius >= 0.5:
            keep = self.values != 0.0
        else:
            reach = math.floor(self.support_radius * n + 0.5)
            keep = np.abs(offs) <= reach
        order = np.argsort(offs[keep], kind="stable")
        return offs[keep][order], self.values[keep][order]

    def moment(self, alpha: int) -> float:
        """``∫ y**alpha f(y) dy`` with ``y`` lifted to ``(-1/2, 1/2]``."""
        y = self.grid.lifted_points()
        return quadrature_values(self.grid, y**alpha * self.values)


def sample(grid: DyadicGrid, func, support_radius: float | None = None) -> SampledFunction:
    """Sample a closed-form function of the lifted coordinate ``y ∈ (-1/2, 1/2]``."""
    return SampledFunction(grid, func(grid.lifted_points()), support_radius)


def quadrature_values(grid: DyadicGrid, values) -> float:
    return grid.spacing * math.fsum(np.asarray(values, dtype=float))


def quadrature(f: SampledFunction) -> float:
    """Periodic trapezoid rule ``h * sum(values)``."""
    return quadrature_values(f.grid, f.values)


def dilate_translate(xi: SampledFunction, k: int, x: float = 0.0) -> SampledFunction:
    """``y -> 2**k * xi(2**k * (y - x))`` sampled on the same grid.

    Dilation by ``2**k`` maps grid points onto grid points, so samples are taken
    exactly (no interpolation).  Off-grid centres ``x`` are reached with a
    spectral (Fourier) shift.
    """
    grid = xi.grid
    n = grid.size
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > grid.n_max - 2:
        raise ScaleTooFineError(
            f"scale k={k} leaves fewer than 4 samples across the support (n_max={grid.n_max})")
    if k == 0:
        vals = np.array(xi.values)
    else:
        if xi.support_radius is None or xi.support_radius > 0.5:
            raise ValueError("dilation needs a centred function with support_radius <= 1/2")
        src = grid.signed_offsets() * (1 << k)
        vals = np.zeros(n)
        ok = np.abs(src) <= n // 2
        vals[ok] = (2.0 ** (grid.d * k)) * xi.values[src[ok] % n]
    radius = None if xi.support_radius is None else xi.support_radius * 2.0 ** (-k)
    return SampledFunction(grid, _translate(grid, vals, x), radius)


def _translate(grid: DyadicGrid, vals: np.ndarray, x: float) -> np.ndarray:
    t = (x % 1.0) * grid.size
    i = round(t)
    if abs(t - i) <= 1e-9 * max(1.0, t):
        return np.roll(vals, int(i) % grid.size)
    freqs = np.fft.fftfreq(grid.size, d=grid.spacing)
    return np.real(np.fft.ifft(np.fft.fft(vals) * np.exp(-2j * np.pi * freqs * (x % 1.0))))


def convolve(f: SampledFunction, g: SampledFunction) -> SampledFunction:
    """Periodic convolution ``(f*g)(x) = h * sum_y f(y) g(x - y)`` via FFT."""
    if f.grid != g.grid:
        raise GridMismatchError(f"{f.grid} vs {g.grid}")
    h = f.grid.spacing
    vals = h * np.real(np.fft.ifft(np.fft.fft(f.values) * np.fft.fft(g.values)))
    radius = None
    if f.support_radius is not None and g.support_radius is not None:
        radius = min(0.5, f.support_radius + g.support_radius)
    return SampledFunction(f.grid, vals, radius)


def ball_offsets(grid: DyadicGrid, radius: float, max_points: int | None = None,
                 spacing: float | None = None):
    """Offsets (in lattice units) and normalized weights realizing a ball average.

    The closed ball of ``radius`` on a lattice of ``spacing`` (default: the grid
    spacing) is discretized by the trapezoid rule: interior points weigh 1,
    the two boundary points weigh 1/2.  With ``max_points`` the lattice is
    thinned by a power-of-two stride that divides the radius.  Radii of at
    least 1/2 cover the whole torus with uniform weights.
    """
    spacing = grid.spacing if spacing is None else spacing
    period = round(1.0 / spacing)
    reach = math.floor(radius / spacing + 0.5)
    if 2 * reach >= period:
        step = 1
        if max_points is not None:
            while period // (2 * step) >= max_points and period % (2 * step) == 0:
                step *= 2
        offs = np.arange(-(period // 2) + step, period // 2 + 1, step)
        return offs, np.full(offs.size, 1.0 / offs.size)
    if reach == 0:
        return np.zeros(1, dtype=int), np.ones(1)
    step = 1
    if max_points is not None:
        while 2 * reach // step + 1 > max_points and reach % (2 * step) == 0:
            step *= 2
    offs = np.arange(-reach, reach + 1, step)
    w = np.ones(offs.size)
    w[0] = w[-1] = 0.5
    return offs, w / w.sum()


def ball_average(f, x: float, radius: float) -> float:
    """Mean of ``f`` over the closed torus ball ``B(x, radius)`` (trapezoid ends)."""
    if isinstance(f, SampledFunction):
        grid, vals = f.grid, f.values
    else:
        grid, vals = f
        vals = np.asarray(vals, dtype=float)
    if radius < 2 * grid.spacing - 1e-15:
        raise ResolutionError(f"radius {radius} below two grid spacings ({grid.spacing})")
    i = grid.index_of(x)
    offs, w = ball_offsets(grid, radius)
    raw = np.rint(2.0 * w / w.max()) / 2.0  # exact 1 and 1/2, so constants average exactly
    return math.fsum(raw * vals[(i + offs) % grid.size]) / math.fsum(raw)


def ball_filter(values: np.ndarray, reach: int, offsets=None, weights=None) -> np.ndarray:
    """Circular ball average of lattice samples with trapezoid ends.

    ``reach`` is the ball radius in lattice units.  Precomputed
    ``(offsets, weights)`` from :func:`ball_offsets` may be passed instead.
    """
    values = np.asarray(values, dtype=float)
    m = values.size
    if offsets is None:
        if reach <= 0:
            return values.copy()
        if 2 * reach >= m:
            return np.full(m, values.mean())
        offsets = np.arange(-reach, reach + 1)
        weights = np.ones(offsets.size)
        weights[0] = weights[-1] = 0.5
        weights = weights / weights.sum()
    if offsets.size > 96:
        return _fft_filter(values, offsets, weights)
    out = np.zeros(m)
    for o, w in zip(offsets, weights):
        out += w * np.roll(values, -int(o))
    return out


def _fft_filter(values, offsets, weights):
    m = values.size
    kern = np.zeros(m)
    np.add.at(kern, offsets % m, weights)
    # out[i] = sum_o w_o values[i + o]  (cross-correlation)
    return np.real(np.fft.ifft(np.fft.fft(values) * np.conj(np.fft.fft(kern))))


def _centered_derivative(values: np.ndarray, h: float, order: int) -> np.ndarray:
    out = values
    for _ in range(order):
        out = (np.roll(out, -1) - np.roll(out, 1)) / (2 * h)
    return out


def holder_seminorm(f: SampledFunction, r: float, max_points: int = 2048) -> float:
    """Discrete Hölder-``r`` seminorm of ``D**r_tilde f`` over all pairs of lattice points.

    ``r_tilde`` is the largest integer strictly below ``r``.  Grids finer than
    ``max_points`` are thinned to every ``N // max_points``-th point after the
    derivative is taken.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    r_tilde = math.ceil(r) - 1
    beta = r - r_tilde
    grid = f.grid
    g = _centered_derivative(f.values, grid.spacing, r_tilde)
    y = grid.lifted_points()
    step = max(1, grid.size // max_points)
    g, y = g[::step], y[::step]
    best = 0.0
    chunk = max(1, (1 << 22) // y.size)
    for start in range(0, y.size, chunk):
        gi, yi = g[start:start + chunk, None], y[start:start + chunk, None]
        dist = np.abs(yi - y[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(dist > 0, np.abs(gi - g[None, :]) / dist**beta, 0.0)
        best = max(best, float(q.max()))
    return best


# closed-form profiles on the lifted coordinate; shared with ``mollifier``

def exp_bump_profile(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 0.5
    out[inside] = np.exp(-1.0 / (1.0 - (2.0 * y[inside]) ** 2))
    return out


def exp_bump_derivative(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 0.5
    s = 1.0 - (2.0 * y[inside]) ** 2
    out[inside] = np.exp(-1.0 / s) * (-8.0 * y[inside] / s**2)
    return out


def poly_bump_profile(y, power: int = 8):
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) < 0.5, (1.0 - (2.0 * y) ** 2) ** power, 0.0)


@dataclass(frozen=True, eq=False)
class TestClassDictionary:
    """Finite stand-in for the Hölder test class: members normalized to unit seminorm."""

    __test__ = False  # not a pytest class

    r: float
    members: tuple
    names: tuple = field(default=())

    def __post_init__(self):
        if not self.members:
            raise ValueError("dictionary must have at least one member")
        for m in self.members:
            if m.support_radius is None or m.support_radius > 0.5:
                raise ValueError("dictionary members must be supported in B(0, 1/2)")

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


def test_dictionary(grid: DyadicGrid, r: float, phi: SampledFunction | None = None,
                    reference_level: int = 11) -> TestClassDictionary:
    """Five-member dictionary: a bump, its derivative, two half-width bumps at
    ``±1/4`` and an odd wavelet-like bump, each scaled to unit Hölder-``r`` seminorm.

    ``phi`` replaces the default exponential bump as the first member.  The
    normalizing constants are measured on a grid of ``min(n_max, reference_level)``
    so that every pair of points is inspected.
    """
    ref = DyadicGrid(min(grid.n_max, reference_level))

    def half(shift):
        return lambda y: exp_bump_profile(2.0 * (y - shift))

    profiles = {
        "bump": exp_bump_profile,
        "bump_derivative": exp_bump_derivative,
        "half_bump_left": half(-0.25),
        "half_bump_right": half(0.25),
        "odd_wavelet": lambda y: half(-0.25)(y) - half(0.25)(y),
    }
    members, names = [], []
    for name, prof in profiles.items():
        if name == "bump" and phi is not None:
            scale = holder_seminorm(_resample(phi, ref), r)
            members.append(SampledFunction(grid, phi.values / scale, min(0.5, phi.support_radius)))
        else:
            scale = holder_seminorm(sample(ref, prof, 0.5), r)
            members.append(sample(grid, lambda y, p=prof, s=scale: p(y) / s, 0.5))
        names.append(name)
    return TestClassDictionary(r, tuple(members), tuple(names))


def _resample(f: SampledFunction, target: DyadicGrid) -> SampledFunction:
    if target == f.grid:
        return f
    step = f.grid.size // target.size
    return SampledFunction(target, f.values[::step], f.support_radius)
