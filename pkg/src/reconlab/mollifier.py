"""Mollifier stack: base bump, moment-cancelled bump, and the telescoping kernels.

With ``phi`` having integral one and vanishing moments of orders
``1..r_tilde``, the stack holds ``rho = phi^(1) * phi`` and
``psi = phi^(2) - phi``; these satisfy
``rho^(n+1) - rho^(n) = phi^(n+1) * psi^(n)`` for every ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MomentResidualError, ScaleTooFineError, SingularSystemError
from .grid import (
    DyadicGrid,
    SampledFunction,
    convolve,
    dilate_translate,
    exp_bump_profile,
    poly_bump_profile,
    quadrature,
    sample,
)

MAX_R_TILDE = 4

_PROFILES = {
    "exp": exp_bump_profile,
    "poly": poly_bump_profile,
}


def base_bump(grid: DyadicGrid, kind: str = "exp") -> SampledFunction:
    """Smooth even bump supported in ``B(0, 1/2)``, normalized to unit quadrature.

    ``kind="exp"`` is ``exp(-1/(1 - (2y)^2))``; ``kind="poly"`` is the
    polynomial bump ``(1 - (2y)^2)^8``.
    """
    if grid.n_max < 8:
        raise ValueError(f"base_bump needs n_max >= 8, got {grid.n_max}")
    try:
        prof = _PROFILES[kind]
    except KeyError:
        raise ValueError(f"unknown bump kind {kind!r}; expected one of {sorted(_PROFILES)}")
    raw = sample(grid, prof, 0.5)
    return raw * (1.0 / quadrature(raw))


def r_tilde_for(r: float) -> int:
    """Largest integer strictly smaller than ``r``."""
    if r <= 0:
        raise ValueError(f"Hölder order must be positive, got {r}")
    return math.ceil(r) - 1


def moment_cancel(phi0: SampledFunction, r_tilde: int):
    """Combine dilates of ``phi0`` into a bump with moments ``(1, 0, ..., 0)``.

    The moment of order ``a`` of the dilate ``phi0^(i)`` is
    ``2**(-i*a) * m_a(phi0)``.  Orders with ``m_a(phi0) = 0`` are satisfied by
    every combination and are dropped; the remaining square system in the
    nodes ``2**-i`` uses as many dilates as retained orders.

    Returns ``(phi, coefficients)``.
    """
    if not 0 <= r_tilde <= MAX_R_TILDE:
        raise ValueError(f"r_tilde must lie in 0..{MAX_R_TILDE}, got {r_tilde}")
    moments = np.array([phi0.moment(a) for a in range(r_tilde + 1)])
    if abs(moments[0] - 1.0) > 1e-10:
        raise ValueError(f"phi0 must have unit integral, got {moments[0]}")
    retained = [a for a in range(r_tilde + 1)
                if abs(moments[a]) > 1e-12 * 0.5**a]
    nodes = 2.0 ** -np.arange(len(retained))
    system = np.array([[nd**a * moments[a] for nd in nodes] for a in retained])
    rhs = np.array([1.0 if a == 0 else 0.0 for a in retained])
    if np.linalg.cond(system) > 1e12:
        raise SingularSystemError(f"moment system is singular (retained orders {retained})")
    coefficients = np.linalg.solve(system, rhs)

    phi = SampledFunction(phi0.grid, np.zeros(phi0.grid.size), 0.5)
    for i, c in enumerate(coefficients):
        phi = phi + c * dilate_translate(phi0, i)
    residual = _moment_residual(phi, r_tilde)
    if residual > 1e-8 or abs(quadrature(phi) - 1.0) > 1e-10:
        raise MomentResidualError(
            f"moment residual {residual:.3e} after cancellation; grid under-resolved?")
    return phi, coefficients


def _moment_residual(phi: SampledFunction, r_tilde: int) -> float:
    return max((abs(phi.moment(a)) for a in range(1, r_tilde + 1)), default=0.0)


@dataclass(frozen=True, eq=False)
class MollifierStack:
    phi: SampledFunction
    rho: SampledFunction
    psi: SampledFunction
    r_tilde: int
    coefficients: np.ndarray
    base: SampledFunction
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self) -> DyadicGrid:
        return self.phi.grid

    def phi_at(self, n: int) -> SampledFunction:
        """``phi^(n)`` centred at 0, rescaled to unit discrete mass.

        At fine levels the subsampled bump spans only a few grid points and its
        trapezoid mass drifts from 1; the rescaling removes that drift.
        """
        return self._memo(("phi", n), lambda: _unit_mass_dilate(self.phi, n))

    def psi_at(self, n: int) -> SampledFunction:
        """``psi^(n) = phi^(n+2) - phi^(n)`` from the discrete dilates."""
        def build():
            out = self.phi_at(n + 2) - self.phi_at(n)
            return SampledFunction(out.grid, out.values, 0.5 * 2.0**-n)
        return self._memo(("psi", n), build)

    def rho_at(self, n: int) -> SampledFunction:
        """``rho^(n) = phi^(n+1) * phi^(n)``; ``rho`` itself wraps around the torus."""
        if n == 0:
            return self.rho

        def build():
            out = convolve(self.phi_at(n + 1), self.phi_at(n))
            return SampledFunction(out.grid, out.values, 0.75 * 2.0**-n)
        return self._memo(("rho", n), build)

    def _memo(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def moment_table(self, max_order: int | None = None):
        """Rows ``(alpha, m_alpha(phi), m_alpha(rho), m_alpha(psi))``."""
        top = self.r_tilde + 2 if max_order is None else max_order
        rho = self.rho_at(1)  # rho itself is periodized; use its dilate and rescale
        rows = []
        for a in range(top + 1):
            rows.append((a, self.phi.moment(a), rho.moment(a) * 2.0 ** a, self.psi.moment(a)))
        return rows


def build_stack(grid: DyadicGrid, r: float, bump: str = "exp") -> MollifierStack:
    """Mollifier stack for Hölder order ``r`` (``r_tilde`` = largest integer below ``r``)."""
    r_tilde = r_tilde_for(r)
    phi0 = base_bump(grid, bump)
    phi, coefficients = moment_cancel(phi0, r_tilde)
    phi1, phi2 = _unit_mass_dilate(phi, 1), _unit_mass_dilate(phi, 2)
    # true support radius is 1/4 + 1/2 = 3/4: rho wraps around the unit torus
    rho = SampledFunction(grid, convolve(phi1, phi).values, 0.75)
    psi = phi2 - phi
    return MollifierStack(phi, rho, psi, r_tilde, coefficients, phi0)


def _unit_mass_dilate(phi: SampledFunction, n: int) -> SampledFunction:
    d = dilate_translate(phi, n)
    return d * (1.0 / quadrature(d))


def _direct_convolve(f: SampledFunction, g: SampledFunction) -> np.ndarray:
    """Aperiodic direct-sum convolution of two stencils, wrapped onto the torus."""
    n = f.grid.size
    of, vf = f.stencil()
    og, vg = g.stencil()
    if not (np.all(np.diff(of) == 1) and np.all(np.diff(og) == 1)):
        raise ValueError("stencils must be contiguous")
    full = np.convolve(vf, vg) * f.grid.spacing
    out = np.zeros(n)
    np.add.at(out, (of[0] + og[0] + np.arange(full.size)) % n, full)
    return out


def check_telescope_identity(stack: MollifierStack, n: int, zero_psi: bool = False) -> float:
    """Relative sup-norm residual of ``rho^(n+1) - rho^(n)`` against ``phi^(n+1) * psi^(n)``.

    The left side is assembled from direct-sum convolutions of dilated ``phi``;
    the right side is the FFT convolution with the dilated ``psi``.  The value
    is normalized by ``sup |rho^(n+1)|``.  ``zero_psi`` replaces ``psi`` by 0
    (negative control).
    """
    grid = stack.grid
    if n < 0 or n > grid.n_max - 6:
        raise ScaleTooFineError(f"n={n} outside 0..n_max-6 = {grid.n_max - 6}")
    p0, p1, p2 = stack.phi_at(n), stack.phi_at(n + 1), stack.phi_at(n + 2)
    rho_next = _direct_convolve(p2, p1)
    lhs = rho_next - _direct_convolve(p1, p0)
    if zero_psi:
        rhs = np.zeros(grid.size)
    else:
        rhs = convolve(p1, stack.psi_at(n)).values
    return float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rho_next)))
