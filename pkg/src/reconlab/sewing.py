"""Besov sewing through reconstruction: increments, norms, sewn paths and the χ partition."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HypothesisViolatedError, PartitionResidualError
from .germ import TwoParamProcess, sewing_germ
from .grid import DyadicGrid, SampledFunction, ball_offsets
from .mollifier import MollifierStack
from .quasinorm import lp_norm, lq_norm
from .reconstruct import reconstruct

C_SEW = 64.0
RECONSTRUCTION = "reconstruction"
ORACLE = "diagonal-derivative oracle"


def delta1(g):
    """``(s, t) -> g(t) - g(s)``."""
    return lambda s, t: g(t) - g(s)


def delta2(A):
    """``(s, u, t) -> A(s,t) - A(s,u) - A(u,t)``."""
    return lambda s, u, t: A(s, t) - A(s, u) - A(u, t)


def antisymmetrize(A):
    """Extend ``A`` from pairs ``s <= t`` by ``A(s,t) = -A(t,s)``."""
    def anti(s, t):
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        return np.where(s <= t, A(s, t), -A(t, s))
    return anti


def _process_fn(A):
    return A.A if isinstance(A, TwoParamProcess) else A


def b_norm(A, eta: float, p: float, q: float, k_range, grid: DyadicGrid) -> float:
    """``l^q_k 2^{eta k} max_{|h|<=2^-k} L^p_x |A(x, x+h)|`` over grid points and grid offsets."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    A = _process_fn(A)
    ks = tuple(k_range)
    n, h = grid.size, grid.spacing
    reach = min(n // 2, math.floor(2.0 ** -min(ks) * n + 0.5))
    x = grid.points
    offsets = np.arange(-reach, reach + 1)
    per_offset = np.empty(offsets.size)
    rows = max(1, (1 << 20) // n)
    for s in range(0, offsets.size, rows):
        o = offsets[s:s + rows, None]
        vals = np.abs(A(np.broadcast_to(x, (o.size, n)), x[None, :] + o * h))
        if math.isinf(p):
            per_offset[s:s + rows] = vals.max(axis=1)
        else:
            per_offset[s:s + rows] = [lp_norm(v, h, p) for v in vals]
    out = []
    for k in ks:
        rk = min(reach, math.floor(2.0**-k * n + 0.5))
        out.append(2.0 ** (eta * k) * float(np.max(per_offset[reach - rk: reach + rk + 1])))
    return lq_norm(out, q)


def bbar_norm(G, eta: float, p: float, q: float, k_range, grid: DyadicGrid,
              max_points: int = 17) -> float:
    """``l^q_k 2^{eta k} sup_{|y'|,|y''|<=2^{1-k}} L^p_x |G(x, x+y', x+y'')|``.

    The offsets ``y'``, ``y''`` run over a lattice of at most ``max_points``
    points per axis that contains the corners of the square.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    h = grid.spacing
    x = grid.points
    out = []
    for k in k_range:
        offs, _ = ball_offsets(grid, 2.0 ** (1 - k), max_points)
        best = 0.0
        second = x[None, :] + offs[:, None] * h
        for a in offs:
            vals = np.abs(G(x[None, :], x[None, :] + a * h, second))
            best = max(best, max(lp_norm(v, h, p) for v in vals))
        out.append(2.0 ** (eta * k) * best)
    return lq_norm(out, q)


def antiderivative(f: SampledFunction):
    """Exact antiderivative of the trigonometric interpolant of ``f`` with value 0 at 0.

    Returns ``(values, drift)`` where ``drift = ∫_0^1 f`` is the increment over one period.
    """
    grid = f.grid
    n = grid.size
    coef = np.fft.rfft(f.values) / n
    drift = float(coef[0].real)
    freqs = np.arange(coef.size)
    integ = np.zeros_like(coef)
    integ[1:] = coef[1:] / (2j * np.pi * freqs[1:])
    if n % 2 == 0:
        integ[-1] = 0.0  # Nyquist mode of a real signal integrates to a sine, zero on the grid
    periodic = np.fft.irfft(integ * n, n)
    values = periodic - periodic[0] + drift * grid.points
    return values, drift


@dataclass(frozen=True, eq=False)
class SewnPath:
    """Path ``g`` on the grid with ``g(0) = 0``, extended by ``g(y+1) = g(y) + drift``."""

    g: SampledFunction
    route: str
    drift: float = 0.0

    def __call__(self, y):
        grid = self.g.grid
        y = np.asarray(y, dtype=float)
        t = y * grid.size
        i = np.rint(t).astype(np.int64)
        if np.any(np.abs(t - i) > 1e-6):
            raise ValueError("sewn paths are evaluated at grid points only")
        wraps = np.floor_divide(i, grid.size)
        return self.g.values[i % grid.size] + self.drift * wraps

    @property
    def values(self):
        return self.g.values


def _check_hypotheses(eta, r, p):
    if not eta > 1:
        raise HypothesisViolatedError(f"sewing needs eta > 1, got {eta}")
    if not r > 1:
        raise HypothesisViolatedError(f"sewing needs r > 1, got {r}")
    if p < 1:
        raise HypothesisViolatedError(f"sewing with p < 1 is not supported (p={p})")


def sew(A: TwoParamProcess, eta: float, p: float, q: float, r: float, stack: MollifierStack,
        route: str = RECONSTRUCTION, n_stop: int | None = None) -> SewnPath:
    """Sew ``A`` into a path ``g`` with ``g(0) = 0``.

    The reconstruction route reconstructs the germ ``F_x = D_2 A(x, .)`` and
    integrates the result; the oracle route integrates ``D_2 A(u, u)``.
    """
    _check_hypotheses(eta, r, p)
    grid = stack.grid
    if route == RECONSTRUCTION:
        f = reconstruct(sewing_germ(grid, A), stack, n_stop).f
    elif route == ORACLE:
        u = grid.points
        f = SampledFunction(grid, np.broadcast_to(A.d2(u, u), u.shape))
    else:
        raise ValueError(f"unknown route {route!r}")
    values, drift = antiderivative(f)
    return SewnPath(SampledFunction(grid, values), route, drift)


def riemann_stieltjes(f, g, grid: DyadicGrid) -> np.ndarray:
    """``x_i -> sum f(tag) (g(t_{j+1}) - g(t_j))`` over the partition of ``[0, x_i]`` at the grid mesh.

    Tags are the cell midpoints.
    """
    t = np.arange(grid.size + 1) * grid.spacing
    tags = 0.5 * (t[1:] + t[:-1])
    incr = f(tags) * (g(t[1:]) - g(t[:-1]))
    return np.concatenate([[0.0], np.cumsum(incr)[:-1]])


@dataclass(frozen=True)
class SewingNorms:
    B_eta: float
    Bbar_eta: float
    eta: float
    p: float
    q: float

    @property
    def ratio(self) -> float:
        if self.Bbar_eta == 0.0:
            return 0.0 if self.B_eta == 0.0 else math.inf
        return self.B_eta / self.Bbar_eta


def sewing_bound(A: TwoParamProcess, path: SewnPath, eta: float, p: float, q: float,
                 k_range, grid: DyadicGrid | None = None) -> SewingNorms:
    """Norms on both sides of the sewing bound: ``B(delta g - A)`` and ``Bbar(delta A)``."""
    grid = path.g.grid if grid is None else grid
    dg = delta1(path)
    remainder = lambda s, t: dg(s, t) - A(s, t)
    return SewingNorms(b_norm(remainder, eta, p, q, k_range, grid),
                       bbar_norm(delta2(A), eta, p, q, k_range, grid), eta, p, q)


def smootherstep(u):
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def chi_tilde(theta):
    """Ramp equal to 1 on ``[0, 0.4]``, smooth on ``(0.4, 0.6)``, zero from 0.6 on."""
    theta = np.asarray(theta, dtype=float)
    return np.where(theta < 0.0, 0.0, smootherstep((0.6 - theta) / 0.2))


def chi(theta):
    theta = np.asarray(theta, dtype=float)
    return chi_tilde(theta) - chi_tilde(2.0 * theta)


@dataclass(frozen=True)
class PartitionReport:
    max_residual: float
    support: tuple
    symmetry_residual: float
    n_samples: int
    levels: int


def chi_partition_check(grid: DyadicGrid | None = None, n_samples: int = 1024,
                        tol: float = 1e-10) -> PartitionReport:
    """Check ``sum_l chi(2^l t) + chi(2^l (1-t)) = 1`` on ``(0, 1)`` and ``supp chi ⊆ [0.2, 0.6]``.

    Sample points are the cell midpoints of ``grid`` (default ``n_samples`` cells);
    the sum stops at the first ``l`` with ``2^-l`` below the spacing.
    """
    m = n_samples if grid is None else grid.size
    theta = (np.arange(m) + 0.5) / m
    levels = 0
    while 2.0**-levels >= 1.0 / m:
        levels += 1
    total = np.zeros(m)
    for l in range(levels + 1):
        total += chi(2.0**l * theta) + chi(2.0**l * (1.0 - theta))
    residual = float(np.max(np.abs(total - 1.0)))
    fine = np.linspace(0.0, 1.0, 100_001)
    nz = fine[chi(fine) != 0.0]
    support = (float(nz.min()), float(nz.max())) if nz.size else (math.nan, math.nan)
    sym = float(np.max(np.abs(chi_tilde(theta) + chi_tilde(1.0 - theta) - 1.0)))
    report = PartitionReport(residual, support, sym, m, levels)
    if residual > tol or sym > tol or not (0.2 <= support[0] and support[1] <= 0.6):
        raise PartitionResidualError(f"partition check failed: {report}")
    return report
