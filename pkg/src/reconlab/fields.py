"""Fields indexed by a dyadic scale ``k`` and a base point ``x``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DyadicGrid


def default_stride(grid: DyadicGrid, k: int) -> int:
    """Base-point stride at scale ``k``: eight points per ball diameter ``2**(1-k)``."""
    return 1 << max(0, grid.n_max - k - 3)


@dataclass(frozen=True, eq=False)
class MultiscaleField:
    """Per-level samples ``values[j][i] = H(ks[j], i * strides[j] * h)``.

    Each level lives on its own power-of-two sub-lattice of the grid.
    """

    grid: DyadicGrid
    ks: tuple
    strides: tuple
    values: tuple
    meta: str = ""

    def __post_init__(self):
        ks = tuple(int(k) for k in self.ks)
        if not ks:
            raise ValueError("a multiscale field needs at least one level")
        if len(set(ks)) != len(ks):
            raise ValueError(f"duplicate scales in {ks}")
        if not (len(ks) == len(self.strides) == len(self.values)):
            raise ValueError("ks, strides and values must have equal length")
        vals = []
        for s, v in zip(self.strides, self.values):
            if s < 1 or self.grid.size % s:
                raise ValueError(f"stride {s} does not divide the grid size {self.grid.size}")
            v = np.array(v, dtype=float, copy=True)
            if v.shape != (self.grid.size // s,):
                raise ValueError(f"level with stride {s} needs {self.grid.size // s} values")
            v.setflags(write=False)
            vals.append(v)
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "strides", tuple(int(s) for s in self.strides))
        object.__setattr__(self, "values", tuple(vals))

    @classmethod
    def from_levels(cls, grid, levels: dict, strides: dict | None = None, meta: str = ""):
        """Build from ``{k: values}``; strides are inferred from the array lengths."""
        ks = sorted(levels)
        if strides is None:
            strides = {k: grid.size // len(levels[k]) for k in ks}
        return cls(grid, tuple(ks), tuple(strides[k] for k in ks),
                   tuple(levels[k] for k in ks), meta)

    @classmethod
    def from_function(cls, grid, ks, func, strides=None, meta: str = ""):
        """Tabulate ``func(k, x_array)`` at the default (or given) strides."""
        ks = tuple(ks)
        if strides is None:
            strides = tuple(default_stride(grid, k) for k in ks)
        vals = []
        for k, s in zip(ks, strides):
            x = np.arange(grid.size // s) * s * grid.spacing
            vals.append(np.broadcast_to(np.asarray(func(k, x), dtype=float), x.shape))
        return cls(grid, ks, tuple(strides), tuple(vals), meta)

    @property
    def k_range(self):
        """Scales in increasing order."""
        return tuple(sorted(self.ks))

    def index(self, k: int) -> int:
        try:
            return self.ks.index(k)
        except ValueError:
            raise KeyError(f"scale {k} not in field (scales {self.ks})") from None

    def level(self, k: int) -> np.ndarray:
        return self.values[self.index(k)]

    def stride(self, k: int) -> int:
        return self.strides[self.index(k)]

    def points(self, k: int) -> np.ndarray:
        """Base points (torus coordinates) of level ``k``."""
        s = self.stride(k)
        return np.arange(self.grid.size // s) * s * self.grid.spacing

    def map(self, fn, meta: str | None = None) -> "MultiscaleField":
        return MultiscaleField(self.grid, self.ks, self.strides,
                               tuple(fn(v) for v in self.values),
                               self.meta if meta is None else meta)

    def scaled(self, c: float) -> "MultiscaleField":
        return self.map(lambda v: c * v)

    def __add__(self, other: "MultiscaleField") -> "MultiscaleField":
        if other.grid != self.grid or other.ks != self.ks or other.strides != self.strides:
            raise ValueError("fields must share grid, scales and strides")
        return MultiscaleField(self.grid, self.ks, self.strides,
                               tuple(a + b for a, b in zip(self.values, other.values)), self.meta)

    def restrict(self, ks) -> "MultiscaleField":
        idx = [self.index(k) for k in ks]
        return MultiscaleField(self.grid, tuple(self.ks[i] for i in idx),
                               tuple(self.strides[i] for i in idx),
                               tuple(self.values[i] for i in idx), self.meta)

    def max(self) -> float:
        return max(float(np.max(v)) for v in self.values)

    def min(self) -> float:
        return min(float(np.min(v)) for v in self.values)

    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(v))) for v in self.values)

    def rows(self):
        """Yield ``(k, x, value)`` triples level by level."""
        for k, s, v in zip(self.ks, self.strides, self.values):
            xs = np.arange(v.size) * s * self.grid.spacing
            for x, val in zip(xs, v):
                yield k, float(x), float(val)
