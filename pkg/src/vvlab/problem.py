"""Problem data: top-wall slip velocity ``alpha + delta * f(x)`` and grid sizes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .strip import Grid1D, check_nx


@dataclass(frozen=True)
class Discretisation:
    """Grid sizes and truncation bounds shared by every solver."""

    n_x: int = 32
    n_y: int = 512
    n_psi: int = 2200
    n_zeta: int = 2000
    n_eta: int = 2000
    zeta_min: float = -40.0
    eta_max: float = 40.0
    y_grading: float = 0.0

    def __post_init__(self) -> None:
        check_nx(self.n_x)
        for name in ("n_y", "n_psi", "n_zeta", "n_eta"):
            if getattr(self, name) < 8:
                raise ValueError(f"{name} must be at least 8")

    def x_grid(self) -> Grid1D:
        return Grid1D.periodic_x(self.n_x)

    def y_grid(self) -> Grid1D:
        return Grid1D.interval_y(self.n_y, self.y_grading)

    def zeta_grid(self) -> Grid1D:
        return Grid1D.upper_zeta(self.n_zeta, self.zeta_min)

    def eta_grid(self) -> Grid1D:
        return Grid1D.lower_eta(self.n_eta, self.eta_max)


@dataclass(frozen=True)
class ProblemSpec:
    """Wall data ``u(x, 1) = alpha + delta * f(x)`` with a trigonometric ``f``.

    ``f_modes`` lists ``(n, a_n, b_n)`` so that
    ``f(x) = sum a_n cos(n x) + b_n sin(n x)``.
    """

    alpha: float = 1.0
    delta: float = 0.1
    f_modes: tuple[tuple[int, float, float], ...] = ((1, 1.0, 0.0),)
    disc: Discretisation = field(default_factory=Discretisation)

    def __post_init__(self) -> None:
        modes = tuple((int(n), float(a), float(b)) for n, a, b in self.f_modes)
        object.__setattr__(self, "f_modes", modes)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if any(n < 0 for n, _, _ in modes):
            raise ValueError("mode numbers of f must be non-negative")
        if len({n for n, _, _ in modes}) != len(modes):
            raise ValueError("each mode number of f may appear only once")

    @property
    def max_mode(self) -> int:
        return max((n for n, a, b in self.f_modes if a or b), default=0)

    def f(self, x: np.ndarray | float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for n, a, b in self.f_modes:
            out = out + a * np.cos(n * x) + b * np.sin(n * x)
        return out

    def df(self, x: np.ndarray | float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for n, a, b in self.f_modes:
            out = out - a * n * np.sin(n * x) + b * n * np.cos(n * x)
        return out

    def wall(self, x: np.ndarray | float) -> np.ndarray:
        """Top-wall tangential velocity ``alpha + delta f(x)``."""
        return self.alpha + self.delta * self.f(x)

    def with_delta(self, delta: float) -> "ProblemSpec":
        return ProblemSpec(self.alpha, delta, self.f_modes, self.disc)


def make_spec(alpha: float, delta: float, f_modes: Sequence[tuple[int, float, float]], **disc) -> ProblemSpec:
    return ProblemSpec(alpha, delta, tuple(f_modes), Discretisation(**disc))
