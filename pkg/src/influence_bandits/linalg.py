"""Ridge design matrices with an incrementally maintained inverse."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DIM = 128
# recompute the inverse from scratch this often to bound drift
REFRESH_EVERY = 512


class ConfigError(ValueError):
    """Raised for invalid configuration values."""


@dataclass
class DesignMatrix:
    dim: int
    gram: np.ndarray
    inv: np.ndarray
    reg: float
    n_updates: int = field(default=0)

    @classmethod
    def new(cls, d: int, reg: float = 1.0) -> "DesignMatrix":
        """``reg * I_d`` together with its inverse."""
        if d < 1 or d > MAX_DIM:
            raise ConfigError(f"dimension must be in [1, {MAX_DIM}], got {d}")
        if not reg > 0:
            raise ConfigError(f"ridge penalty must be positive, got {reg}")
        eye = np.eye(d)
        return cls(dim=d, gram=reg * eye, inv=eye / reg, reg=float(reg))

    def _check(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim,):
            raise ValueError(f"expected vector of shape ({self.dim},), got {y.shape}")
        return y

    def update(self, y) -> "DesignMatrix":
        """Add ``y y^T`` in place (Sherman-Morrison on the inverse)."""
        y = self._check(y)
        if not np.any(y):
            return self
        self.gram += np.outer(y, y)
        self.n_updates += 1
        if self.n_updates % REFRESH_EVERY == 0:
            self.refresh()
            return self
        iy = self.inv @ y
        self.inv -= np.outer(iy, iy) / (1.0 + y @ iy)
        # keep exact symmetry
        self.inv = 0.5 * (self.inv + self.inv.T)
        return self

    def refresh(self) -> None:
        self.inv = np.linalg.solve(self.gram, np.eye(self.dim))
        self.inv = 0.5 * (self.inv + self.inv.T)

    def quad_norm(self, y) -> float:
        """``sqrt(y^T V^-1 y)``."""
        y = self._check(y)
        return float(np.sqrt(max(y @ self.inv @ y, 0.0)))

    def solve(self, rhs) -> np.ndarray:
        return self.inv @ self._check(rhs)

    def identity_error(self) -> float:
        return float(np.max(np.abs(self.gram @ self.inv - np.eye(self.dim))))

    def copy(self) -> "DesignMatrix":
        return DesignMatrix(self.dim, self.gram.copy(), self.inv.copy(), self.reg, self.n_updates)


def design_new(d: int, reg: float) -> DesignMatrix:
    return DesignMatrix.new(d, reg)


def design_update(m: DesignMatrix, y) -> DesignMatrix:
    return m.update(y)


def quad_norm(m: DesignMatrix, y) -> float:
    return m.quad_norm(y)


def solve(m: DesignMatrix, rhs) -> np.ndarray:
    return m.solve(rhs)
