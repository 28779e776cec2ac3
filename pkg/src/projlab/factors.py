"""Symmetric contractions of the form I - D with log-carried defect scale.

The building blocks of every product evaluated here are small compressions
whose defect D is a sum of rank-one terms with magnitudes spanning many
hundreds of orders.  Directions are stored as unit vectors; magnitudes as
natural logs.  Eigen-analysis runs on a rescaled copy so float64 keeps
full relative precision, and integer powers of any size act through
exp/log without forming the power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .logdomain import log_int


def rate_log_from_sigma_log(sigma_log: float) -> float:
    """From ln(sigma) of a defect eigenvalue to ln(-ln(1 - sigma))."""
    if sigma_log == -math.inf:
        return -math.inf
    if sigma_log < -37.0:
        return sigma_log
    sigma = math.exp(sigma_log)
    if sigma >= 1.0:
        return math.inf
    return math.log(-math.log1p(-sigma))


@dataclass(frozen=True)
class DefectFactor:
    """The contraction I - D on an r-dimensional space.

    ``axes`` holds the orthonormal eigenvectors of D as columns and
    ``sigma_logs`` the logs of the matching eigenvalues (-inf marks an
    exactly untouched direction).
    """

    axes: np.ndarray
    sigma_logs: tuple[float, ...]

    @property
    def dim(self) -> int:
        return self.axes.shape[0]

    @property
    def rate_logs(self) -> tuple[float, ...]:
        return tuple(rate_log_from_sigma_log(s) for s in self.sigma_logs)

    @classmethod
    def from_scaled_rank_ones(cls, directions: np.ndarray, mag_logs) -> "DefectFactor":
        """D = sum_j exp(mag_logs[j]) * d_j d_j^T from unit columns d_j."""
        mag_logs = list(mag_logs)
        r = directions.shape[0]
        finite = [m for m in mag_logs if m > -math.inf]
        if not finite:
            return cls(np.eye(r), tuple([-math.inf] * r))
        scale = max(finite)
        s = np.zeros((r, r))
        for j, m in enumerate(mag_logs):
            if m == -math.inf:
                continue
            w = math.exp(m - scale)
            if w == 0.0:
                continue
            d = directions[:, j]
            s += w * np.outer(d, d)
        evals, evecs = np.linalg.eigh(s)
        sigma_logs = tuple(
            -math.inf if ev <= 0.0 else math.log(ev) + scale for ev in evals
        )
        return cls(evecs, sigma_logs)

    @classmethod
    def from_dense_defect(cls, d: np.ndarray, floor: float = 0.0) -> "DefectFactor":
        """Eigen-analysis of a plainly representable defect matrix."""
        sym = 0.5 * (d + d.T)
        evals, evecs = np.linalg.eigh(sym)
        sigma_logs = tuple(
            -math.inf if ev <= floor else math.log(ev) for ev in evals
        )
        return cls(evecs, sigma_logs)

    def lambda_power(self, idx: int, n: int) -> float:
        """(1 - sigma_idx)**n via log space."""
        s = self.sigma_logs[idx]
        if s == -math.inf:
            return 1.0
        rate = rate_log_from_sigma_log(s)
        if rate == math.inf:
            return 0.0
        t_log = log_int(n) + rate
        if t_log > 6.55:
            return 0.0
        return math.exp(-math.exp(t_log))

    def apply_power(self, x: np.ndarray, n: int) -> np.ndarray:
        """(I - D)**n applied to x, exact for integer n of any size."""
        coords = self.axes.T @ x
        for i in range(len(coords)):
            coords[i] *= self.lambda_power(i, n)
        return self.axes @ coords

    def dense_shadow(self, n: int = 1) -> np.ndarray:
        """Float matrix of (I - D)**n; deep defects round away here."""
        vals = np.array([self.lambda_power(i, n) for i in range(self.dim)])
        return (self.axes * vals) @ self.axes.T
