"""Wasserstein distances: Gaussian closed form and exact empirical assignment."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .stochastic import CovarianceMatrix, Ensemble, PSDError, StateSample


class ProductCost(enum.Enum):
    """Ground cost: ``shell_only`` is ``||x - y||``; ``extended`` adds ``|x_0 - y_0|``."""

    SHELL_ONLY = "shell_only"
    EXTENDED = "extended"


@dataclass(frozen=True)
class SampleCloud:
    """Equal-weight point cloud; rows of ``points`` are shell states."""

    points: np.ndarray
    ou: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a cloud needs a nonempty (n, d) array of points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("cloud entries must be finite")
        object.__setattr__(self, "points", pts)
        if self.ou is not None:
            ou = np.array(self.ou, dtype=float).ravel()
            if ou.shape != (pts.shape[0],) or not np.all(np.isfinite(ou)):
                raise ValueError("OU coordinates must be finite, one per point")
            object.__setattr__(self, "ou", ou)

    @classmethod
    def from_samples(cls, samples: list[StateSample]) -> "SampleCloud":
        if not samples:
            raise ValueError("empty sample list")
        with_ou = samples[0].ou_coordinate is not None
        if any((s.ou_coordinate is not None) != with_ou for s in samples):
            raise ValueError("mixed samples with and without OU coordinates")
        ou = [s.ou_coordinate for s in samples] if with_ou else None
        return cls(np.stack([np.asarray(s.shell, dtype=float) for s in samples]), ou)

    @classmethod
    def from_ensemble(cls, ens: Ensemble, modes: int | None = None) -> "SampleCloud":
        pts = ens.shell if modes is None else ens.shell[:, :modes]
        return cls(pts, ens.ou)

    @property
    def with_ou_coordinate(self) -> bool:
        return self.ou is not None

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def shifted(self, u, u0: float = 0.0) -> "SampleCloud":
        u = np.asarray(u, dtype=float)
        ou = None if self.ou is None else self.ou + u0
        return SampleCloud(self.points + u, ou)

    def leading(self, k: int) -> "SampleCloud":
        return SampleCloud(self.points[:, :k], self.ou)

    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)


def _check_pair(A: SampleCloud, B: SampleCloud, cost: ProductCost):
    if A.dim != B.dim:
        raise ValueError(f"cloud dimensions differ ({A.dim} vs {B.dim})")
    if cost is ProductCost.EXTENDED and not (A.with_ou_coordinate and B.with_ou_coordinate):
        raise ValueError("extended cost needs OU coordinates on both clouds")


def cost_matrix(A: SampleCloud, B: SampleCloud, cost: ProductCost = ProductCost.SHELL_ONLY) -> np.ndarray:
    """Pairwise ground distances, shape ``(|A|, |B|)``."""
    _check_pair(A, B, cost)
    c = cdist(A.points, B.points)
    if cost is ProductCost.EXTENDED:
        c += np.abs(A.ou[:, None] - B.ou[None, :])
    return c


class Assignment(NamedTuple):
    value: float
    permutation: np.ndarray


def optimal_assignment(A: SampleCloud, B: SampleCloud, p: float = 1.0,
                       cost: ProductCost = ProductCost.SHELL_ONLY) -> Assignment:
    """Exact ``W_p`` between equal-size empirical measures and its optimal matching."""
    if A.size != B.size:
        raise ValueError(f"clouds must have equal size ({A.size} vs {B.size})")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    c = cost_matrix(A, B, cost) ** p
    rows, cols = linear_sum_assignment(c)
    value = math.fsum(c[rows, cols]) / A.size
    return Assignment(value ** (1.0 / p), cols)


def empirical_wp(A: SampleCloud, B: SampleCloud, p: float = 1.0,
                 cost: ProductCost = ProductCost.SHELL_ONLY) -> float:
    return optimal_assignment(A, B, p, cost).value


def pairing_cost(A: SampleCloud, B: SampleCloud, permutation, p: float = 1.0,
                 cost: ProductCost = ProductCost.SHELL_ONLY) -> float:
    """``W_p``-type cost of a given matching ``i -> permutation[i]``."""
    _check_pair(A, B, cost)
    perm = np.asarray(permutation)
    d = np.linalg.norm(A.points - B.points[perm], axis=1)
    if cost is ProductCost.EXTENDED:
        d = d + np.abs(A.ou - B.ou[perm])
    return math.fsum(d ** p / A.size) ** (1.0 / p)


def mean_gap_lower_bound(A: SampleCloud, B: SampleCloud,
                         cost: ProductCost = ProductCost.SHELL_ONLY) -> float:
    """Cost-norm of the mean difference; a lower bound for every ``W_p``, ``p >= 1``."""
    _check_pair(A, B, cost)
    gap = float(np.linalg.norm(A.mean() - B.mean()))
    if cost is ProductCost.EXTENDED:
        gap += abs(float(A.ou.mean() - B.ou.mean()))
    return gap


def shift_linearity_defect(u, A: SampleCloud, p: float = 1.0) -> float:
    """``|W_p(A + u, A) - ||u|||``; zero up to rounding for any cloud."""
    u = np.asarray(u, dtype=float)
    return abs(empirical_wp(A.shifted(u), A, p) - float(np.linalg.norm(u)))


def _as_matrix(S):
    return S.entries if isinstance(S, CovarianceMatrix) else np.asarray(S, dtype=float)


def _psd_root(S):
    w, v = np.linalg.eigh(S)
    scale = max(1.0, float(np.trace(S)))
    if w.size and w.min() < -1e-10 * scale:
        raise PSDError(f"eigenvalue {w.min():.3e} below floor")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def bures_squared(S1, S2) -> float:
    """``tr S1 + tr S2 - 2 tr (S1^1/2 S2 S1^1/2)^1/2``, clipped at 0."""
    S1, S2 = _as_matrix(S1), _as_matrix(S2)
    if S1.shape != S2.shape:
        raise ValueError("covariance dimensions differ")
    # tr (S1^1/2 S2 S1^1/2)^1/2 is the nuclear norm of S1^1/2 S2^1/2; singular
    # values avoid squaring small eigenvalues before taking roots
    cross = math.fsum(np.linalg.svd(_psd_root(S1) @ _psd_root(S2), compute_uv=False))
    return max(0.0, float(np.trace(S1) + np.trace(S2) - 2.0 * cross))


def gaussian_w2(m1, S1, m2, S2) -> float:
    """Exact ``W_2`` between ``N(m1, S1)`` and ``N(m2, S2)``."""
    m1, m2 = np.asarray(m1, dtype=float), np.asarray(m2, dtype=float)
    if m1.shape != m2.shape or m1.shape[0] != _as_matrix(S1).shape[0]:
        raise ValueError("mean and covariance dimensions differ")
    gap = float(np.sum((m1 - m2) ** 2))
    return math.sqrt(gap + bures_squared(S1, S2))
