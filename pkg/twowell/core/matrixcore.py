"""
TwoWell Core - Matrix Kernels
Exact 2x2 distances to rotation orbits, polar factors and well normal forms
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from .base import DegenerateError, DomainError

# Mat2 / Vec2 are plain float arrays of shape (2, 2) and (2,); every distance
# kernel also accepts stacks of shape (..., 2, 2).
Mat2 = np.ndarray
Vec2 = np.ndarray

IDENTITY = np.eye(2)
E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])

ALGEBRAIC_TOL = 1e-12
ORBIT_TOL = 1e-12


def rotation(theta) -> Mat2:
    """Rotation matrix R(theta); broadcasts over array-valued theta"""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def frobenius_norm(A) -> np.ndarray:
    """sqrt(tr(A^T A)) over the last two axes"""
    A = np.asarray(A, dtype=float)
    return np.sqrt(np.sum(A * A, axis=(-2, -1)))


def det2(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]


def operator_norm(A) -> np.ndarray:
    """Largest singular value over the last two axes"""
    return np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)[..., 0]


def _rotation_angle(B) -> np.ndarray:
    # argmax_theta tr(R(theta)^T B)
    return np.arctan2(B[..., 1, 0] - B[..., 0, 1], B[..., 0, 0] + B[..., 1, 1])


def nearest_rotation(A) -> Mat2:
    """Closest rotation to A in Frobenius norm (R(0) on the measure-zero tie set)"""
    A = np.asarray(A, dtype=float)
    return rotation(_rotation_angle(A))


def dist_so2(A):
    """
    Frobenius distance from A to SO(2).

    Measured as |A - R*| with R* the closed-form nearest rotation; the
    expanded form |A|^2 + 2 - 2 sqrt(|A|^2 + 2 det A) cancels near SO(2).
    """
    A = np.asarray(A, dtype=float)
    return frobenius_norm(A - nearest_rotation(A))


def _check_invertible(W, name: str = "W") -> np.ndarray:
    W = np.asarray(W, dtype=float)
    scale = max(float(np.max(frobenius_norm(W))), 1.0)
    if np.any(np.abs(det2(W)) <= ALGEBRAIC_TOL * scale * scale):
        raise DomainError(f"{name} is singular")
    return W


def dist_well(A, W):
    """
    Frobenius distance from A to the orbit SO(2)W.

    With B = A W^T the optimal rotation maximizes tr(R^T B); the distance is
    taken by subtracting that projection, which stays accurate on the orbit.
    """
    A = np.asarray(A, dtype=float)
    W = _check_invertible(W)
    return frobenius_norm(A - well_projection(A, W))


def dist_right_well(A, W):
    """Frobenius distance from A to the right orbit W SO(2)"""
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    return dist_well(np.swapaxes(A, -1, -2), np.swapaxes(W, -1, -2))


def well_projection(A, W) -> Mat2:
    """Nearest point of SO(2)W to A"""
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    B = A @ np.swapaxes(W, -1, -2)
    return rotation(_rotation_angle(B)) @ W


def polar_decompose(A) -> Tuple[Mat2, Mat2]:
    """
    Split A = R U with R in SO(2) and U symmetric positive-definite.

    Raises DomainError for det A <= 0.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise DomainError(f"expected a 2x2 matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    if det2(A) <= 0.0:
        raise DomainError(f"polar factor needs det A > 0 (det = {det2(A):.6g})")

    R, U = linalg.polar(A, side='right')
    U = 0.5 * (U + U.T)
    return R, U


def symmetrize_well(F) -> Mat2:
    """Symmetric polar factor U of F; SO(2)F and SO(2)U are the same orbit"""
    _, U = polar_decompose(F)
    return U


def _check_spd_unimodular(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.shape != (2, 2):
        raise DomainError(f"expected a 2x2 matrix, got shape {F.shape}")
    if np.max(np.abs(F - F.T)) > 1e-10:
        raise DomainError("well matrix is not symmetric; symmetrize it first")
    if np.min(np.linalg.eigvalsh(F)) <= 0.0:
        raise DomainError("well matrix is not positive-definite")
    if abs(det2(F) - 1.0) > 1e-9:
        raise DomainError(f"well matrix must have det 1 (det = {det2(F):.12g})")
    if np.max(np.abs(F - IDENTITY)) < ALGEBRAIC_TOL:
        raise DegenerateError("F = Id has no rank-one connection to SO(2)")
    return F


def _rank_one_factor(D: np.ndarray) -> Tuple[Vec2, Vec2]:
    # D = a (x) b with b normalized to 1 in the dominant column
    j = int(np.argmax(np.linalg.norm(D, axis=0)))
    i = int(np.argmax(np.abs(D[:, j])))
    a = D[:, j].copy()
    b = D[i, :] / D[i, j]
    return a, b


def _rank_one_branch(F: np.ndarray, phi: float) -> Tuple[Mat2, Vec2, Vec2]:
    R = rotation(phi)
    a, b = _rank_one_factor(F - R)
    return R, a, b


def rank_one_decompose(F) -> Tuple[Mat2, Vec2, Vec2]:
    """
    Write F = R + a (x) b with R in SO(2).

    For symmetric F with det F = 1, det(F - R(phi)) = 2 - cos(phi) tr F, so
    cos(phi) = 2 / tr F; the branch phi >= 0 is returned.
    """
    F = _check_spd_unimodular(F)
    phi = float(np.arccos(np.clip(2.0 / np.trace(F), -1.0, 1.0)))
    return _rank_one_branch(F, phi)


def _cross(c: Vec2, b: Vec2) -> float:
    return float(c[0] * b[1] - c[1] * b[0])


def _align_to_e2(b: Vec2) -> Mat2:
    # rotation S with S b parallel to +e2
    return rotation(np.pi / 2.0 - np.arctan2(b[1], b[0]))


def shear_normal_form(F) -> Tuple[Vec2, Mat2, Mat2]:
    """
    Reduce F to F' = S R^T F S^T = Id + nu (x) e2 with nu = (nu1, 0), nu1 >= 0.

    SO(2)F' = SO(2)F S^T, so dist_well(B, F) == dist_well(B S^T, F').
    """
    F = _check_spd_unimodular(F)
    phi = float(np.arccos(np.clip(2.0 / np.trace(F), -1.0, 1.0)))

    for branch in (phi, -phi):
        R, a, b = _rank_one_branch(F, branch)
        c = R.T @ a
        nu1 = _cross(c, b)
        if nu1 >= 0.0:
            S = _align_to_e2(b)
            return np.array([nu1, 0.0]), S, R

    raise DomainError("no rank-one branch yields a non-negative shear")


def inverse_distance_ratio(U, A) -> float:
    """
    dist(U^-1, A^-1 SO(2)) / dist(U, SO(2)A).

    The inverse of the orbit SO(2)A is A^-1 SO(2); both distances below
    ORBIT_TOL give 0, a vanishing denominator alone gives inf.
    """
    U = _check_invertible(U, "U")
    A = np.asarray(A, dtype=float)
    if np.max(np.abs(A - A.T)) > 1e-10 or np.min(np.linalg.eigvalsh(A)) <= 0.0:
        raise DomainError("A must be symmetric positive-definite")

    numerator = float(dist_right_well(np.linalg.inv(U), np.linalg.inv(A)))
    denominator = float(dist_well(U, A))
    if numerator < ORBIT_TOL and denominator < ORBIT_TOL:
        return 0.0
    if denominator < ORBIT_TOL:
        return float('inf')
    return numerator / denominator


@dataclass
class WellPair:
    """The two wells SO(2) and SO(2)F; F has det 1"""
    F: Mat2
    lam: Optional[float] = None
    Finv: Mat2 = field(init=False, repr=False)

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=float)
        if self.F.shape != (2, 2) or not np.all(np.isfinite(self.F)):
            raise DomainError("well matrix must be a finite 2x2 array")
        if abs(det2(self.F) - 1.0) > ALGEBRAIC_TOL * 100:
            raise DomainError(f"well matrix must have det 1 (det = {det2(self.F):.15g})")
        self.Finv = np.linalg.inv(self.F)

    @classmethod
    def from_lambda(cls, lam: float) -> "WellPair":
        """Diagonal well diag(lam, 1/lam)"""
        if not lam > 0.0 or lam == 1.0:
            raise DomainError(f"lambda must be positive and != 1, got {lam}")
        return cls(np.diag([lam, 1.0 / lam]), lam=float(lam))

    @classmethod
    def from_shear(cls, nu1: float) -> "WellPair":
        """Shear well Id + (nu1, 0) (x) e2"""
        if not np.isfinite(nu1):
            raise DomainError("nu1 must be finite")
        return cls(IDENTITY + np.outer([nu1, 0.0], E2))

    @classmethod
    def from_matrix(cls, F) -> "WellPair":
        return cls(np.asarray(F, dtype=float))

    @property
    def nu1(self) -> Optional[float]:
        """Shear amplitude when F is already Id + nu (x) e2"""
        if self.is_shear_form():
            return float(self.F[0, 1])
        return None

    def is_shear_form(self) -> bool:
        return bool(
            abs(self.F[0, 0] - 1.0) < ALGEBRAIC_TOL
            and abs(self.F[1, 1] - 1.0) < ALGEBRAIC_TOL
            and abs(self.F[1, 0]) < ALGEBRAIC_TOL
            and self.F[0, 1] >= 0.0
        )

    def normal_form(self) -> "WellPair":
        """Equivalent well Id + nu (x) e2 (same singular values)"""
        if self.is_shear_form():
            return self
        nu, _, _ = shear_normal_form(symmetrize_well(self.F))
        return WellPair.from_shear(float(nu[0]))

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.F, compute_uv=False)
