"""Hyperellipsoid query algebra: membership, Mahalanobis distance, encoding."""

from dataclasses import dataclass

import numpy as np

DEFAULT_EPS = 1e-6
ORTHO_TOL = 1e-8
CONTAINS_TOL = 1e-9


@dataclass(frozen=True)
class Hyperellipsoid:
    """Region {z : (z-c)^T K^+ (z-c) <= 1} with K = P diag(r)^2 P^T.

    Columns of `axes` are the principal directions; `radii` are the
    semi-axis lengths (zero allowed: degenerate axis)."""

    center: np.ndarray
    axes: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        P = np.asarray(self.axes, dtype=np.float64)
        r = np.asarray(self.radii, dtype=np.float64)
        D = c.shape[0]
        if P.shape != (D, D) or r.shape != (D,):
            raise ValueError("inconsistent dimensions for center/axes/radii")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(P)) and np.all(np.isfinite(r))):
            raise ValueError("non-finite ellipsoid parameters")
        if np.any(r < 0):
            raise ValueError("radii must be >= 0")
        if np.max(np.abs(P.T @ P - np.eye(D))) > ORTHO_TOL:
            raise ValueError("axes must be orthonormal")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "axes", P)
        object.__setattr__(self, "radii", r)

    @property
    def dim(self):
        return self.center.shape[0]

    def shape_matrix(self):
        """K = P diag(r)^2 P^T."""
        return self.axes @ np.diag(self.radii**2) @ self.axes.T


def mahalanobis(z, e: Hyperellipsoid, eps: float = DEFAULT_EPS) -> float:
    """(z-c)^T K^+ (z-c) with axes shorter than eps contributing nothing."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    z = np.asarray(z, dtype=np.float64)
    if z.shape != e.center.shape:
        raise ValueError("dimension mismatch")
    u = e.axes.T @ (z - e.center)
    live = e.radii >= eps
    return float(np.sum((u[live] / e.radii[live]) ** 2))


def contains(e: Hyperellipsoid, z, eps: float = DEFAULT_EPS) -> bool:
    """Closed-region membership: Mahalanobis distance <= 1.

    The slack keeps points that define the boundary (distance exactly 1 in
    exact arithmetic) inside under floating-point evaluation."""
    return mahalanobis(z, e, eps) <= 1.0 + CONTAINS_TOL


def query_vector_length(dim: int) -> int:
    return dim * (dim + 3) // 2


def to_query_vector(e: Hyperellipsoid) -> np.ndarray:
    """[c ; tril(K)] with the lower triangle in row-major order, diagonal included."""
    K = e.shape_matrix()
    i, j = np.tril_indices(e.dim)
    return np.concatenate([e.center, K[i, j]])


def from_query_vector(q, dim: int) -> tuple:
    """Rebuild (c, K) from the encoding; inverse of to_query_vector."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (query_vector_length(dim),):
        raise ValueError("bad query vector length")
    c = q[:dim]
    K = np.zeros((dim, dim))
    i, j = np.tril_indices(dim)
    K[i, j] = q[dim:]
    K[j, i] = K[i, j]
    return c, K


def interpolate(r, r_perp, t: float):
    """Radii r + t*(r_perp - r); t=0.5 is the validation rule."""
    r = np.asarray(r, dtype=np.float64)
    r_perp = np.asarray(r_perp, dtype=np.float64)
    if np.any(r > r_perp):
        raise ValueError("inclusion radii exceed exclusion radii on some axis")
    return r + t * (r_perp - r)


def rotate(e: Hyperellipsoid, R, b) -> Hyperellipsoid:
    """Image of the ellipsoid under z -> R z + b, R orthonormal."""
    R = np.asarray(R, dtype=np.float64)
    return Hyperellipsoid(center=R @ e.center + np.asarray(b), axes=R @ e.axes, radii=e.radii)
