"""Per-clip query precomputation: enclosing/excluding hyperellipsoids and the
QuerySpec store, plus training/validation/single-source query construction."""

import itertools
import struct
from dataclasses import dataclass, field

import numpy as np

from .geometry import DEFAULT_EPS, Hyperellipsoid, contains, interpolate, mahalanobis
from .signal import dbrms

QSPEC_MAGIC = b"QSPC"
QSPEC_VERSION = 1


@dataclass(frozen=True)
class PrecomputeConfig:
    level_gate_db: float = -48.0
    delta: float = 1e-4  # single-source K = delta * I
    eps: float = DEFAULT_EPS
    max_subset_card: int = 10
    max_specs_per_clip: int = 1024
    no_nontarget_ratio: float = 4.0  # exclusion fallback when no non-targets survive

    def __post_init__(self):
        if not np.isfinite(self.level_gate_db):
            raise ValueError("level_gate_db must be finite")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.no_nontarget_ratio <= 1:
            raise ValueError("no_nontarget_ratio must exceed 1")


@dataclass(frozen=True)
class QuerySpec:
    clip_id: str
    center: np.ndarray
    axes: np.ndarray
    inclusion_radii: np.ndarray
    exclusion_radii: np.ndarray
    target_indices: frozenset
    non_target_indices: frozenset
    eliminated_indices: frozenset = frozenset()

    def __post_init__(self):
        if np.any(self.inclusion_radii > self.exclusion_radii + 1e-12):
            raise ValueError("inclusion radii exceed exclusion radii")
        if self.target_indices & self.non_target_indices:
            raise ValueError("target and non-target index sets overlap")

    @property
    def dim(self):
        return self.center.shape[0]

    def ellipsoid(self, radii) -> Hyperellipsoid:
        return Hyperellipsoid(center=self.center, axes=self.axes, radii=np.asarray(radii))

    def inclusion_ellipsoid(self):
        return self.ellipsoid(self.inclusion_radii)

    def exclusion_ellipsoid(self):
        return self.ellipsoid(self.exclusion_radii)

    def interpolated(self, t) -> Hyperellipsoid:
        return self.ellipsoid(interpolate(self.inclusion_radii, self.exclusion_radii, t))


def available_sources(stems, gate_db: float = -48.0) -> set:
    """Indices of stems at or above the level gate ("at least" is inclusive)."""
    return {i for i, stem in enumerate(stems) if dbrms(stem) >= gate_db}


def _pinv_mahalanobis_sq(diff, eigvec, eigval, eps):
    """(diff)^T Sigma^+ (diff) with eigenvalue cutoff on sqrt(eigval) >= eps."""
    u = eigvec.T @ diff
    live = np.sqrt(np.maximum(eigval, 0.0)) >= eps
    return float(np.sum(u[live] ** 2 / eigval[live]))


def enclosing_ellipsoid(Z, delta: float = 1e-4, eps: float = DEFAULT_EPS):
    """Smallest enclosing hyperellipsoid of the target embeddings.

    Singleton: K = delta * I. Otherwise c = mean, Sigma = population covariance,
    K = kappa * Sigma with kappa the largest Mahalanobis distance of a member
    so every member lands on or inside the unit boundary.

    Returns (center, axes, radii, Sigma)."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 1:
        raise ValueError("need at least one embedding")
    n, D = Z.shape
    if n == 1:
        c = Z[0].copy()
        return c, np.eye(D), np.full(D, np.sqrt(delta)), np.zeros((D, D))
    c = np.mean(Z, axis=0)
    diffs = Z - c
    sigma = diffs.T @ diffs / n
    eigval, eigvec = np.linalg.eigh(sigma)
    eigval = np.maximum(eigval, 0.0)
    kappa = max(_pinv_mahalanobis_sq(d, eigvec, eigval, eps) for d in diffs)
    lam = kappa * eigval
    order = np.argsort(lam)[::-1]
    return c, eigvec[:, order].copy(), np.sqrt(lam[order]), sigma


def excluding_radii(Z_prime, center, axes, inclusion_radii,
                    cfg: PrecomputeConfig = PrecomputeConfig()):
    """Largest excluding radii sharing the enclosing ellipsoid's center and axes.

    Sigma' is the second moment of the non-target embeddings about the target
    center (not about their own mean); K' = kappa' * Sigma' with kappa' the
    smallest non-target Mahalanobis distance. The simultaneous-diagonalization
    approximation takes lambda_perp = max(diag(P^T K' P), lambda); any
    non-target left inside that ellipsoid is reported as an edge case.

    Returns (exclusion_radii, edge_case_positions)."""
    center = np.asarray(center, dtype=np.float64)
    axes = np.asarray(axes, dtype=np.float64)
    lam = np.asarray(inclusion_radii, dtype=np.float64) ** 2
    D = center.shape[0]
    Z_prime = np.asarray(Z_prime, dtype=np.float64).reshape(-1, D)
    if Z_prime.shape[0] == 0:
        scale = cfg.no_nontarget_ratio * max(
            float(np.max(np.sqrt(lam))), np.sqrt(cfg.delta)
        )
        return np.full(D, scale), []
    diffs = Z_prime - center
    sigma_p = diffs.T @ diffs / Z_prime.shape[0]
    eigval, eigvec = np.linalg.eigh(sigma_p)
    eigval = np.maximum(eigval, 0.0)
    kappa_p = min(_pinv_mahalanobis_sq(d, eigvec, eigval, cfg.eps) for d in diffs)
    K_prime = kappa_p * sigma_p
    lam_perp = np.maximum(np.diag(axes.T @ K_prime @ axes), lam)
    r_perp = np.sqrt(lam_perp)
    exclusion = Hyperellipsoid(center=center, axes=axes, radii=r_perp)
    edge_cases = [k for k in range(Z_prime.shape[0])
                  if contains(exclusion, Z_prime[k], cfg.eps)]
    return r_perp, edge_cases


def precompute_clip(clip_id, stems, embeddings,
                    cfg: PrecomputeConfig = PrecomputeConfig()) -> list:
    """Enumerate proper nonempty target subsets of the available sources and
    emit one QuerySpec each.

    Non-targets whose embeddings fall inside the enclosing ellipsoid are
    eliminated from the mixture, as are exclusion-stage edge cases."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if len(stems) != embeddings.shape[0]:
        raise ValueError("embeddings not aligned with stems")
    avail = sorted(available_sources(stems, cfg.level_gate_db))
    specs = []
    if len(avail) < 2:
        return specs
    for card in range(1, min(len(avail) - 1, cfg.max_subset_card) + 1):
        for pi in itertools.combinations(avail, card):
            if len(specs) >= cfg.max_specs_per_clip:
                return specs
            pi = set(pi)
            Z = embeddings[sorted(pi)]
            c, P, r, _sigma = enclosing_ellipsoid(Z, cfg.delta, cfg.eps)
            enclosing = Hyperellipsoid(center=c, axes=P, radii=r)
            rest = [j for j in avail if j not in pi]
            eliminated = {j for j in rest if contains(enclosing, embeddings[j], cfg.eps)}
            survivors = [j for j in rest if j not in eliminated]
            r_perp, edge_pos = excluding_radii(
                embeddings[survivors], c, P, r, cfg
            )
            eliminated |= {survivors[k] for k in edge_pos}
            survivors = [j for j in survivors if j not in eliminated]
            specs.append(QuerySpec(
                clip_id=clip_id,
                center=c, axes=P,
                inclusion_radii=r, exclusion_radii=r_perp,
                target_indices=frozenset(pi),
                non_target_indices=frozenset(survivors),
                eliminated_indices=frozenset(eliminated),
            ))
    return specs


def sample_training_query(spec: QuerySpec, rng: np.random.Generator) -> Hyperellipsoid:
    """Radii drawn independently uniform on [r_i, r_perp_i]."""
    radii = rng.uniform(spec.inclusion_radii, spec.exclusion_radii)
    return spec.ellipsoid(radii)


def validation_query(spec: QuerySpec) -> Hyperellipsoid:
    """Deterministic midpoint radii (r + r_perp) / 2."""
    return spec.interpolated(0.5)


def single_source_query(spec: QuerySpec, alpha: float) -> Hyperellipsoid:
    """Single-target query with radii alpha * r_perp, alpha in [1e-3, 1]."""
    if len(spec.target_indices) != 1:
        raise ValueError("single_source_query requires exactly one target")
    if not (1e-3 <= alpha <= 1.0):
        raise ValueError("alpha must be in [1e-3, 1]")
    return spec.ellipsoid(alpha * spec.exclusion_radii)


ALPHA_GRID = (0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0)


# ---------------------------------------------------------------------------
# QuerySpec store: binary record file with magic header, plus text sidecar.

def _pack_index_set(indices):
    idx = sorted(indices)
    return struct.pack(f"<I{len(idx)}I", len(idx), *idx)


def save_query_specs(path, specs):
    with open(path, "wb") as f:
        f.write(QSPEC_MAGIC)
        f.write(struct.pack("<BI", QSPEC_VERSION, len(specs)))
        for s in specs:
            cid = s.clip_id.encode("utf-8")
            D = s.dim
            f.write(struct.pack("<H", len(cid)) + cid)
            f.write(struct.pack("<I", D))
            f.write(s.center.astype("<f8").tobytes())
            f.write(s.axes.astype("<f8").tobytes())  # row-major D x D
            f.write(s.inclusion_radii.astype("<f8").tobytes())
            f.write(s.exclusion_radii.astype("<f8").tobytes())
            f.write(_pack_index_set(s.target_indices))
            f.write(_pack_index_set(s.non_target_indices))
            f.write(_pack_index_set(s.eliminated_indices))
    with open(str(path) + ".txt", "w") as f:
        f.write(f"query specs: {len(specs)}\n")
        for s in specs:
            f.write(
                f"{s.clip_id} D={s.dim} targets={sorted(s.target_indices)} "
                f"non_targets={sorted(s.non_target_indices)} "
                f"eliminated={sorted(s.eliminated_indices)}\n"
            )


def load_query_specs(path) -> list:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != QSPEC_MAGIC:
        raise ValueError(f"{path}: not a query-spec file")
    version, count = struct.unpack_from("<BI", data, 4)
    if version != QSPEC_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    off = 9
    specs = []

    def take(fmt):
        nonlocal off
        vals = struct.unpack_from(fmt, data, off)
        off += struct.calcsize(fmt)
        return vals

    def take_array(n):
        nonlocal off
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=off).copy()
        off += 8 * n
        return arr

    def take_set():
        (n,) = take("<I")
        return frozenset(take(f"<{n}I")) if n else frozenset()

    for _ in range(count):
        (clen,) = take("<H")
        cid = data[off:off + clen].decode("utf-8")
        off += clen
        (D,) = take("<I")
        center = take_array(D)
        axes = take_array(D * D).reshape(D, D)
        r = take_array(D)
        r_perp = take_array(D)
        specs.append(QuerySpec(
            clip_id=cid, center=center, axes=axes,
            inclusion_radii=r, exclusion_radii=r_perp,
            target_indices=take_set(),
            non_target_indices=take_set(),
            eliminated_indices=take_set(),
        ))
    return specs
