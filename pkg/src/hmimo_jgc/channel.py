"""Ground-truth multi-user channel synthesis from von Mises-Fisher clusters.

Each scattering cluster concentrates angular power around a center direction
on the unit sphere. A user's angular power spectrum is a weighted mixture of
cluster densities; integrating it over the angular footprint of each
wavenumber cell gives the per-cell variance of that user's channel
coefficients. Users that share clusters end up with overlapping supports in
the wavenumber domain, which is what the joint estimator exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import ArrayGeometry, WavenumberLattice

# Cells whose normalized variance falls below this fraction of the map
# maximum are treated as exactly zero when channels are drawn, so supports
# are finite sets rather than the full lattice.
ACTIVITY_FLOOR_REL = 1e-6


class QuadratureError(RuntimeError):
    """Angular quadrature failed to capture a cluster's power."""


@dataclass(frozen=True)
class ClusterSpec:
    """One scattering cluster: a von Mises-Fisher lobe on the unit sphere.

    center_theta is the polar angle in [0, pi/2] (0 = array broadside),
    center_phi the azimuth in [0, 2*pi), concentration the VMF parameter
    (larger = tighter lobe). ``shared`` marks clusters seen by every user.
    """

    center_theta: float
    center_phi: float
    concentration: float
    shared: bool = False

    def __post_init__(self):
        if not 0.0 <= self.center_theta <= math.pi / 2:
            raise ValueError(f"center_theta {self.center_theta} outside [0, pi/2]")
        if not 0.0 <= self.center_phi < 2 * math.pi:
            raise ValueError(f"center_phi {self.center_phi} outside [0, 2*pi)")
        if self.concentration <= 0:
            raise ValueError("concentration must be positive")

    @property
    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.center_theta)
        return np.array([
            st * math.cos(self.center_phi),
            st * math.sin(self.center_phi),
            math.cos(self.center_theta),
        ])

    def to_dict(self) -> dict:
        return {
            "center_theta": self.center_theta,
            "center_phi": self.center_phi,
            "concentration": self.concentration,
            "shared": self.shared,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterSpec":
        return cls(**d)


@dataclass(frozen=True)
class ScatteringScenario:
    """Cluster list plus the per-user, per-cluster weight matrix.

    weights has shape (K, N_c); every row is non-negative and sums to 1,
    and every user puts strictly positive weight on every shared cluster.
    A weight of zero means the cluster does not contribute to that user.
    """

    clusters: tuple
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[1] != len(self.clusters):
            raise ValueError(f"weights shape {w.shape} does not match {len(self.clusters)} clusters")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        row_sums = w.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > 1e-9):
            raise ValueError(f"weight rows must sum to 1, got {row_sums}")
        for c, cluster in enumerate(self.clusters):
            if cluster.shared and np.any(w[:, c] <= 0):
                raise ValueError(f"shared cluster {c} has a zero weight for some user")

    @property
    def num_users(self) -> int:
        return self.weights.shape[0]

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    def to_dict(self) -> dict:
        return {
            "clusters": [c.to_dict() for c in self.clusters],
            "weights": np.asarray(self.weights).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScatteringScenario":
        return cls(
            clusters=tuple(ClusterSpec.from_dict(c) for c in d["clusters"]),
            weights=np.asarray(d["weights"], dtype=float),
        )


@dataclass(frozen=True)
class QuadratureGrid:
    """Deterministic midpoint tensor grid over (theta, phi) on the visible
    hemisphere, with a minimum per-cluster captured-mass requirement."""

    n_theta: int = 512
    n_phi: int = 1024
    min_capture: float = 0.99


DEFAULT_QUADRATURE = QuadratureGrid()


@dataclass(frozen=True)
class VarianceMap:
    """Per-cell channel variance for one user; entries sum to 1."""

    sigma_sq: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma_sq)
        if np.any(s < 0):
            raise ValueError("variances must be non-negative")


@dataclass(frozen=True)
class UserChannel:
    """One user's wavenumber-domain channel and its exact support."""

    h_f: np.ndarray
    support: np.ndarray
    h_spatial: np.ndarray | None = None


def vmf_density(theta, phi, cluster: ClusterSpec):
    """von Mises-Fisher density at direction(s) (theta, phi).

    Normalized so the integral over the full unit sphere is 1. Accepts
    scalars or broadcastable arrays. Evaluated in log space so large
    concentrations do not overflow.
    """
    alpha = cluster.concentration
    mu = cluster.unit_vector
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    dot = (st * np.cos(phi) * mu[0]
           + st * np.sin(phi) * mu[1]
           + np.cos(theta) * mu[2])
    # log of alpha / (4*pi*sinh(alpha)), with sinh expanded stably
    log_norm = math.log(alpha) - math.log(4 * math.pi) - (
        alpha + math.log(-math.expm1(-2 * alpha)) - math.log(2))
    return np.exp(log_norm + alpha * dot)


def _cell_lookup(lattice: WavenumberLattice):
    """Dense (l_x, l_y) -> position table over a padded bounding box.

    Integer pairs inside the lattice map to their own position. Pairs in the
    padding ring (the rim slivers of the propagating disk whose nearest
    harmonic falls just outside the ellipse) redirect to the closest lattice
    point, ties broken toward the lattice ordering, so no propagating
    direction is orphaned.
    """
    pts = lattice.points
    pad = 1
    min_x, min_y = pts[:, 0].min() - pad, pts[:, 1].min() - pad
    span_x = pts[:, 0].max() + pad - min_x + 1
    span_y = pts[:, 1].max() + pad - min_y + 1
    table = np.full((span_x, span_y), -1, dtype=np.int64)
    table[pts[:, 0] - min_x, pts[:, 1] - min_y] = np.arange(len(pts))
    for jx in range(span_x):
        for jy in range(span_y):
            if table[jx, jy] >= 0:
                continue
            dx = pts[:, 0] - (jx + min_x)
            dy = pts[:, 1] - (jy + min_y)
            table[jx, jy] = int(np.argmin(dx * dx + dy * dy))
    return table, min_x, min_y


def cluster_cell_masses(
    clusters,
    lattice: WavenumberLattice,
    geometry: ArrayGeometry,
    quadrature: QuadratureGrid = DEFAULT_QUADRATURE,
):
    """Integrate each cluster density over every wavenumber cell.

    A direction (theta, phi) on the visible hemisphere maps to transverse
    wavenumbers kx = (2*pi/lam)*sin(theta)*cos(phi), ky likewise with
    sin(phi); it is binned to its nearest harmonic, i.e. cell (l_x, l_y)
    covers [l_x - 1/2, l_x + 1/2) x [l_y - 1/2, l_y + 1/2) in units of
    2*pi/Lx and 2*pi/Ly. Rim slivers of the propagating disk whose nearest
    integer pair lies outside the lattice are folded into the closest
    lattice cell, so captured mass is lost only below the horizon or to a
    grid too coarse for the cluster.

    Returns (masses, captured): masses has shape (len(clusters), L), and
    captured[c] is the total mass of cluster c that landed on the lattice.
    """
    n_t, n_p = quadrature.n_theta, quadrature.n_phi
    d_t = (math.pi / 2) / n_t
    d_p = (2 * math.pi) / n_p
    theta = (np.arange(n_t) + 0.5) * d_t
    phi = (np.arange(n_p) + 0.5) * d_p

    st = np.sin(theta)
    u = np.outer(st, np.cos(phi)) * (geometry.l_x_len / geometry.lam)
    v = np.outer(st, np.sin(phi)) * (geometry.l_y_len / geometry.lam)
    ix = np.rint(u).astype(np.int64)
    iy = np.rint(v).astype(np.int64)

    table, min_x, min_y = _cell_lookup(lattice)
    jx = np.clip(ix - min_x, 0, table.shape[0] - 1)
    jy = np.clip(iy - min_y, 0, table.shape[1] - 1)
    cell = table[jx, jy]

    node_weight = np.outer(st, np.ones(n_p)) * (d_t * d_p)
    theta_grid = theta[:, None]
    phi_grid = phi[None, :]

    L = len(lattice)
    masses = np.empty((len(clusters), L))
    captured = np.empty(len(clusters))
    flat_cell = (cell + 1).ravel()
    for c, cluster in enumerate(clusters):
        dens = vmf_density(theta_grid, phi_grid, cluster) * node_weight
        acc = np.bincount(flat_cell, weights=dens.ravel(), minlength=L + 1)
        masses[c] = acc[1:]
        captured[c] = acc[1:].sum()
    return masses, captured


def variance_map(
    scenario: ScatteringScenario,
    user: int,
    lattice: WavenumberLattice,
    geometry: ArrayGeometry,
    quadrature: QuadratureGrid = DEFAULT_QUADRATURE,
) -> VarianceMap:
    """Per-cell channel variance for one user, normalized to unit sum."""
    return variance_maps(scenario, lattice, geometry, quadrature)[user]


def variance_maps(
    scenario: ScatteringScenario,
    lattice: WavenumberLattice,
    geometry: ArrayGeometry,
    quadrature: QuadratureGrid = DEFAULT_QUADRATURE,
):
    """Variance maps for every user, sharing one quadrature pass.

    Raises QuadratureError if any cluster's captured mass falls below
    quadrature.min_capture before normalization (grid too coarse, or the
    cluster leaks off the visible hemisphere / lattice).
    """
    masses, captured = cluster_cell_masses(
        scenario.clusters, lattice, geometry, quadrature)
    bad = np.flatnonzero(captured < quadrature.min_capture)
    if bad.size:
        detail = ", ".join(f"cluster {b}: {captured[b]:.4f}" for b in bad)
        raise QuadratureError(
            f"captured mass below {quadrature.min_capture} ({detail}); "
            "increase quadrature resolution or move clusters off the horizon")
    out = []
    for u in range(scenario.num_users):
        raw = scenario.weights[u] @ masses
        out.append(VarianceMap(sigma_sq=raw / raw.sum()))
    return out


def apply_activity_floor(sigma_sq: np.ndarray) -> np.ndarray:
    """Zero out cells below the activity floor so supports are exact."""
    s = np.asarray(sigma_sq, dtype=float).copy()
    if s.size and s.max() > 0:
        s[s < ACTIVITY_FLOOR_REL * s.max()] = 0.0
    return s


def sample_channels(scenario: ScatteringScenario, maps, rng) -> list:
    """Draw one channel per user: independent circularly-symmetric complex
    Gaussians with the (floored) map variances; floored cells are exactly 0."""
    if len(maps) != scenario.num_users:
        raise ValueError(f"{len(maps)} maps for {scenario.num_users} users")
    channels = []
    for m in maps:
        sig = apply_activity_floor(m.sigma_sq)
        L = sig.size
        draws = rng.standard_normal((2, L))
        h = (draws[0] + 1j * draws[1]) * np.sqrt(sig / 2.0)
        channels.append(UserChannel(h_f=h, support=np.flatnonzero(h != 0)))
    return channels


def common_support(channels) -> np.ndarray:
    """Intersection of the users' support sets (ground-truth diagnostic)."""
    if len(channels) < 2:
        raise ValueError("common support needs at least 2 users")
    common = channels[0].support
    for ch in channels[1:]:
        common = np.intersect1d(common, ch.support, assume_unique=True)
    return common


def draw_scenario(
    users: int,
    rng,
    n_shared: int = 2,
    n_private: int = 2,
    concentration: float = 140.0,
    theta_max: float = 0.42 * math.pi,
    weight_low: float = 0.15,
    weight_high: float = 0.45,
) -> ScatteringScenario:
    """Draw a random multi-user scenario.

    Shared clusters get one fixed position seen by all users; each user
    additionally gets ``n_private`` clusters of their own. Raw weights for a
    user's active clusters are uniform on [weight_low, weight_high] and the
    row is renormalized, so the split between shared and private power varies
    per user while positions stay fixed.

    theta_max defaults slightly inside the horizon: a cluster centered too
    close to pi/2 radiates a non-negligible share of its power below the
    visible hemisphere and would trip the capture diagnostic.
    """
    def draw_cluster(shared):
        theta = rng.uniform(0.0, theta_max)
        phi = rng.uniform(0.0, 2 * math.pi)
        return ClusterSpec(center_theta=theta, center_phi=phi,
                           concentration=concentration, shared=shared)

    clusters = [draw_cluster(True) for _ in range(n_shared)]
    private_index = {}
    for u in range(users):
        private_index[u] = list(range(len(clusters), len(clusters) + n_private))
        clusters.extend(draw_cluster(False) for _ in range(n_private))

    n_c = len(clusters)
    weights = np.zeros((users, n_c))
    for u in range(users):
        active = list(range(n_shared)) + private_index[u]
        raw = rng.uniform(weight_low, weight_high, size=len(active))
        weights[u, active] = raw / raw.sum()
    return ScatteringScenario(clusters=tuple(clusters), weights=weights)
