"""Planar-array geometry, the propagating-wavenumber lattice and the
Fourier-harmonic sparse basis.

The transmit array is a uniform planar array (UPA) with sub-half-wavelength
element spacing. Its spatial channel admits a plane-wave expansion over a
small set of integer harmonic index pairs: only pairs inside an ellipse
determined by the aperture support propagating waves, so the expansion
dimension L is roughly pi * Lx * Ly / lambda^2, far below the antenna count.
Everything downstream (channel synthesis, measurement, estimation) indexes
into the ordered lattice built here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Array geometry outside the supported regime."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar transmit array.

    Parameters
    ----------
    n_x, n_y : int
        Antenna counts along the two array axes, each at least 2.
    delta : float
        Element spacing in meters. Must satisfy delta < lam / 2.
    lam : float
        Carrier wavelength in meters.
    """

    n_x: int
    n_y: int
    delta: float
    lam: float

    def __post_init__(self):
        if self.n_x < 2 or self.n_y < 2:
            raise GeometryError(f"need at least 2 elements per axis, got {self.n_x}x{self.n_y}")
        if self.delta <= 0 or self.lam <= 0:
            raise GeometryError("delta and lam must be positive")
        if not self.delta < self.lam / 2:
            raise GeometryError(
                f"element spacing {self.delta} not below lam/2 = {self.lam / 2}; "
                "the dense-array expansion assumes sub-half-wavelength spacing")

    @property
    def l_x_len(self) -> float:
        """Aperture extent along x in meters."""
        return (self.n_x - 1) * self.delta

    @property
    def l_y_len(self) -> float:
        """Aperture extent along y in meters."""
        return (self.n_y - 1) * self.delta

    @property
    def n(self) -> int:
        """Total antenna count."""
        return self.n_x * self.n_y


@dataclass(frozen=True)
class WavenumberLattice:
    """Ordered integer index pairs supporting propagating plane waves.

    points[p] = (l_x, l_y); ordering is lexicographic with l_y outer so
    basis columns and channel entries align deterministically across runs.
    ``neighbors`` holds, per point, the positions of its 4-neighborhood
    points that are also inside the lattice; ``edges`` lists every
    undirected neighbor pair exactly once as (low_pos, high_pos).
    """

    points: np.ndarray
    index_of: dict = field(repr=False)
    neighbors: tuple = field(repr=False)
    edges: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def count(self) -> int:
        return len(self.points)

    def position(self, l_x: int, l_y: int) -> int:
        """Position of the pair (l_x, l_y) in the ordered sequence."""
        return self.index_of[(l_x, l_y)]

    def contains(self, l_x: int, l_y: int) -> bool:
        return (l_x, l_y) in self.index_of


def _inside_ellipse(l_x: int, l_y: int, lam: float, lx_len: float, ly_len: float) -> bool:
    return (lam * l_x / lx_len) ** 2 + (lam * l_y / ly_len) ** 2 <= 1.0


def build_lattice(geometry: ArrayGeometry) -> WavenumberLattice:
    """Enumerate all propagating harmonic index pairs for ``geometry``.

    Returns the pairs ordered by (l_y, l_x), with symmetric 4-neighborhood
    lists. The count is approximately pi * Lx * Ly / lam^2.
    """
    lam = geometry.lam
    lx_len, ly_len = geometry.l_x_len, geometry.l_y_len
    if lx_len <= 0 or ly_len <= 0:
        raise GeometryError("degenerate aperture: zero extent along an axis")

    bx = int(lx_len / lam) + 1
    by = int(ly_len / lam) + 1
    pts = [
        (l_x, l_y)
        for l_y in range(-by, by + 1)
        for l_x in range(-bx, bx + 1)
        if _inside_ellipse(l_x, l_y, lam, lx_len, ly_len)
    ]

    index_of = {pt: pos for pos, pt in enumerate(pts)}
    neighbors = []
    for (l_x, l_y) in pts:
        nb = []
        for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            pos = index_of.get((l_x + dx, l_y + dy))
            if pos is not None:
                nb.append(pos)
        neighbors.append(tuple(sorted(nb)))

    edge_list = [
        (p, q) for p, nbs in enumerate(neighbors) for q in nbs if p < q
    ]
    edges = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)

    return WavenumberLattice(
        points=np.asarray(pts, dtype=np.int64),
        index_of=index_of,
        neighbors=tuple(neighbors),
        edges=edges,
    )


@dataclass(frozen=True)
class SparseBasis:
    """Unit-norm Fourier-harmonic basis, one column per lattice point.

    psi has shape (N, L); every entry has modulus 1/sqrt(N). Antenna rows
    are ordered n = n_y * N_x + n_x with the phase reference anchored at
    element (0, 0).
    """

    psi: np.ndarray

    @property
    def num_antennas(self) -> int:
        return self.psi.shape[0]

    @property
    def num_harmonics(self) -> int:
        return self.psi.shape[1]


def build_basis(geometry: ArrayGeometry, lattice: WavenumberLattice) -> SparseBasis:
    """Build the N x L harmonic basis for ``lattice`` on ``geometry``."""
    n_x, n_y = geometry.n_x, geometry.n_y
    lx_len, ly_len = geometry.l_x_len, geometry.l_y_len
    delta = geometry.delta

    ax_x = np.tile(np.arange(n_x), n_y)      # n_x index per row n = n_y*N_x + n_x
    ax_y = np.repeat(np.arange(n_y), n_x)
    l_x = lattice.points[:, 0].astype(float)
    l_y = lattice.points[:, 1].astype(float)

    phase = 2.0 * np.pi * delta * (
        np.outer(ax_x, l_x) / lx_len + np.outer(ax_y, l_y) / ly_len
    )
    psi = np.exp(1j * phase) / np.sqrt(geometry.n)
    return SparseBasis(psi=psi)


def spatial_channel(basis: SparseBasis, h_f: np.ndarray) -> np.ndarray:
    """Map a wavenumber-domain coefficient vector to the antenna domain."""
    h_f = np.asarray(h_f)
    if h_f.shape != (basis.num_harmonics,):
        raise ValueError(
            f"coefficient vector has shape {h_f.shape}, expected ({basis.num_harmonics},)")
    return basis.psi @ h_f
