"""Build the propagating-wavenumber lattice and the harmonic basis.

A dense planar array admits a plane-wave expansion over integer harmonic
index pairs; only pairs inside an aperture-dependent ellipse correspond to
propagating waves. This script shows how small that set is compared to the
antenna count, and checks the basic basis properties.
"""

import numpy as np

from hmimo_jgc import ArrayGeometry, build_basis, build_lattice, spatial_channel

for n in (9, 17, 33, 65):
    geometry = ArrayGeometry(n_x=n, n_y=n, delta=0.25, lam=1.0)
    lattice = build_lattice(geometry)
    ratio = len(lattice) / geometry.n
    print(f"{n:3d} x {n:<3d} antennas ({geometry.n:5d} elements, "
          f"{geometry.l_x_len:4.0f} wavelengths aperture) -> "
          f"L = {len(lattice):4d} cells  ({100 * ratio:.0f}% of N, "
          f"continuum estimate {np.pi * (geometry.l_x_len / geometry.lam) ** 2:7.1f})")

print("\nLattice mask for the 17 x 17 array (o = propagating index pair):")
geometry = ArrayGeometry(n_x=17, n_y=17, delta=0.25, lam=1.0)
lattice = build_lattice(geometry)
lx = lattice.points[:, 0]
ly = lattice.points[:, 1]
for y in range(ly.max(), ly.min() - 1, -1):
    row = "".join(
        " o" if lattice.contains(x, y) else "  "
        for x in range(lx.min(), lx.max() + 1)
    )
    print(f"  {y:+d} |{row}")

basis = build_basis(geometry, lattice)
norms = np.linalg.norm(basis.psi, axis=0)
print(f"\nBasis: shape {basis.psi.shape}, column norms within "
      f"{np.max(np.abs(norms - 1)):.1e} of 1")

gram = np.abs(basis.psi.conj().T @ basis.psi)
np.fill_diagonal(gram, 0.0)
print(f"Largest off-diagonal Gram magnitude (columns are not orthogonal): "
      f"{gram.max():.3f}")

rng = np.random.default_rng(0)
h_f = rng.standard_normal(len(lattice)) + 1j * rng.standard_normal(len(lattice))
h = spatial_channel(basis, h_f)
print(f"A random {len(lattice)}-coefficient wavenumber vector expands to an "
      f"{h.size}-element spatial channel (norm {np.linalg.norm(h):.3f}).")
