"""
Building Galerkin models
========================

Matrices of the bilinear system on the Dirichlet box and the flat torus,
and what compression does to them.
"""

import numpy as np

from galerkin_bilinear import Potential, build_box_model, build_torus_model, compress

# W(x) = cos x couples neighbouring sine modes with weight 1/2
box = build_box_model(6, None, Potential.cosine())
print("box eigenvalues:", box.eigenvalues)
print("Im B (first 4x4):")
print(np.round(box.b_matrix.imag[:4, :4], 12))

# a nonzero V means the eigenbasis has to be computed numerically
bent = build_box_model(6, Potential.cosine(2.0), Potential.cosine())
print("\nwith V = 2 cos x:", np.round(bent.eigenvalues, 6), bent.provenance)

# torus modes come in +-m pairs, the spectrum is m^2 + 1
torus = build_torus_model(7, None, Potential.cosine())
print("\ntorus eigenvalues:", torus.eigenvalues)

# compression is just the leading block
small = compress(box, 3)
assert np.array_equal(small.b_matrix, box.b_matrix[:3, :3])
print("\ncompressed to", small.dim, "modes")
