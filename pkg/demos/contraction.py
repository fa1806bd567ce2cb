"""
Contraction of projected averaging
==================================

Each estimator round averages over neighbors and projects onto the
agent's unobservable directions. Products of these maps shrink in the
mixed matrix norm once every agent's projection has acted.
"""

import numpy as np

from hybrid_observer import contraction_coefficient, mixed_norm, random_strongly_connected
from hybrid_observer.analysis import product_length
from hybrid_observer.network import flocking_matrix

rng = np.random.default_rng(0)

# Three random projections in R^4 whose images meet only at zero.
P = []
for _ in range(3):
    basis, _ = np.linalg.qr(rng.standard_normal((4, 2)))
    P.append(basis @ basis.T)

cert = contraction_coefficient(P)
print(f"rho = {cert.rho:.4f} over {cert.sequences_checked} products of length {cert.length}")
print(f"gamma = {cert.gamma:.6f}")

# Random graph sequences never beat the bound; they usually do far better.
blockP = np.zeros((12, 12))
for k, Pk in enumerate(P):
    blockP[4 * k:4 * k + 4, 4 * k:4 * k + 4] = Pk
norms = []
for _ in range(200):
    M = blockP.copy()
    for _ in range(product_length(3)):
        g = random_strongly_connected(3, rng.uniform(), rng)
        M = blockP @ np.kron(flocking_matrix(g), np.eye(4)) @ M
    norms.append(mixed_norm(M, 4))
print(f"worst observed norm {max(norms):.4f}, median {np.median(norms):.4f}")
