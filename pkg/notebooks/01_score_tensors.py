"""
Score tensors of known densities
================================

Closed-form score tensors for a standard Gaussian, a two-component mixture
and the symmetric exponential law, and the contractions the loss uses.
"""

import numpy as np

from score_landscape.analytic_scores import Gaussian, GaussianMixture, gaussian_t1, score
from score_landscape.tensor import contract, frobenius_norm, is_symmetric

x = np.array([0.3, -1.2])

# Order two for N(0, I) is x x^T - I.
print(score(Gaussian(2), 2, x))

# Order four is a symmetric 2x2x2x2 array.
S4 = score(Gaussian(2), 4, x)
print("symmetric:", is_symmetric(S4), " Frobenius norm:", round(frobenius_norm(S4), 4))

# t1(x, u, v) is the (u, u, v, v) contraction; the closed form skips the tensor.
u, v = np.array([1.0, 0.0]), np.array([0.6, 0.8])
print(contract(S4, [u, u, v, v]), gaussian_t1(x, u, v))

# Far from the hyperplane x1 + x2 = 0 the mixture score is the nearer component's.
mix = GaussianMixture.symmetric(2)
far = np.array([6.0, 6.0])
print(np.allclose(score(mix, 2, far), score(Gaussian(2), 2, far - 1.0), atol=1e-8))
