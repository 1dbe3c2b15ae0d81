"""
The designed loss and its gradient
==================================

Build the loss on a small teacher dataset, check the gradient by central
differences, and compare the empirical loss with its population tensor form
for a quartic teacher.
"""

import numpy as np

from score_landscape.analytic_scores import Gaussian, GaussianMixture
from score_landscape.harness import gradient_rel_error
from score_landscape.landscape_loss import (AnalyticScores, GaussianAssumed, LossConfig, grad_L, loss_L,
                                            loss_tensor_form, param_error, sample_terms)
from score_landscape.teacher import TeacherNet, TeacherStats, make_dataset

rng = np.random.default_rng(1)
dist = GaussianMixture.symmetric(3)
teacher = TeacherNet(rng.standard_normal(3), rng.standard_normal((3, 3)), "softplus", noise_std=0.1)
data = make_dataset(teacher, dist, 64, seed=2)
cfg = LossConfig(mu=30.0, lam=2000.0, score_provider=AnalyticScores(dist))

A = rng.standard_normal((3, 3))
f = lambda B: loss_L(B, data, cfg.score_provider, cfg)
fd = np.zeros_like(A)
for idx in np.ndindex(A.shape):
    E = np.zeros_like(A)
    E[idx] = 1e-5
    fd[idx] = (f(A + E) - f(A - E)) / 2e-5
print("gradient relative error:", gradient_rel_error(grad_L(A, data, cfg.score_provider, cfg), fd))

# quartic teacher: kappa = 24 w, no Monte Carlo needed for the weights
quartic = TeacherNet.identity(3, "quartic")
big = make_dataset(quartic, Gaussian(3), 100_000, seed=3)
qcfg = LossConfig(mu=2.0, lam=1.0, score_provider=GaussianAssumed())
kappa = TeacherStats(24.0 * quartic.w_star, np.zeros(3))
B = rng.standard_normal((3, 3)) / np.sqrt(3)
terms = sample_terms(B, big, GaussianAssumed(), qcfg)
reg = qcfg.lam * np.sum((np.sum(B * B, axis=1) - 1) ** 2)
print("empirical:", terms.mean() + reg, "+/-", terms.std() / np.sqrt(big.n))
print("tensor form:", loss_tensor_form(B, quartic, kappa, qcfg))

print("error of a rotated guess:", round(param_error(np.array([[0.8, 0.6], [-0.6, 0.8]]), np.eye(2)), 3))
