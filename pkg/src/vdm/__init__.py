"""Variational divergence minimization for one-dimensional generative models.

The package bundles the f-divergence family with Fenchel conjugates and
output activations, a quadrature oracle for divergences between Gaussian
mixtures, a small reverse-mode autodiff for scalar MLPs, a saddle-point
trainer, and numerical checks of the single-step gradient method's rate.
"""

from .densities import (PAPER_GMM, MixtureDensity, QuadratureConfig, best_fit, exact_divergence,
                        gaussian, load_mixture, sample)
from .divergences import (NAMES, ConjugateDomainError, DivergenceSpec, all_specs, eval_activation,
                          eval_conjugate, eval_fused_second_term, eval_generator, eval_witness,
                          make_spec)
from .saddle import QuadraticSaddle, certify, random_saddle, smoothness_constant, verify_rate
from .trainer import TrainConfig, TrainingDiverged, VdmTrainer, cross_matrix, refit_variational, train

__version__ = "0.1.0"
