"""Signal reconstruction with a rank-1 model in delay-embedded space.

The reconstruction is ``x = H^dagger(sigma a b^T)``: the anti-diagonal
average of a rank-1 matrix, equivalently a scaled valid convolution of two
smooth unit-norm factors. Missing or clipped samples are filled in by
alternating least squares with Monte-Carlo restarts.
"""
from .baselines import (GaborDictionary, SparseCode, gabor_dictionary, omp_reconstruct,
                        qv_reconstruct, spline_reconstruct)
from .corruption import CorruptionSpec, add_noise, clip, random_missing
from .embedding import (EmbeddedMatrix, EmbeddingGeometry, adjoint_wrt_a, adjoint_wrt_b,
                        delay_embed, inverse_delay_embed, inverse_embed_rank1)
from .exceptions import (CGConvergenceWarning, DegenerateModelError, DimensionError,
                         ParameterError, Rank1ReconError, SolverError)
from .model import (DifferenceOperator, Hyperparams, ObservationMask, Rank1Model, objective,
                    reconstruct, scale_hyperparameters)
from .signals import SignalSpec, generate, mse, snr_db, soft_smoothness_gap
from .solver import (SolverConfig, SolverReport, als_solve, monte_carlo_solve, update_a,
                     update_b, update_sigma)

__version__ = "0.1.0"
