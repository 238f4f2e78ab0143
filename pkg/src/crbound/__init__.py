"""Fisher-Rao geometry and the Cramer-Rao variance bound, computed and checked numerically."""

__version__ = "0.1.0"

from .errors import (CRBoundError, DomainError, ExpectationError, FamilyError, ScoreError,
                     SingularInformation)
from .estimation import (BoundReport, Estimator, MCSummary, ProofChain, bias, dtheta_via_estimator,
                         mc_verify, proof_chain_check, variance, verify_bound)
from .expectation import EXACT, ExpectationMethod, expect, expect_pair
from .geometry import (Chart, FisherMatrix, GradientVector, ParameterFunction, affine_chart, crb,
                       fisher_matrix, gradient, identity_chart, log_chart, log_odds_chart,
                       metric_pair, pullback, reparameterize)
from .model_space import (ParametricFamily, SampleSpace, make_bernoulli, make_categorical,
                          make_gaussian, make_poisson, make_product, make_tabulated)
from .score import (FDScheme, TangentVector, check_reference_measure_invariance, log_likelihood,
                    score_directional, score_mean)
