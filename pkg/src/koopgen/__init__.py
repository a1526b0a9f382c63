"""Learning Koopman generators from finite-horizon trajectory data.

The generator ``L`` of a flow is approximated without a matrix logarithm by the
truncated resolvent ``lambda^2 T_tau - lambda I``, where ``T_tau`` integrates the
Koopman semigroup against ``exp(-lambda t)`` over ``[0, tau]``. The learned
matrix is then used to read off the vector field and to fit polynomial
Lyapunov functions.
"""
from .datagen import GenConfig, SamplePlan, TrainingSet, generate, label_row
from .dictionary import (Dictionary, Observable, WeightVector, dictionary_from_spec,
                         evaluate, evaluate_many, monomial, monomials_1d, monomials_2d,
                         polynomial, reconstruct)
from .dynamics import Flow, VectorField, field_from_spec, flow_many, flow_to, linear_1d, vanderpol
from .edmd import (GeneratorMatrix, KoopmanMatrix, eigen, fit_generator, fit_koopman,
                   log_baseline)

__version__ = "0.1.0"

__all__ = [
    "Dictionary", "Observable", "WeightVector", "dictionary_from_spec", "evaluate",
    "evaluate_many", "monomial", "monomials_1d", "monomials_2d", "polynomial", "reconstruct",
    "Flow", "VectorField", "field_from_spec", "flow_many", "flow_to", "linear_1d", "vanderpol",
    "GenConfig", "SamplePlan", "TrainingSet", "generate", "label_row",
    "GeneratorMatrix", "KoopmanMatrix", "eigen", "fit_generator", "fit_koopman", "log_baseline",
    "__version__",
]
