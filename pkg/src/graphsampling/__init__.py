"""Random sampling and reconstruction of bandlimited graph signals."""

from .decode import (
    ErrorDecomposition,
    RegularizerSpec,
    decompose_error,
    efficient_decode,
    standard_decode,
)
from .estimate import EstimationConfig, estimate_lambda_k, estimate_optimal_distribution
from .filters import PolynomialFilter, apply_filter, fit_lowpass
from .graph import Graph, Laplacian, build_laplacian, load_graph, save_graph
from .sample import Measurement, SampleSet, draw_with_replacement, measure
from .signals import project_bandlimited, random_bandlimited
from .spectral import (
    SamplingDistribution,
    SpectralBasis,
    local_coherence,
    optimal_distribution,
    partial_eigendecomposition,
    rip_constants,
    weighted_coherence,
)

__version__ = "0.1.0"
