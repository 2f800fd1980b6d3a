"""Sparsity-constrained distributed LMP unmixing of hyperspectral data."""
from .types import (AbundanceMatrix, DimensionError, HyperCube, InvariantError, NeighborGraph,
                    SignatureMatrix, UnmixConfig, validate_dimensions)
from .simplex import project_simplex, project_simplex_columns
from .weights import WeightSet, compute_weights, similarity_weights, sparsity_lambda, spectral_similarity
from .unmixer import UnmixResult, abundance_step, objective, should_stop, signature_step, unmix
from .baselines import distributed_unmix, fcls, l_half_nmf, nmf, vca
from .synth import SpectralLibrary, SynthScene, add_noise, bundled_library, generate_pure_mosaic, lowpass_mix, make_scene
from .metrics import EvalReport, aad, evaluate, match_endmembers, sad
from .analysis import StabilityReport, convergence_probe, step_size_bound

__version__ = "0.1.0"
