"""Top-level package for stabilipy."""

__author__ = """vvcb"""
__email__ = "vvcb.n1@gmail.com"
__version__ = "0.1.0"

from .graph import SparseGraph, laplacian, read_edgelist, write_edgelist
from .embedding import spectral_embed, augment_features, eigengap_report
from .resistance import exact_resistance, estimate_resistance, krylov_basis
from .manifold import Manifold, ManifoldConfig, build_input_manifold, build_output_manifold, sparsify
from .dmd import StabilityReport, score_nodes, rank_and_select, lipschitz_bound
from .model import ModelOutputs, surrogate_forward, load_outputs
from .pipeline import run_pipeline
