"""SNR-controlled mixture generation and layer-representation probing.

The package splits into audio tooling (wav io, loudness, mixing), tensor
and embedding containers, the similarity/geometry analyses (linear CKA,
trend fits, diffusion maps), and a pipeline plus CLI that ties the
stages together behind one JSON config.
"""

from .audio import AudioClip, CANONICAL_RATE, read_wav, write_wav
from .cka import CKAConfig, CKAPoint, cka_profile, linear_cka
from .diffusion import (DiffusionConfig, DiffusionEmbedding, DistanceMatrix,
                        diffusion_distances, diffusion_embed, inter_layer,
                        intra_layer)
from .embeddings import (CentroidSet, EmbeddingSet, LayerInfo, build_centroids,
                         global_average_pool, pool_activations)
from .errors import ToolkitError
from .loudness import measure_lufs, normalize_lufs
from .mixer import MixtureSpec, SweepConfig, generate_sweep
from .pipeline import PipelineConfig, run_pipeline
from .regression import RegressionSummary, ols_fit, profile_layers, spearman_rho
from .tensors import read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "CANONICAL_RATE", "read_wav", "write_wav",
    "CKAConfig", "CKAPoint", "cka_profile", "linear_cka",
    "DiffusionConfig", "DiffusionEmbedding", "DistanceMatrix",
    "diffusion_distances", "diffusion_embed", "inter_layer", "intra_layer",
    "CentroidSet", "EmbeddingSet", "LayerInfo", "build_centroids",
    "global_average_pool", "pool_activations",
    "ToolkitError",
    "measure_lufs", "normalize_lufs",
    "MixtureSpec", "SweepConfig", "generate_sweep",
    "PipelineConfig", "run_pipeline",
    "RegressionSummary", "ols_fit", "profile_layers", "spearman_rho",
    "read_tensor", "write_tensor",
    "__version__",
]
