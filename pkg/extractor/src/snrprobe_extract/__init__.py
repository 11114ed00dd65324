"""Activation dumping for the snrprobe analysis toolkit.

Two producers, one output format: ``extract`` runs a (stand-in) model
over a mixture sweep with hooked layers, ``synth_activations`` plants
closed-form drift. Both write an .npy tensor tree plus an
activations_manifest.json consumable by ``snrprobe pool``.
"""

from .errors import (BadCheckpoint, BadHooks, BadMixtures, BadSpec, ExtractError,
                     HookMiss, InvalidManifest, ShapeDrift)
from .extract import extract, load_mixtures_manifest, validate_manifest
from .hooks import HookSpec, load_hooks, resolve_hooks
from .standin import (StandinModel, bundled_checkpoint_path, bundled_hooks_path,
                      load_checkpoint)
from .synth import (SynthLayer, SynthSpec, load_spec, spec_from_dict,
                    synth_activations)

__all__ = [
    "BadCheckpoint", "BadHooks", "BadMixtures", "BadSpec", "ExtractError",
    "HookMiss", "InvalidManifest", "ShapeDrift",
    "extract", "load_mixtures_manifest", "validate_manifest",
    "HookSpec", "load_hooks", "resolve_hooks",
    "StandinModel", "bundled_checkpoint_path", "bundled_hooks_path",
    "load_checkpoint",
    "SynthLayer", "SynthSpec", "load_spec", "spec_from_dict",
    "synth_activations",
]
