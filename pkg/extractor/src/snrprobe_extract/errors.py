"""Exception types for the extraction side.

Deliberately disjoint from the analysis package's hierarchy; the two
components only share file formats.
"""


class ExtractError(Exception):
    """Base class for extraction errors."""


class BadCheckpoint(ExtractError):
    """Checkpoint file missing, unparseable, or structurally invalid."""


class BadHooks(ExtractError):
    """Hook specification file is malformed or self-contradictory."""


class HookMiss(ExtractError):
    """A hook pattern matched no model layer."""


class ShapeDrift(ExtractError):
    """A hooked layer emitted tensors with inconsistent trailing shape."""


class BadMixtures(ExtractError):
    """Mixture directory lacks a usable manifest."""


class InvalidManifest(ExtractError):
    """Produced activations manifest violates its schema."""


class BadSpec(ExtractError):
    """Synthetic activation spec is malformed."""
