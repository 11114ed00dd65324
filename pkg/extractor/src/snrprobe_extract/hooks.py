"""Hook specifications: which model layers to capture, and as what.

A hook maps one layer-name pattern (fnmatch syntax) to the layer_id,
block tag, and flags that the activations manifest will carry. Patterns
must resolve to exactly one model layer: zero matches is a HookMiss and
several matches would write two tensors under one id, so both fail.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fnmatch import fnmatchcase
from pathlib import Path

from .errors import BadHooks, HookMiss

HOOKS_SCHEMA = "snrprobe-hooks-v1"


@dataclass(frozen=True)
class HookSpec:
    pattern: str
    layer_id: str
    block: str
    first_in_block: bool = False
    token_axis: int = 0
    skip_input: bool = False
    skip_output: bool = False

    def manifest_entry(self) -> dict:
        return {
            "layer_id": self.layer_id,
            "block": self.block,
            "token_axis": self.token_axis,
            "first_in_block": self.first_in_block,
            "skip_input": self.skip_input,
            "skip_output": self.skip_output,
        }


def load_hooks(path) -> list[HookSpec]:
    """Parse and validate a hooks JSON file, preserving hook order.

    Hook order defines layer depth downstream, so the file should list
    hooks from model input to output.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BadHooks(f"cannot read hooks file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadHooks(f"hooks file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != HOOKS_SCHEMA:
        raise BadHooks(f"hooks file {path}: expected schema {HOOKS_SCHEMA!r}")
    entries = doc.get("hooks")
    if not isinstance(entries, list) or not entries:
        raise BadHooks(f"hooks file {path}: 'hooks' must be a non-empty list")

    hooks = []
    for i, entry in enumerate(entries):
        try:
            hooks.append(HookSpec(
                pattern=str(entry["pattern"]),
                layer_id=str(entry["layer_id"]),
                block=str(entry["block"]),
                first_in_block=bool(entry.get("first_in_block", False)),
                token_axis=int(entry.get("token_axis", 0)),
                skip_input=bool(entry.get("skip_input", False)),
                skip_output=bool(entry.get("skip_output", False)),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise BadHooks(f"hooks file {path}, entry {i}: {exc}") from exc

    ids = [h.layer_id for h in hooks]
    if len(set(ids)) != len(ids):
        dupes = sorted({x for x in ids if ids.count(x) > 1})
        raise BadHooks(f"hooks file {path}: duplicate layer_ids {dupes}")
    return hooks


def resolve_hooks(hooks: list[HookSpec], layer_names: list[str]) -> dict[str, HookSpec]:
    """Match every hook against the model's layer names.

    Returns model layer name -> hook, in hook order.
    """
    resolved: dict[str, HookSpec] = {}
    for hook in hooks:
        matches = [name for name in layer_names if fnmatchcase(name, hook.pattern)]
        if not matches:
            raise HookMiss(f"pattern {hook.pattern!r} matched no layer "
                           f"(model has {layer_names})")
        if len(matches) > 1:
            raise BadHooks(f"pattern {hook.pattern!r} is ambiguous: "
                           f"matches {matches}")
        if matches[0] in resolved:
            raise BadHooks(f"layer {matches[0]!r} captured by two hooks")
        resolved[matches[0]] = hook
    return resolved
