"""Command-line entry points for extraction and synthesis.

Exit codes mirror the analysis CLI: 0 success, 1 extraction failure,
2 configuration problem (unreadable or malformed checkpoint/hooks/spec).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import BadCheckpoint, BadHooks, BadSpec, ExtractError
from .extract import extract
from .hooks import load_hooks
from .standin import bundled_checkpoint_path, bundled_hooks_path, load_checkpoint
from .synth import load_spec, synth_activations

log = logging.getLogger("snrprobe_extract")


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")


def extract_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="snrprobe-extract",
        description="dump hooked model activations over a mixture sweep")
    parser.add_argument("--checkpoint", type=Path, default=None,
                        help="model checkpoint JSON (default: bundled stand-in)")
    parser.add_argument("--mixtures", type=Path, required=True,
                        help="mixture sweep directory holding manifest.json")
    parser.add_argument("--hooks", type=Path, default=None,
                        help="hooks JSON (default: hooks for the stand-in)")
    parser.add_argument("--out", type=Path, required=True,
                        help="output directory for tensors and manifest")
    parser.add_argument("--window-average", action="store_true",
                        help="one tensor per utterance instead of per window")
    parser.add_argument("--clean", type=Path, default=None,
                        help="clean source directory (default: from the manifest)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)

    try:
        model = load_checkpoint(args.checkpoint or bundled_checkpoint_path())
        hooks = load_hooks(args.hooks or bundled_hooks_path())
    except (BadCheckpoint, BadHooks) as exc:
        log.error("%s", exc)
        return 2
    try:
        doc = extract(model, args.mixtures, hooks, args.out,
                      window_average=args.window_average, clean_dir=args.clean)
    except ExtractError as exc:
        log.error("%s", exc)
        return 1
    log.info("done: %d tensor files under %s", len(doc["files"]), args.out)
    return 0


def synth_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="snrprobe-synth",
        description="generate a synthetic activation tree with planted drift")
    parser.add_argument("--spec", type=Path, required=True,
                        help="synthesis spec JSON")
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)

    try:
        spec = load_spec(args.spec)
    except BadSpec as exc:
        log.error("%s", exc)
        return 2
    try:
        synth_activations(spec, args.seed, args.out)
    except ExtractError as exc:
        log.error("%s", exc)
        return 1
    log.info("done: synthetic activations under %s", args.out)
    return 0


if __name__ == "__main__":
    sys.exit(extract_main())
