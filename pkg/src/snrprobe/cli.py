"""Command-line entry point.

Each subcommand runs one pipeline stage (``run`` executes the stage list
from the config). Settings resolve in three layers: built-in defaults,
then the JSON config given with --config, then command-line flags. Exit
codes: 0 success, 1 stage failure, 2 configuration error. Logs go to
stderr; machine-readable results go to files only.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, StageFailure
from .pipeline import CONFIG_SCHEMA, STAGE_ORDER, PipelineConfig, run_pipeline

log = logging.getLogger("snrprobe")


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None,
                     help="JSON pipeline config; flags override its values")
    sub.add_argument("--seed", type=int, default=None, help="master seed")
    sub.add_argument("--jobs", type=int, default=None, help="worker threads")
    sub.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snrprobe",
        description="SNR-controlled mixture generation and representation probing")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("mix", help="generate the noisy mixture sweep")
    p.add_argument("--clean", type=Path, help="directory of clean speech WAVs")
    p.add_argument("--noise", type=Path, help="directory of noise WAVs")
    p.add_argument("--out", type=Path, help="output root (mixtures go to OUT/mixtures)")
    p.add_argument("--snr-min", type=int, default=None)
    p.add_argument("--snr-max", type=int, default=None)
    p.add_argument("--lufs", type=float, default=None, help="target loudness")
    p.add_argument("--clip-s", type=float, default=None, help="clip duration, seconds")
    p.add_argument("--window-s", type=float, default=None, help="analysis window, seconds")
    _add_common(p)

    p = subs.add_parser("pool", help="pool activations into embeddings")
    p.add_argument("--activations", type=Path, help="activation tensor tree")
    p.add_argument("--manifest", type=Path, help="activations manifest JSON")
    p.add_argument("--out", type=Path, help="output root for embeddings.embs")
    _add_common(p)

    p = subs.add_parser("cka", help="clean-vs-noisy similarity table")
    p.add_argument("--embeddings", type=Path, help="embeddings file from pool")
    p.add_argument("--out", type=Path, help="output root for cka.csv")
    p.add_argument("--bootstrap", type=int, default=None, help="bootstrap resamples")
    p.add_argument("--rows", choices=["utterances", "centroids"], default=None)
    _add_common(p)

    p = subs.add_parser("fit", help="per-layer SNR trend fits")
    p.add_argument("--embeddings", type=Path, help="embeddings file from pool")
    p.add_argument("--out", type=Path, help="output root holding cka.csv")
    p.add_argument("--mode", choices=["averaged_cka", "per_noise_fits"], default=None)
    _add_common(p)

    p = subs.add_parser("diffusion", help="diffusion-map geometry")
    p.add_argument("--embeddings", type=Path, help="embeddings file from pool")
    p.add_argument("--mode", choices=["intra", "inter", "both"], default=None,
                   help="restrict to intra- or inter-layer maps (default both)")
    p.add_argument("--epsilon", default=None,
                   help="'median' or a positive kernel bandwidth")
    p.add_argument("--coords", type=int, default=None, help="retained coordinates")
    p.add_argument("--time", type=int, default=None, help="diffusion time")
    p.add_argument("--out", type=Path, help="output root for CSVs and report")
    _add_common(p)

    p = subs.add_parser("render", help="SVG figures from pipeline CSVs")
    p.add_argument("--out", type=Path, help="output root holding the CSVs")
    _add_common(p)

    p = subs.add_parser("run", help="run the configured stage list end to end")
    p.add_argument("--out", type=Path, help="override output root")
    _add_common(p)
    return parser


def _base_doc(args) -> dict:
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return doc
    return {"schema": CONFIG_SCHEMA, "paths": {}}


_OUT_AS_FILE = {"pool": "embeddings", "cka": "cka_csv", "fit": "fit_csv"}


def _apply_flags(doc: dict, args) -> dict:
    """Fold command-line flags over the config document."""
    paths = doc.setdefault("paths", {})
    if args.seed is not None:
        doc["seed"] = args.seed
        doc.setdefault("cka", {}).pop("rng_seed", None)
    if args.jobs is not None:
        doc["jobs"] = args.jobs

    cmd = args.command
    out = getattr(args, "out", None)
    if out is not None:
        # pool/cka/fit accept a file here (e.g. --out cka.csv); anything
        # with a suffix is treated as the artifact itself
        if cmd in _OUT_AS_FILE and out.suffix:
            paths["output_dir"] = str(out.parent)
            doc.setdefault("artifacts", {})[_OUT_AS_FILE[cmd]] = out.name
        else:
            paths["output_dir"] = str(out)

    emb = getattr(args, "embeddings", None)
    if emb is not None:
        if not paths.get("output_dir"):
            paths["output_dir"] = str(emb.parent)
        # absolute so it survives joining with any output root
        doc.setdefault("artifacts", {})["embeddings"] = str(emb.resolve())
    if cmd == "mix":
        if args.clean is not None:
            paths["clean_dir"] = str(args.clean)
        if args.noise is not None:
            paths["noise_dir"] = str(args.noise)
        sweep = doc.setdefault("sweep", {})
        if args.snr_min is not None or args.snr_max is not None:
            lo = args.snr_min if args.snr_min is not None else -10
            hi = args.snr_max if args.snr_max is not None else 30
            if hi < lo:
                raise ConfigError("--snr-max must be >= --snr-min")
            sweep["snr_grid_db"] = list(range(lo, hi + 1))
        if args.lufs is not None:
            sweep["target_lufs"] = args.lufs
        if args.clip_s is not None:
            sweep["clip_duration_s"] = args.clip_s
        if args.window_s is not None:
            sweep["window_duration_s"] = args.window_s
    elif cmd == "pool":
        if args.activations is not None:
            paths["activations_dir"] = str(args.activations)
        if args.manifest is not None:
            paths["activations_manifest"] = str(args.manifest)
    elif cmd == "cka":
        cka = doc.setdefault("cka", {})
        if args.bootstrap is not None:
            cka["bootstrap_resamples"] = args.bootstrap
        if args.rows is not None:
            cka["rows"] = args.rows
    elif cmd == "fit":
        if args.mode is not None:
            doc.setdefault("fit", {})["mode"] = args.mode
    elif cmd == "diffusion":
        diff = doc.setdefault("diffusion", {})
        if args.mode is not None:
            diff["maps"] = args.mode
        if args.epsilon is not None:
            if args.epsilon == "median":
                diff["epsilon_mode"] = "median"
                diff["epsilon_value"] = None
            else:
                try:
                    diff["epsilon_value"] = float(args.epsilon)
                except ValueError as exc:
                    raise ConfigError(
                        f"--epsilon must be 'median' or a number, got {args.epsilon!r}"
                    ) from exc
                diff["epsilon_mode"] = "fixed"
        if args.coords is not None:
            diff["n_coords"] = args.coords
        if args.time is not None:
            diff["diffusion_time"] = args.time

    if cmd != "run":
        doc["stages"] = [cmd]
    return doc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")

    try:
        doc = _apply_flags(_base_doc(args), args)
        config = PipelineConfig.from_dict(doc)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2

    try:
        run_pipeline(config)
    except StageFailure as exc:
        log.error("%s", exc)
        return 1
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    log.info("done; summary at %s", config.artifact("run_summary"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
