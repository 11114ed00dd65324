"""Pipeline orchestration: one JSON config drives mix through render.

Stages run in the fixed order mix, pool, cka, fit, diffusion, render;
each consumes files left by its predecessors so any suffix of the chain
can be re-run against precomputed artifacts. A run writes
``run_summary.json`` mapping every artifact to its SHA-256 so two runs
can be compared by hash alone. A stage that dies leaves a
``<stage>.partial`` marker next to whatever it managed to write.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cka import CKAConfig, CKAPoint, cka_profile, read_cka_csv, write_cka_csv
from .diffusion import (DiffusionConfig, inter_layer, intra_layer, read_dist_csv,
                        read_intra_csv, write_dist_csv, write_intra_csv,
                        write_report_json)
from .embeddings import EmbeddingSet, build_centroids, pool_activations
from .errors import ConfigError, MissingInput, StageFailure, ToolkitError
from .mixer import SweepConfig, generate_sweep
from .regression import profile_layers, read_fit_csv, write_fit_csv
from .render import CurveSeries, HeatmapSpec, render_curves, render_heatmap

log = logging.getLogger("snrprobe.pipeline")

CONFIG_SCHEMA = "snrprobe-config-v1"
RUN_SCHEMA = "snrprobe-run-v1"
STAGE_ORDER = ("mix", "pool", "cka", "fit", "diffusion", "render")
FIT_MODES = ("averaged_cka", "per_noise_fits")

DEFAULT_ARTIFACTS = {
    "mixtures_dir": "mixtures",
    "embeddings": "embeddings.embs",
    "cka_csv": "cka.csv",
    "fit_csv": "cka_fit.csv",
    "intra_csv": "diffusion_intra.csv",
    "report_json": "diffusion_report.json",
    "figures_dir": "figures",
    "run_summary": "run_summary.json",
}

REPRESENTATIVE_SNRS = [-10, -5, 0, 10, 20, 30]


def _dataclass_from(cls, section: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(section) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**section)
    except (ValueError, TypeError, ToolkitError) as exc:
        # section dataclasses raise their own error types (e.g. a bad kernel
        # bandwidth); at parse time they are all configuration errors
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class PipelineConfig:
    output_dir: Path
    stages: list[str] = field(default_factory=lambda: list(STAGE_ORDER))
    seed: int | None = None
    jobs: int = 1
    clean_dir: Path | None = None
    noise_dir: Path | None = None
    activations_dir: Path | None = None
    activations_manifest: Path | None = None
    sweep: SweepConfig = field(default_factory=SweepConfig)
    cka: CKAConfig = field(default_factory=CKAConfig)
    fit_mode: str = "averaged_cka"
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    representative_snrs: list[int] = field(default_factory=lambda: list(REPRESENTATIVE_SNRS))
    artifacts: dict = field(default_factory=dict)

    def __post_init__(self):
        bad = [s for s in self.stages if s not in STAGE_ORDER]
        if bad:
            raise ConfigError(f"unknown stages {bad}; valid: {list(STAGE_ORDER)}")
        self.stages = [s for s in STAGE_ORDER if s in self.stages]
        if not self.stages:
            raise ConfigError("no stages requested")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.fit_mode not in FIT_MODES:
            raise ConfigError(f"fit mode must be one of {FIT_MODES}")
        if self.seed is None and ("mix" in self.stages or "cka" in self.stages):
            raise ConfigError("a seed is required when mix or cka runs")
        unknown = sorted(set(self.artifacts) - set(DEFAULT_ARTIFACTS))
        if unknown:
            raise ConfigError(f"artifacts: unknown keys {unknown}")

    def artifact(self, name: str) -> Path:
        return self.output_dir / self.artifacts.get(name, DEFAULT_ARTIFACTS[name])

    def validate_inputs(self) -> None:
        """Config-level path checks for the requested stages."""
        if "mix" in self.stages:
            for label, p in (("clean_dir", self.clean_dir), ("noise_dir", self.noise_dir)):
                if p is None:
                    raise ConfigError(f"mix stage needs paths.{label}")
                if not Path(p).is_dir():
                    raise ConfigError(f"paths.{label} does not exist: {p}")
        if "pool" in self.stages:
            if self.activations_dir is None or self.activations_manifest is None:
                raise ConfigError("pool stage needs paths.activations_dir and "
                                  "paths.activations_manifest")
            if not Path(self.activations_dir).is_dir():
                raise ConfigError(f"paths.activations_dir does not exist: "
                                  f"{self.activations_dir}")
            if not Path(self.activations_manifest).is_file():
                raise ConfigError(f"paths.activations_manifest does not exist: "
                                  f"{self.activations_manifest}")

    def to_dict(self) -> dict:
        return {
            "schema": CONFIG_SCHEMA,
            "seed": self.seed,
            "jobs": self.jobs,
            "stages": list(self.stages),
            "paths": {
                "output_dir": str(self.output_dir),
                "clean_dir": None if self.clean_dir is None else str(self.clean_dir),
                "noise_dir": None if self.noise_dir is None else str(self.noise_dir),
                "activations_dir": (None if self.activations_dir is None
                                    else str(self.activations_dir)),
                "activations_manifest": (None if self.activations_manifest is None
                                         else str(self.activations_manifest)),
            },
            "sweep": self.sweep.to_dict(),
            "cka": {
                "bootstrap_resamples": self.cka.bootstrap_resamples,
                "ci_level": self.cka.ci_level,
                "rng_seed": self.cka.rng_seed,
                "rows": self.cka.rows,
            },
            "fit": {"mode": self.fit_mode},
            "diffusion": {
                "epsilon_mode": self.diffusion.epsilon_mode,
                "epsilon_value": self.diffusion.epsilon_value,
                "n_coords": self.diffusion.n_coords,
                "diffusion_time": self.diffusion.diffusion_time,
                "intra_rows": self.diffusion.intra_rows,
                "inter_layers": self.diffusion.inter_layers,
                "include_clean": self.diffusion.include_clean,
                "maps": self.diffusion.maps,
            },
            "render": {"representative_snrs": list(self.representative_snrs)},
            "artifacts": {k: str(v) for k, v in sorted(self.artifacts.items())},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        if doc.get("schema") != CONFIG_SCHEMA:
            raise ConfigError(f"config schema must be {CONFIG_SCHEMA!r}, "
                              f"got {doc.get('schema')!r}")
        known = {"schema", "seed", "jobs", "stages", "paths", "sweep", "cka",
                 "fit", "diffusion", "render", "artifacts"}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")

        paths = doc.get("paths", {})
        known_paths = {"output_dir", "clean_dir", "noise_dir", "activations_dir",
                       "activations_manifest"}
        unknown = sorted(set(paths) - known_paths)
        if unknown:
            raise ConfigError(f"paths: unknown keys {unknown}")
        if not paths.get("output_dir"):
            raise ConfigError("paths.output_dir is required")

        def opt_path(key):
            return Path(paths[key]) if paths.get(key) else None

        fit_section = doc.get("fit", {})
        if set(fit_section) - {"mode"}:
            raise ConfigError(f"fit: unknown keys {sorted(set(fit_section) - {'mode'})}")
        render_section = doc.get("render", {})
        if set(render_section) - {"representative_snrs"}:
            raise ConfigError("render: only representative_snrs is configurable")

        seed = doc.get("seed")
        cka_section = dict(doc.get("cka", {}))
        if "rng_seed" not in cka_section and seed is not None:
            cka_section["rng_seed"] = seed

        return cls(
            output_dir=Path(paths["output_dir"]),
            stages=doc.get("stages", list(STAGE_ORDER)),
            seed=seed,
            jobs=doc.get("jobs", 1),
            clean_dir=opt_path("clean_dir"),
            noise_dir=opt_path("noise_dir"),
            activations_dir=opt_path("activations_dir"),
            activations_manifest=opt_path("activations_manifest"),
            sweep=_dataclass_from(SweepConfig, doc.get("sweep", {}), "sweep"),
            cka=_dataclass_from(CKAConfig, cka_section, "cka"),
            fit_mode=fit_section.get("mode", "averaged_cka"),
            diffusion=_dataclass_from(DiffusionConfig, doc.get("diffusion", {}),
                                      "diffusion"),
            representative_snrs=list(render_section.get("representative_snrs",
                                                        REPRESENTATIVE_SNRS)),
            artifacts=dict(doc.get("artifacts", {})),
        )

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


def _require(stage: str, path: Path, what: str) -> Path:
    if not path.exists():
        raise StageFailure(stage, MissingInput(f"{what} not found at {path}"))
    return path


def _load_embeddings(stage: str, config: PipelineConfig) -> EmbeddingSet:
    path = _require(stage, config.artifact("embeddings"), "embeddings file")
    return EmbeddingSet.load(path)


def stage_mix(config: PipelineConfig) -> list[Path]:
    out_dir = config.artifact("mixtures_dir")
    manifest = generate_sweep(config.clean_dir, config.noise_dir, out_dir,
                              config.sweep, config.seed, jobs=config.jobs)
    produced = [out_dir / "manifest.json"]
    produced.extend(sorted(out_dir / e["path"] for e in manifest["entries"]))
    return produced


def stage_pool(config: PipelineConfig) -> list[Path]:
    embeddings = pool_activations(config.activations_dir, config.activations_manifest)
    out = config.artifact("embeddings")
    embeddings.save(out)
    return [out]


def stage_cka(config: PipelineConfig) -> list[Path]:
    embeddings = _load_embeddings("cka", config)
    cells = [(info.layer_id, snr) for info in embeddings.layers
             for snr in embeddings.snr_grid_db]
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            points = list(pool.map(
                lambda cell: cka_profile(embeddings, cell[0], cell[1], config.cka),
                cells))
    else:
        points = [cka_profile(embeddings, layer, snr, config.cka)
                  for layer, snr in cells]
    out = config.artifact("cka_csv")
    write_cka_csv(points, embeddings, out)
    return [out]


def stage_fit(config: PipelineConfig) -> list[Path]:
    embeddings = _load_embeddings("fit", config)
    rows = read_cka_csv(_require("fit", config.artifact("cka_csv"), "cka.csv"))
    points = [CKAPoint(r["layer_id"], r["snr_db"], r["cka"], r["ci_low"],
                       r["ci_high"], r["n_rows"]) for r in rows]
    fits = profile_layers(points, embeddings, fit_mode=config.fit_mode)
    out = config.artifact("fit_csv")
    write_fit_csv(fits, out)
    return [out]


def _intra_dist_path(config: PipelineConfig, layer_id: str) -> Path:
    return config.output_dir / f"diffusion_intra_dist_{layer_id}.csv"


def _inter_path(config: PipelineConfig, snr_db: int) -> Path:
    return config.output_dir / f"diffusion_inter_{snr_db}.csv"


def stage_diffusion(config: PipelineConfig) -> list[Path]:
    embeddings = _load_embeddings("diffusion", config)
    centroids = build_centroids(embeddings)
    grid = list(embeddings.snr_grid_db)
    noise_types = list(embeddings.noise_types)

    def run_intra(info):
        return intra_layer(centroids, info.layer_id, noise_types, grid,
                           config.diffusion)

    def run_inter(snr):
        return inter_layer(centroids, embeddings.layers, noise_types, snr,
                           config.diffusion)

    intra_jobs = embeddings.layers if config.diffusion.maps != "inter" else []
    inter_jobs = grid if config.diffusion.maps != "intra" else []
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            intra_results = list(pool.map(run_intra, intra_jobs))
            inter_results = list(pool.map(run_inter, inter_jobs))
    else:
        intra_results = [run_intra(info) for info in intra_jobs]
        inter_results = [run_inter(snr) for snr in inter_jobs]

    produced = []
    if intra_results:
        out = config.artifact("intra_csv")
        write_intra_csv(intra_results, out)
        produced.append(out)
    for res in intra_results:
        path = _intra_dist_path(config, res.layer_id)
        write_dist_csv(res.distances, path, label_column="snr_db")
        produced.append(path)
    for res in inter_results:
        path = _inter_path(config, res.snr_db)
        write_dist_csv(res.distances, path, label_column="label")
        produced.append(path)
    report = config.artifact("report_json")
    write_report_json(intra_results, inter_results, config.diffusion, report)
    produced.append(report)
    return produced


def stage_render(config: PipelineConfig) -> list[Path]:
    fig_dir = config.artifact("figures_dir")
    fig_dir.mkdir(parents=True, exist_ok=True)
    produced = []

    def emit(name: str, svg: str) -> None:
        path = fig_dir / name
        path.write_text(svg, encoding="utf-8")
        produced.append(path)

    cka_rows = read_cka_csv(_require("render", config.artifact("cka_csv"), "cka.csv"))
    layer_ids, snrs = [], []
    for r in sorted(cka_rows, key=lambda r: (r["depth_index"], r["snr_db"])):
        if r["layer_id"] not in layer_ids:
            layer_ids.append(r["layer_id"])
        if r["snr_db"] not in snrs:
            snrs.append(r["snr_db"])
    snrs.sort()
    values = np.full((len(layer_ids), len(snrs)), np.nan)
    cell = {(r["layer_id"], r["snr_db"]): r for r in cka_rows}
    for i, layer in enumerate(layer_ids):
        for j, snr in enumerate(snrs):
            if (layer, snr) in cell:
                values[i, j] = cell[(layer, snr)]["cka"]
    emit("cka_heatmap.svg", render_heatmap(HeatmapSpec(
        layer_ids, [str(s) for s in snrs], values, 0.0, 1.0,
        title="Clean-vs-noisy CKA by layer and SNR")))

    series = []
    for i, layer in enumerate(layer_ids):
        pts = [cell[(layer, s)] for s in snrs if (layer, s) in cell]
        series.append(CurveSeries(
            layer,
            np.array([p["snr_db"] for p in pts], dtype=np.float64),
            np.array([p["cka"] for p in pts]),
            band_low=np.array([p["ci_low"] for p in pts]),
            band_high=np.array([p["ci_high"] for p in pts])))
    emit("cka_curves.svg", render_curves(series, title="CKA vs SNR",
                                         x_label="SNR (dB)", y_label="CKA"))

    fit_rows = read_fit_csv(_require("render", config.artifact("fit_csv"),
                                     "cka_fit.csv"))
    fit_rows.sort(key=lambda r: r["depth_index"])
    depth = np.array([r["depth_index"] for r in fit_rows], dtype=np.float64)
    emit("fit_slopes.svg", render_curves(
        [CurveSeries("slope", depth, np.array([r["slope"] for r in fit_rows]))],
        title="CKA-vs-SNR slope by depth", x_label="depth index", y_label="slope"))
    emit("fit_intercepts.svg", render_curves(
        [CurveSeries("intercept", depth,
                     np.array([r["intercept"] for r in fit_rows]))],
        title="CKA at 0 dB by depth", x_label="depth index", y_label="intercept"))

    with open(_require("render", config.artifact("report_json"),
                       "diffusion_report.json"), encoding="utf-8") as fh:
        report = json.load(fh)
    intra_layers = [entry["layer_id"] for entry in report["intra"]]
    if intra_layers:
        intra_rows = read_intra_csv(_require("render", config.artifact("intra_csv"),
                                             "diffusion_intra.csv"))
        dc1_series = []
        for layer in intra_layers:
            pts = sorted((r for r in intra_rows if r["layer_id"] == layer),
                         key=lambda r: r["snr_db"])
            dc1_series.append(CurveSeries(
                layer, np.array([p["snr_db"] for p in pts], dtype=np.float64),
                np.array([p["dc1"] for p in pts])))
        emit("dc1_trajectories.svg", render_curves(
            dc1_series, title="Dominant diffusion coordinate vs SNR",
            x_label="SNR (dB)", y_label="DC1"))

    for layer in intra_layers:
        matrix = read_dist_csv(_require("render", _intra_dist_path(config, layer),
                                        f"intra distance matrix for {layer}"))
        top = float(matrix.values.max())
        emit(f"intra_dist_{layer}.svg", render_heatmap(HeatmapSpec(
            matrix.labels, matrix.labels, matrix.values, 0.0,
            top if top > 0 else 1.0,
            title=f"Diffusion distances across SNR: {layer}")))

    inter_snrs = [entry["snr_db"] for entry in report["inter"]]
    for snr in config.representative_snrs:
        if snr not in inter_snrs:
            continue
        matrix = read_dist_csv(_require("render", _inter_path(config, snr),
                                        f"inter distance matrix at {snr} dB"))
        top = float(matrix.values.max())
        emit(f"inter_dist_{snr}.svg", render_heatmap(HeatmapSpec(
            matrix.labels, matrix.labels, matrix.values, 0.0,
            top if top > 0 else 1.0,
            title=f"Inter-layer diffusion distances at {snr} dB")))
    return produced


_STAGE_FUNCS = {
    "mix": stage_mix,
    "pool": stage_pool,
    "cka": stage_cka,
    "fit": stage_fit,
    "diffusion": stage_diffusion,
    "render": stage_render,
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute the requested stages; returns the run summary document."""
    config.validate_inputs()
    config.output_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, str] = {}
    for stage in config.stages:
        marker = config.output_dir / f"{stage}.partial"
        marker.write_text("stage in progress\n", encoding="utf-8")
        log.info("stage %s: starting", stage)
        try:
            produced = _STAGE_FUNCS[stage](config)
        except StageFailure:
            raise
        except (ToolkitError, OSError, ValueError) as exc:
            raise StageFailure(stage, exc) from exc
        marker.unlink()
        log.info("stage %s: %d artifact(s)", stage, len(produced))
        for path in produced:
            try:
                key = path.relative_to(config.output_dir).as_posix()
            except ValueError:  # artifact override escaping the output root
                key = path.as_posix()
            artifacts[key] = _sha256(path)

    summary = {
        "schema": RUN_SCHEMA,
        "config": config.to_dict(),
        "stages": list(config.stages),
        "artifacts": dict(sorted(artifacts.items())),
    }
    with open(config.artifact("run_summary"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
