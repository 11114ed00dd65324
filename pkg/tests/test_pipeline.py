"""Config parsing, stage orchestration, exit codes, and run summaries."""

import hashlib
import json
from pathlib import Path

import pytest

from snrprobe.cli import main as cli_main
from snrprobe.errors import ConfigError, MissingInput, StageFailure
from snrprobe.pipeline import (CONFIG_SCHEMA, DEFAULT_ARTIFACTS, RUN_SCHEMA,
                               STAGE_ORDER, PipelineConfig, run_pipeline)

pytestmark = pytest.mark.usefixtures("fixtures_dir")


def doc_for(out_dir, fixtures_dir, stages, **overrides):
    """Config document wired to the bundled corpus with absolute paths."""
    doc = {
        "schema": CONFIG_SCHEMA,
        "seed": 20240601,
        "jobs": 1,
        "stages": list(stages),
        "paths": {
            "output_dir": str(out_dir),
            "clean_dir": str(fixtures_dir / "audio" / "clean"),
            "noise_dir": str(fixtures_dir / "audio" / "noise"),
            "activations_dir": str(fixtures_dir / "activations"),
            "activations_manifest": str(fixtures_dir / "activations"
                                        / "activations_manifest.json"),
        },
        "sweep": {"snr_grid_db": [-10, 0, 10, 20, 30]},
        "cka": {"bootstrap_resamples": 50},
        "diffusion": {"n_coords": 3},
        "render": {"representative_snrs": [-10, 0, 30]},
    }
    doc.update(overrides)
    return doc


@pytest.fixture(scope="module")
def pooled_embeddings(tmp_path_factory, fixtures_dir):
    """embeddings.embs pooled once from the fixture activations."""
    out = tmp_path_factory.mktemp("pooled")
    doc = doc_for(out, fixtures_dir, ["pool"])
    run_pipeline(PipelineConfig.from_dict(doc))
    return out / "embeddings.embs"


# ----------------------------------------------------------- config parsing


def test_config_requires_matching_schema(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"paths": {"output_dir": str(tmp_path)}})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"schema": "snrprobe-config-v0",
                                  "paths": {"output_dir": str(tmp_path)}})


def test_config_rejects_unknown_keys(tmp_path, fixtures_dir):
    for mutate in (
        lambda d: d.update(surprise=1),
        lambda d: d["paths"].update(scratch_dir="x"),
        lambda d: d.update(sweep={"snr_grid_db": [0], "loudness": -23}),
        lambda d: d.update(cka={"resamples": 10}),
        lambda d: d.update(fit={"mode": "averaged_cka", "weight": 2}),
        lambda d: d.update(render={"theme": "dark"}),
        lambda d: d.update(artifacts={"summary": "s.json"}),
        lambda d: d.update(diffusion={"bandwidth": 1.0}),
    ):
        doc = doc_for(tmp_path, fixtures_dir, ["render"])
        mutate(doc)
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict(doc)


def test_config_requires_output_dir():
    with pytest.raises(ConfigError, match="output_dir"):
        PipelineConfig.from_dict({"schema": CONFIG_SCHEMA, "paths": {}})


def test_config_validates_stage_names(tmp_path, fixtures_dir):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(doc_for(tmp_path, fixtures_dir, ["mix", "deploy"]))
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(doc_for(tmp_path, fixtures_dir, []))


def test_config_canonicalizes_stage_order(tmp_path, fixtures_dir):
    cfg = PipelineConfig.from_dict(doc_for(tmp_path, fixtures_dir, ["fit", "cka"]))
    assert cfg.stages == ["cka", "fit"]


def test_config_seed_required_only_for_mix_and_cka(tmp_path, fixtures_dir):
    doc = doc_for(tmp_path, fixtures_dir, ["cka"], seed=None)
    with pytest.raises(ConfigError, match="seed"):
        PipelineConfig.from_dict(doc)
    doc = doc_for(tmp_path, fixtures_dir, ["render"], seed=None)
    PipelineConfig.from_dict(doc)  # no seed needed downstream of cka


def test_config_jobs_and_fit_mode(tmp_path, fixtures_dir):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(doc_for(tmp_path, fixtures_dir, ["render"], jobs=0))
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(doc_for(tmp_path, fixtures_dir, ["render"],
                                         fit={"mode": "spline"}))


def test_config_bad_section_values_become_config_errors(tmp_path, fixtures_dir):
    doc = doc_for(tmp_path, fixtures_dir, ["render"],
                  sweep={"snr_grid_db": [10, 0]})
    with pytest.raises(ConfigError, match="sweep"):
        PipelineConfig.from_dict(doc)
    # the diffusion section raises its own error type; it must still
    # surface as a ConfigError at parse time
    doc = doc_for(tmp_path, fixtures_dir, ["render"],
                  diffusion={"epsilon_mode": "fixed"})
    with pytest.raises(ConfigError, match="diffusion"):
        PipelineConfig.from_dict(doc)


def test_config_seed_feeds_cka_rng(tmp_path, fixtures_dir):
    cfg = PipelineConfig.from_dict(doc_for(tmp_path, fixtures_dir, ["cka"],
                                           seed=77, cka={}))
    assert cfg.cka.rng_seed == 77
    cfg = PipelineConfig.from_dict(doc_for(tmp_path, fixtures_dir, ["cka"],
                                           seed=77, cka={"rng_seed": 9}))
    assert cfg.cka.rng_seed == 9


def test_config_artifact_resolution(tmp_path, fixtures_dir):
    doc = doc_for(tmp_path, fixtures_dir, ["render"],
                  artifacts={"cka_csv": "similarity.csv"})
    cfg = PipelineConfig.from_dict(doc)
    assert cfg.artifact("cka_csv") == tmp_path / "similarity.csv"
    assert cfg.artifact("fit_csv") == tmp_path / DEFAULT_ARTIFACTS["fit_csv"]


def test_config_to_dict_round_trips(tmp_path, fixtures_dir):
    cfg = PipelineConfig.from_dict(doc_for(tmp_path, fixtures_dir,
                                           ["pool", "cka", "fit"]))
    again = PipelineConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


def test_validate_inputs_checks_stage_paths(tmp_path, fixtures_dir):
    doc = doc_for(tmp_path, fixtures_dir, ["mix"])
    doc["paths"]["clean_dir"] = str(tmp_path / "nowhere")
    with pytest.raises(ConfigError, match="clean_dir"):
        PipelineConfig.from_dict(doc).validate_inputs()
    doc = doc_for(tmp_path, fixtures_dir, ["mix"])
    doc["paths"]["noise_dir"] = None
    with pytest.raises(ConfigError, match="noise_dir"):
        PipelineConfig.from_dict(doc).validate_inputs()
    doc = doc_for(tmp_path, fixtures_dir, ["pool"])
    doc["paths"]["activations_manifest"] = str(tmp_path / "missing.json")
    with pytest.raises(ConfigError, match="activations_manifest"):
        PipelineConfig.from_dict(doc).validate_inputs()


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(arr)


# ------------------------------------------------------------ orchestration


def test_full_run_writes_everything(tmp_path, fixtures_dir):
    out = tmp_path / "out"
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(doc_for(out, fixtures_dir, STAGE_ORDER)))
    assert cli_main(["run", "--config", str(cfg_path)]) == 0

    assert not list(out.glob("*.partial"))
    for name in ("embeddings.embs", "cka.csv", "cka_fit.csv",
                 "diffusion_intra.csv", "diffusion_report.json",
                 "run_summary.json"):
        assert (out / name).is_file(), name
    assert (out / "mixtures" / "manifest.json").is_file()

    figures = {p.name for p in (out / "figures").glob("*.svg")}
    assert {"cka_heatmap.svg", "cka_curves.svg", "fit_slopes.svg",
            "fit_intercepts.svg", "dc1_trajectories.svg"} <= figures
    assert any(n.startswith("intra_dist_") for n in figures)
    assert {"inter_dist_-10.svg", "inter_dist_0.svg", "inter_dist_30.svg"} <= figures

    summary = json.loads((out / "run_summary.json").read_text())
    assert summary["schema"] == RUN_SCHEMA
    assert summary["stages"] == list(STAGE_ORDER)
    assert summary["config"]["seed"] == 20240601
    keys = list(summary["artifacts"])
    assert keys == sorted(keys)
    digest = hashlib.sha256((out / "cka.csv").read_bytes()).hexdigest()
    assert summary["artifacts"]["cka.csv"] == digest
    for key in keys:
        assert (out / key).is_file()


def test_worker_count_does_not_change_artifacts(tmp_path, fixtures_dir):
    stages = ["pool", "cka", "fit", "diffusion", "render"]
    maps = {}
    for jobs in (1, 3):
        out = tmp_path / f"jobs{jobs}"
        summary = run_pipeline(PipelineConfig.from_dict(
            doc_for(out, fixtures_dir, stages, jobs=jobs)))
        maps[jobs] = summary["artifacts"]
    assert maps[1] == maps[3]


def test_stage_failure_leaves_partial_marker(tmp_path, pooled_embeddings,
                                             fixtures_dir):
    out = tmp_path / "out"
    out.mkdir()
    (out / "embeddings.embs").write_bytes(pooled_embeddings.read_bytes())
    cfg = PipelineConfig.from_dict(doc_for(out, fixtures_dir, ["fit"]))
    with pytest.raises(StageFailure) as exc_info:
        run_pipeline(cfg)
    assert exc_info.value.stage == "fit"
    assert isinstance(exc_info.value.cause, MissingInput)
    assert (out / "fit.partial").is_file()
    assert not (out / "run_summary.json").exists()


def test_cli_exit_codes(tmp_path, fixtures_dir):
    # missing prerequisite CSVs: stage failure, exit 1
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli_main(["render", "--out", str(empty)]) == 1

    # config problems: exit 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema": CONFIG_SCHEMA, "typo": True,
                               "paths": {"output_dir": str(tmp_path)}}))
    assert cli_main(["run", "--config", str(bad)]) == 2
    assert cli_main(["run", "--config", str(tmp_path / "ghost.json")]) == 2
    arr = tmp_path / "arr.json"
    arr.write_text("[]")
    assert cli_main(["run", "--config", str(arr)]) == 2


def test_cli_stage_isolation(tmp_path, fixtures_dir, pooled_embeddings):
    """Each subcommand runs alone against the previous stage's files."""
    out = tmp_path / "steps"
    emb = str(pooled_embeddings)
    assert cli_main(["cka", "--embeddings", emb, "--out", str(out / "cka.csv"),
                     "--bootstrap", "25", "--seed", "11"]) == 0
    assert (out / "cka.csv").is_file()
    assert cli_main(["fit", "--embeddings", emb,
                     "--out", str(out / "cka_fit.csv")]) == 0
    assert (out / "cka_fit.csv").is_file()
    assert cli_main(["diffusion", "--embeddings", emb, "--out", str(out),
                     "--coords", "3"]) == 0
    assert (out / "diffusion_report.json").is_file()
    assert cli_main(["render", "--out", str(out)]) == 0
    assert (out / "figures" / "cka_heatmap.svg").is_file()


def test_cli_diffusion_mode_restriction(tmp_path, pooled_embeddings):
    out = tmp_path / "intra_only"
    assert cli_main(["diffusion", "--embeddings", str(pooled_embeddings),
                     "--out", str(out), "--mode", "intra", "--coords", "3"]) == 0
    report = json.loads((out / "diffusion_report.json").read_text())
    assert report["inter"] == []
    assert report["intra"]
    assert not list(out.glob("diffusion_inter_*.csv"))

    out = tmp_path / "inter_only"
    assert cli_main(["diffusion", "--embeddings", str(pooled_embeddings),
                     "--out", str(out), "--mode", "inter", "--coords", "3"]) == 0
    report = json.loads((out / "diffusion_report.json").read_text())
    assert report["intra"] == []
    assert not (out / "diffusion_intra.csv").exists()
    assert list(out.glob("diffusion_inter_*.csv"))


def test_cli_seed_flag_overrides_config(tmp_path, fixtures_dir, pooled_embeddings):
    out = tmp_path / "seeded"
    out.mkdir()
    (out / "embeddings.embs").write_bytes(pooled_embeddings.read_bytes())
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(
        doc_for(out, fixtures_dir, ["cka"], cka={"bootstrap_resamples": 25})))
    assert cli_main(["cka", "--config", str(cfg_path), "--seed", "7"]) == 0
    summary = json.loads((out / "run_summary.json").read_text())
    assert summary["config"]["seed"] == 7
    assert summary["config"]["cka"]["rng_seed"] == 7


def test_artifact_override_lands_in_summary(tmp_path, fixtures_dir):
    out = tmp_path / "custom"
    doc = doc_for(out, fixtures_dir, ["pool"],
                  artifacts={"embeddings": "custom.embs"})
    summary = run_pipeline(PipelineConfig.from_dict(doc))
    assert (out / "custom.embs").is_file()
    assert "custom.embs" in summary["artifacts"]
    assert summary["config"]["artifacts"] == {"embeddings": "custom.embs"}


def test_cli_mix_flags(tmp_path, fixtures_dir):
    out = tmp_path / "mixed"
    assert cli_main(["mix",
                     "--clean", str(fixtures_dir / "audio" / "clean"),
                     "--noise", str(fixtures_dir / "audio" / "noise"),
                     "--out", str(out),
                     "--snr-min", "0", "--snr-max", "1",
                     "--clip-s", "2.0", "--window-s", "1.0",
                     "--seed", "5"]) == 0
    manifest = json.loads((out / "mixtures" / "manifest.json").read_text())
    # 4 utterances x 2 noise types x 2 SNRs
    assert len(manifest["entries"]) == 16
    wavs = list((out / "mixtures").rglob("*.wav"))
    assert len(wavs) == 16


def test_cli_mix_rejects_inverted_snr_range(tmp_path, fixtures_dir):
    assert cli_main(["mix",
                     "--clean", str(fixtures_dir / "audio" / "clean"),
                     "--noise", str(fixtures_dir / "audio" / "noise"),
                     "--out", str(tmp_path / "x"),
                     "--snr-min", "10", "--snr-max", "0",
                     "--seed", "5"]) == 2
