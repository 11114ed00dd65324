#!/usr/bin/env python3
"""Run the bundled fixture pipeline end to end.

Mixes the fixture corpus over a 5-point SNR grid, pools the committed
synthetic activations, computes similarity profiles and trend fits,
builds the diffusion-map geometry, and renders the SVG report. The
config is seeded, so two runs produce identical artifact trees.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from snrprobe.pipeline import PipelineConfig, run_pipeline
from snrprobe.regression import read_fit_csv

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=ROOT / "out",
                        help="output directory (default: ./out)")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads")
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")

    doc = json.loads((ROOT / "fixtures" / "pipeline.json").read_text())
    for key, value in doc["paths"].items():
        if key != "output_dir" and value:
            doc["paths"][key] = str(ROOT / value)
    doc["paths"]["output_dir"] = str(args.out)
    doc["jobs"] = args.jobs

    config = PipelineConfig.from_dict(doc)
    summary = run_pipeline(config)

    print(f"ran stages: {', '.join(summary['stages'])}")
    print(f"{len(summary['artifacts'])} artifacts under {args.out}")
    fits = sorted(read_fit_csv(config.artifact("fit_csv")),
                  key=lambda r: r["depth_index"])
    print("similarity-vs-SNR slope by depth:")
    for row in fits:
        print(f"  {row['layer_id']:<12} slope {row['slope']:+.5f}  "
              f"R2 {row['r_squared']:.3f}")
    report = json.loads(Path(config.artifact("report_json")).read_text())
    excluded = sorted({l for snap in report["inter"] for l in snap["excluded"]})
    if excluded:
        print(f"layers outside the shared inter-layer maps: {', '.join(excluded)}")
    print(f"figures: {config.artifact('figures_dir')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
