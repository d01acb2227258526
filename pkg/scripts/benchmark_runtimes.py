#!/usr/bin/env python3
"""Time the inference pipeline across batch sizes and thread counts.

Runs the demo bundle against a synthetic blob slide (or a slide you supply)
and prints one row per setting with the per-stage durations from the run
report.  Useful for eyeballing how embedding batch size and reader threads
trade off on a given machine.

    python3 scripts/benchmark_runtimes.py
    python3 scripts/benchmark_runtimes.py --slide /data/slides/case1.tif \\
        --model /data/models/my-model --batch-sizes 8 32 --threads 1 2 4
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from slidespin.demo import make_blob_slide, make_demo_bundle  # noqa: E402
from slidespin.engine import run_inference  # noqa: E402

STAGES = ("open", "tissue", "plan", "embed", "aggregate", "total")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--slide", type=Path, help="slide to run (default: synthetic blob)")
    parser.add_argument("--model", type=Path, help="bundle directory (default: demo bundle)")
    parser.add_argument("--batch-sizes", type=int, nargs="+", default=[1, 8, 32])
    parser.add_argument("--threads", type=int, nargs="+", default=[1, 2, 4])
    parser.add_argument("--repeats", type=int, default=3, help="runs per setting; best is kept")
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        slide = args.slide or make_blob_slide(Path(tmp) / "blob")
        model = args.model or make_demo_bundle(Path(tmp) / "bundle")

        header = f"{'batch':>5} {'threads':>7} {'patches':>7}" + "".join(
            f" {s + '_ms':>12}" for s in STAGES
        )
        print(header)
        print("-" * len(header))
        for batch in args.batch_sizes:
            for threads in args.threads:
                best = None
                for _ in range(args.repeats):
                    report = run_inference(slide, model, batch_size=batch, threads=threads)
                    if best is None or report.durations_ms["total"] < best.durations_ms["total"]:
                        best = report
                row = f"{batch:>5} {threads:>7} {best.n_patches:>7}" + "".join(
                    f" {best.durations_ms[s]:>12}" for s in STAGES
                )
                print(row)


if __name__ == "__main__":
    main()
