"""Command-line interface: run inference, verify bundles, score predictions,
serve the local viewer API.

Exit codes: 0 success, 1 input/usage error (bad paths, bad bundles, bad
CSVs), 2 pipeline error (a stage failed on an otherwise-accepted input).
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .encoder import DEFAULT_BATCH_SIZE
from .engine import compute_metrics, export_geojson, report_to_dict, run_inference
from .errors import PipelineError, SlideSpinError
from .slide_io import open_slide
from .tissue import detect_tissue
from .zoo import ModelRef, resolve_model, verify_bundle

SLIDE_SUFFIXES = (".tif", ".tiff")


@click.group()
def cli() -> None:
    """Specimen-level whole-slide inference."""


def _is_slide(path: Path) -> bool:
    if path.is_dir():
        return (path / "pyramid.json").is_file()
    return path.suffix.lower() in SLIDE_SUFFIXES


def _iter_slides(directory: Path):
    return sorted(
        (p for p in directory.iterdir() if _is_slide(p)), key=lambda p: p.name
    )


def _dump_mask_pgm(wsi: Path, dest: Path) -> None:
    with open_slide(wsi) as slide:
        mask = detect_tissue(slide)
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    dest.write_bytes(header + (mask.bits * 255).tobytes())


def _write_output(doc: dict, out: Path | None) -> None:
    text = json.dumps(doc, indent=2)
    if out is None:
        click.echo(text)
    else:
        out.write_text(text + "\n")


@cli.command()
@click.option("--wsi", type=click.Path(exists=True, path_type=Path), help="One slide.")
@click.option(
    "--wsi-dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="Directory of slides (batch mode).",
)
@click.option("--model", "model_ref", required=True, help="Bundle dir or base URL.")
@click.option("--out", type=click.Path(path_type=Path), help="Output file.")
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["json", "geojson"]),
    default="json",
    show_default=True,
)
@click.option("--patch-size", type=int, help="Override manifest patch size (px).")
@click.option("--tissue-threshold", type=float, help="Override tissue fraction cutoff.")
@click.option("--batch-size", type=int, default=DEFAULT_BATCH_SIZE, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option(
    "--dump-mask",
    type=click.Path(path_type=Path),
    help="Also write the tissue mask as a PGM image.",
)
def run(wsi, wsi_dir, model_ref, out, fmt, patch_size, tissue_threshold, batch_size, threads, dump_mask):
    """Run specimen-level inference on one slide or a directory of slides."""
    if (wsi is None) == (wsi_dir is None):
        raise click.UsageError("provide exactly one of --wsi or --wsi-dir")
    overrides = {"patch_size_px": patch_size, "tissue_threshold": tissue_threshold}

    if wsi is not None:
        report = run_inference(
            wsi, model_ref, overrides=overrides, batch_size=batch_size, threads=threads
        )
        if dump_mask is not None:
            _dump_mask_pgm(wsi, dump_mask)
        if fmt == "geojson":
            doc = export_geojson(report.plan, report.result, report)
        else:
            doc = report_to_dict(report)
        _write_output(doc, out)
        return

    # batch mode: JSON-lines per slide + CSV summary next to it
    if out is None:
        raise click.UsageError("--wsi-dir needs --out for the JSONL records")
    if fmt != "json":
        raise click.UsageError("--wsi-dir only supports --format json")
    slides = _iter_slides(wsi_dir)
    if not slides:
        raise click.UsageError(f"no slides found in {wsi_dir}")
    reports = []
    with open(out, "w", encoding="utf-8") as jsonl:
        for slide_path in slides:
            report = run_inference(
                slide_path,
                model_ref,
                overrides=overrides,
                batch_size=batch_size,
                threads=threads,
            )
            reports.append(report)
            jsonl.write(json.dumps(report_to_dict(report)) + "\n")
    csv_path = out.with_suffix(".csv")
    class_names = reports[0].result.class_names
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["slide", "predicted_class", "n_patches", "total_ms"]
            + [f"prob_{name}" for name in class_names]
        )
        for report in reports:
            writer.writerow(
                [
                    Path(report.slide_path).name,
                    report.predicted_class,
                    report.n_patches,
                    report.durations_ms["total"],
                ]
                + [f"{p:.6f}" for p in report.result.probs]
            )
    click.echo(f"wrote {len(reports)} records to {out} and summary to {csv_path}")


@cli.command()
@click.option("--model", "model_ref", required=True, help="Bundle dir or base URL.")
def verify(model_ref):
    """Resolve a bundle and deep-check manifest, checksums, and weights."""
    bundle_dir = resolve_model(ModelRef.parse(model_ref))
    report = verify_bundle(bundle_dir)
    if report.ok:
        click.echo(f"OK {report.manifest.model_name} ({bundle_dir})")
        return
    for problem in report.problems:
        click.echo(f"problem: {problem}", err=True)
    raise SlideSpinError(f"bundle verification failed with {len(report.problems)} problem(s)")


def _read_label_csv(path: Path) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"id", "label"} <= set(reader.fieldnames):
            raise click.UsageError(f"{path}: need columns 'id' and 'label'")
        rows = {}
        for record in reader:
            rows[record["id"]] = record["label"]
    if not rows:
        raise click.UsageError(f"{path}: no data rows")
    return rows


@cli.command()
@click.option("--pred", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--truth", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--positive", required=True, help="Label treated as the positive class.")
def metrics(pred, truth, positive):
    """Score prediction CSV (id,label) against truth CSV; prints JSON metrics."""
    pred_rows = _read_label_csv(pred)
    truth_rows = _read_label_csv(truth)
    if set(pred_rows) != set(truth_rows):
        missing = set(truth_rows) ^ set(pred_rows)
        raise click.UsageError(
            f"prediction and truth ids differ (e.g. {sorted(missing)[:3]})"
        )
    ids = sorted(pred_rows)
    pred_labels = [1 if pred_rows[i] == positive else 0 for i in ids]
    true_labels = [1 if truth_rows[i] == positive else 0 for i in ids]
    result = compute_metrics(pred_labels, true_labels, positive_index=1)
    click.echo(
        json.dumps(
            {
                "n": len(ids),
                "tp": result.tp,
                "tn": result.tn,
                "fp": result.fp,
                "fn": result.fn,
                "sensitivity": result.sensitivity,
                "specificity": result.specificity,
                "precision": result.precision,
                "balanced_accuracy": result.balanced_accuracy,
                "undefined": list(result.undefined),
            },
            indent=2,
        )
    )


@cli.command()
@click.option(
    "--models",
    "models_dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    required=True,
)
@click.option(
    "--slides",
    "slides_dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    required=True,
)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8077, show_default=True)
def serve(models_dir, slides_dir, host, port):
    """Serve the HTTP API consumed by the browser viewer."""
    import uvicorn

    from .service import create_app

    app = create_app(models_dir=models_dir, slides_dir=slides_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except PipelineError as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except FileNotFoundError as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except SlideSpinError as e:
        click.echo(f"error: {e}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
