"""Command-line front door: ``maskwatch analyze | fitscore | synth``.

Exit codes: 0 success, 1 internal error, 2 bad input or configuration.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import os
import sys
from pathlib import Path

import click

from .errors import MaskwatchError, PnmError
from .geometry import RoiRegion, build_roi_raster
from .fitscore import fit_score
from .pipeline import run_analyze
from .pnm import read_mask
from .records import (
    _LineError,
    config_from_dict,
    config_to_dict,
    default_study_config,
    parse_post_line,
    serialize_post,
)
from .report import render_text, write_atomic
from .synth import SynthCorpus, default_synth_params, params_from_dict


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except MaskwatchError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(2)
        except OSError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(2)
        except Exception as e:  # pragma: no cover - internal failure path
            click.echo(f"internal error: {e!r}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Mask-adherence analytics over face/mask detection records."""


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Study config JSON (default: built-in six-city 2020 study).",
)
@click.option(
    "--posts",
    "posts_paths",
    type=click.Path(exists=True, dir_okay=False),
    multiple=True,
    required=True,
    help="Post records, one JSON object per line. Repeatable.",
)
@click.option(
    "--cases",
    "cases_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Case counts CSV (date,city_id,cumulative_cases).",
)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--jobs", type=int, default=None, help="Workers (default: CPU count).")
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["csv", "text"]),
    default="csv",
    help="Stdout summary style; files always include both renderings.",
)
@_guarded
def analyze(config_path, posts_paths, cases_path, out_dir, jobs, fmt):
    """Run the full study battery and write the report bundle."""
    cfg = _load_config(config_path)
    bundle, scan = run_analyze(cfg, list(posts_paths), cases_path, out_dir, jobs=jobs)
    for name, err in scan.errors:
        click.echo(f"warning: {name}: {err}", err=True)
    if scan.n_errors > len(scan.errors):
        click.echo(
            f"warning: {scan.n_errors - len(scan.errors)} further malformed lines",
            err=True,
        )
    if fmt == "text":
        for table in bundle.tables.values():
            click.echo(render_text(table))
    else:
        click.echo(
            f"wrote {len(bundle.tables)} tables to {out_dir} "
            f"({scan.n_records} records, {scan.n_errors} bad lines, "
            f"{scan.n_window_filtered} outside window)"
        )


def _load_config(config_path):
    if config_path is None:
        return default_study_config()
    with open(config_path, "r", encoding="utf-8") as f:
        return config_from_dict(json.load(f))


def run_fitscore(posts_path, bitmap_root, out_path) -> dict:
    """Annotate masked faces with fit scores computed from their bitmaps.

    Faces whose bitmap is missing or unreadable stay unscored and are
    counted; malformed lines pass through unchanged.
    """
    root = Path(bitmap_root)
    counts = {"records": 0, "scored": 0, "skipped": 0, "bad_lines": 0}
    out_lines: list[str] = []
    warnings: list[str] = []
    with open(posts_path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            stripped = raw.strip()
            try:
                item = parse_post_line(stripped) if stripped else None
            except (_LineError, ValueError, TypeError) as e:
                item = None
                warnings.append(f"{posts_path}:{line_no}: {e}")
            if item is None:
                counts["bad_lines"] += 1
                out_lines.append(raw.rstrip("\n"))
                continue
            counts["records"] += 1
            faces = []
            for idx, face in enumerate(item.faces):
                if not face.masked or face.seg_mask_ref is None:
                    faces.append(face)
                    continue
                try:
                    mask = read_mask(root / face.seg_mask_ref)
                    roi = build_roi_raster(
                        face.landmarks, RoiRegion.NOSE_MOUTH, mask.width, mask.height
                    )
                    score = fit_score(mask, roi)
                except (OSError, MaskwatchError) as e:
                    counts["skipped"] += 1
                    warnings.append(
                        f"{posts_path}:{line_no}: face {idx}: {e} (left unscored)"
                    )
                    faces.append(face)
                    continue
                counts["scored"] += 1
                faces.append(dataclasses.replace(face, fit_score=score))
            out_lines.append(
                serialize_post(dataclasses.replace(item, faces=tuple(faces)))
            )
    data = ("\n".join(out_lines) + "\n").encode() if out_lines else b""
    write_atomic(Path(out_path), data)
    counts["warnings"] = warnings
    return counts


@main.command()
@click.option(
    "--posts",
    "posts_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
)
@click.option(
    "--bitmap-root",
    type=click.Path(exists=True, file_okay=False),
    default=None,
    help="Directory seg_mask paths are relative to (default: posts file dir).",
)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@_guarded
def fitscore(posts_path, bitmap_root, out_path):
    """Compute Eq.-style ROI coverage scores for masked faces."""
    root = bitmap_root or str(Path(posts_path).parent)
    counts = run_fitscore(posts_path, root, out_path)
    for w in counts["warnings"][:20]:
        click.echo(f"warning: {w}", err=True)
    click.echo(
        f"{counts['records']} records: {counts['scored']} faces scored, "
        f"{counts['skipped']} left unscored, {counts['bad_lines']} bad lines"
    )


def run_synth(params, cfg, out_dir) -> dict:
    """Generate a deterministic corpus into ``out_dir``.

    Writes posts-<city>.jsonl per city, cases.csv, config.json, and
    manifest.json; posts stream to disk day by day.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = SynthCorpus(params, cfg)
    for city_id in cfg.city_ids:
        path = out / f"posts-{city_id}.jsonl"
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            for day in corpus.days:
                for post in corpus.posts_for_day(city_id, day):
                    f.write(serialize_post(post))
                    f.write("\n")
        os.replace(tmp, path)
    cases_lines = ["date,city_id,cumulative_cases"]
    for city_id in cfg.city_ids:
        for day, count in corpus.case_series[city_id].entries:
            cases_lines.append(f"{day.isoformat()},{city_id},{count}")
    write_atomic(out / "cases.csv", ("\n".join(cases_lines) + "\n").encode())
    write_atomic(
        out / "config.json",
        (json.dumps(config_to_dict(cfg), indent=2) + "\n").encode(),
    )
    write_atomic(
        out / "manifest.json",
        (json.dumps(corpus.manifest, indent=2, sort_keys=True) + "\n").encode(),
    )
    return corpus.manifest


@main.command()
@click.option(
    "--params",
    "params_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Generator params JSON (default: built-in defaults).",
)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@_guarded
def synth(params_path, out_dir):
    """Generate a synthetic corpus with planted ground truth."""
    if params_path is None:
        cfg = default_study_config()
        params = default_synth_params(cfg)
    else:
        with open(params_path, "r", encoding="utf-8") as f:
            doc = json.load(f)
        cfg = (
            config_from_dict(doc["config"])
            if "config" in doc
            else default_study_config()
        )
        params = params_from_dict(doc)
    manifest = run_synth(params, cfg, out_dir)
    total = sum(c["n_posts"] for c in manifest["cities"].values())
    click.echo(f"wrote {total} posts across {len(manifest['cities'])} cities to {out_dir}")


if __name__ == "__main__":
    main()
