"""Batch orchestration: manifest in, doubled dataset out.

Every stochastic choice is derived from (run seed, record id), never from
worker scheduling, so the same config produces byte-identical outputs at
any worker count. Failures skip the affected record and are summarized
instead of aborting the batch.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .audio_io import load_wav, save_wav, to_canonical
from .manifest import METHODS, load_manifest, plan_doubling, save_manifest
from .pitch import PitchModSpec, apply_pitch_mod
from .rate import apply_rate, constant_rate_curve, match_rate
from .reverb import ImpulseResponse, apply_reverb, default_room, generate_rir
from .spectral import extract_features, write_features
from .vtlp import WarpSpec, apply_vtlp

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    method: str
    seed: int
    input_manifest: str
    output_dir: str
    method_params: dict = field(default_factory=dict)
    worker_count: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.worker_count < 1:
            raise ValueError(f"worker_count must be >= 1, got {self.worker_count}")


@dataclass
class RunReport:
    manifest_path: str
    written: list
    failures: list  # (record id, error message)

    @property
    def ok(self) -> bool:
        return not self.failures


def _resolve(path: str, base: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base / p


def _pair_path(pair: str, source_id: str, manifest_dir: Path) -> Path:
    """A .json pair value maps source ids to reference WAVs; else one WAV for all."""
    if pair.endswith(".json"):
        mapping = json.loads(_resolve(pair, manifest_dir).read_text())
        if source_id not in mapping:
            raise KeyError(f"pairing file has no entry for record {source_id!r}")
        return _resolve(mapping[source_id], manifest_dir)
    return _resolve(pair, manifest_dir)


def _augment_task(task: tuple) -> tuple:
    """Worker body: one augmented record from one source file."""
    rec_id, source_id, method, params, src, dst, manifest_dir = task
    try:
        clip = to_canonical(load_wav(src))
        clipped = 0
        if method == "vtlp":
            out = apply_vtlp(clip, WarpSpec(params["alpha"]))
            clipped = save_wav(out, dst)
        elif method == "reverb":
            if "rir" in params:
                rir_clip = load_wav(_resolve(params["rir"], manifest_dir))
                rir = ImpulseResponse(rir_clip.samples, rir_clip.sample_rate)
            else:
                rir = generate_rir(default_room(params["room_seed"]))
            out = apply_reverb(clip, rir)
            clipped = save_wav(out, dst)
        elif method == "pitch":
            out = apply_pitch_mod(clip, PitchModSpec(params["beta"]))
            clipped = save_wav(out, dst)
        elif method == "rate":
            if "factor" in params:
                n_frames = max(1, len(clip.samples) // 80)
                out = apply_rate(clip, constant_rate_curve(params["factor"], n_frames))
            else:
                paired = to_canonical(load_wav(_pair_path(params["pair"], source_id, manifest_dir)))
                out = match_rate(clip, paired)
            clipped = save_wav(out, dst)
        else:  # cyclegan-features
            feats, pitch_track = extract_features(clip)
            write_features(dst, feats, pitch_track)
        return (rec_id, None, clipped)
    except Exception as exc:  # noqa: BLE001 - skip-and-report per record
        return (rec_id, f"{type(exc).__name__}: {exc}", 0)


def run_augmentation(config: RunConfig) -> RunReport:
    """Double the manifest with the configured method.

    Writes the augmented audio (or MCP1 feature files), a run log with the
    per-record parameters, and a new manifest holding originals plus the
    successfully augmented records.
    """
    manifest_path = Path(config.input_manifest)
    manifest_dir = manifest_path.parent
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    records = load_manifest(manifest_path)
    planned = plan_doubling(records, config.method, config.seed, config.method_params)
    originals = planned[: len(records)]
    augmented = planned[len(records) :]

    tasks = []
    for src_rec, aug_rec in zip(originals, augmented):
        tasks.append(
            (
                aug_rec.id,
                src_rec.id,
                config.method,
                aug_rec.origin.params_dict,
                str(_resolve(src_rec.path, manifest_dir)),
                str(out_dir / aug_rec.path),
                manifest_dir,
            )
        )

    if config.worker_count == 1:
        results = [_augment_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=config.worker_count) as pool:
            results = list(pool.map(_augment_task, tasks))

    by_id = {rec_id: (err, clipped) for rec_id, err, clipped in results}
    failures = [(rec_id, err) for rec_id, err, _ in results if err]
    ok_ids = {rec_id for rec_id, err, _ in results if not err}

    out_records = list(originals) + [r for r in augmented if r.id in ok_ids]
    out_manifest = out_dir / "manifest.jsonl"
    save_manifest(out_records, out_manifest)

    log_path = out_dir / "run_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as fh:
        for aug_rec in augmented:
            err, clipped = by_id[aug_rec.id]
            entry = {
                "id": aug_rec.id,
                "source_id": aug_rec.origin.source_id,
                "method": config.method,
                "params": aug_rec.origin.params_dict,
                "status": "error" if err else "ok",
                "output": aug_rec.path if not err else None,
                "clipped_samples": clipped,
            }
            if err:
                entry["error"] = err
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    for rec_id, err in failures:
        log.error("augmentation failed for %s: %s", rec_id, err)
    log.info(
        "%s: %d/%d records augmented into %s",
        config.method, len(ok_ids), len(augmented), out_dir,
    )
    return RunReport(str(out_manifest), sorted(ok_ids), failures)
