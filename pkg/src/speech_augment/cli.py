"""Command-line front end.

Subcommands: augment, rir, score, manifest, features. Log verbosity comes
from the SPEECH_AUGMENT_LOG environment variable (DEBUG/INFO/WARNING/...).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .audio_io import AudioClip, load_wav, save_wav, save_wav_float32, to_canonical
from .manifest import Group, load_manifest, make_folds, plan_doubling, save_manifest
from .pipeline import RunConfig, run_augmentation
from .pitch import compute_beta
from .reverb import RoomSpec, generate_rir
from .scoring import crossfold_report, per, read_trn, score_corpus
from .spectral import extract_features, read_features, synthesize_from_features, write_features

log = logging.getLogger("speech_augment")


def _floats(text: str, n: int, flag: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"{flag} wants {n} comma-separated values")
    return tuple(parts)


def _cmd_augment(args) -> int:
    params = {}
    if args.method == "vtlp" and args.alpha is not None:
        params["alpha"] = args.alpha
    if args.method == "reverb" and args.rir is not None:
        params["rir"] = args.rir
    if args.method == "pitch":
        if args.beta is not None:
            params["beta"] = args.beta
        elif args.beta_from_stats is not None:
            clp_path, normal_path = args.beta_from_stats
            clp = json.loads(Path(clp_path).read_text())
            normal = json.loads(Path(normal_path).read_text())
            result = compute_beta(clp, normal)
            if result.clamped:
                log.warning("beta clamped into guard range; using %.3f", result.beta)
            params["beta"] = result.beta
        else:
            print("augment --method pitch needs --beta or --beta-from-stats", file=sys.stderr)
            return 2
    if args.method == "rate":
        if args.factor is not None:
            params["factor"] = args.factor
        elif args.pair is not None:
            params["pair"] = args.pair
        else:
            print("augment --method rate needs --factor or --pair", file=sys.stderr)
            return 2

    config = RunConfig(
        method=args.method,
        seed=args.seed,
        input_manifest=args.manifest,
        output_dir=args.out,
        method_params=params,
        worker_count=args.workers,
    )
    report = run_augmentation(config)
    print(f"manifest: {report.manifest_path}")
    print(f"augmented: {len(report.written)}  failed: {len(report.failures)}")
    for rec_id, err in report.failures:
        print(f"  FAILED {rec_id}: {err}", file=sys.stderr)
    return 0 if report.ok else 1


def _cmd_rir(args) -> int:
    refl = args.refl
    coeffs = (refl,) * 6 if len(refl) == 1 else tuple(refl)
    if len(coeffs) != 6:
        print("--refl wants 1 or 6 comma-separated coefficients", file=sys.stderr)
        return 2
    room = RoomSpec(
        dimensions=args.room,
        source=args.src,
        mic=args.mic,
        reflection_coeffs=coeffs,
        max_order=args.order,
        sample_rate=args.rate,
    )
    rir = generate_rir(room)
    save_wav_float32(AudioClip(rir.samples, rir.sample_rate), args.out)
    print(f"wrote {args.out}: {len(rir.samples)} samples at {rir.sample_rate} Hz")
    return 0


def _cmd_score(args) -> int:
    refs = read_trn(args.ref)
    hyps = read_trn(args.hyp)
    result = score_corpus(refs, hyps)

    lines = ["id\tref_len\thits\tsub\tdel\tins\tper"]
    for utt_id in sorted(result.utterances):
        c = result.utterances[utt_id]
        utt_per = per(c) if c.ref_len else float("nan")
        lines.append(
            f"{utt_id}\t{c.ref_len}\t{c.hits}\t{c.substitutions}"
            f"\t{c.deletions}\t{c.insertions}\t{utt_per:.2f}"
        )
    tsv = "\n".join(lines)
    if args.tsv:
        Path(args.tsv).write_text(tsv + "\n")
    else:
        print(tsv)

    t = result.totals
    print("--- summary ---")
    print(f"utterances: {len(result.utterances)}")
    print(f"ref phones: {t.ref_len}  S: {t.substitutions}  D: {t.deletions}  I: {t.insertions}")
    print(f"corpus PER (micro): {result.micro_per:.2f}%")
    print(f"mean utterance PER (macro): {result.macro_per:.2f}%")
    return 0


def _cmd_manifest(args) -> int:
    if args.action == "validate":
        records = load_manifest(args.path)
        print(f"ok: {len(records)} records")
        return 0
    if args.action == "folds":
        records = load_manifest(args.path)
        plan = make_folds(records, args.seed, Group(args.group))
        for k, fold in enumerate(plan.folds):
            genders = "-".join(g.value for g in fold.genders)
            print(f"fold {k} ({genders}): test speakers {', '.join(fold.test_speakers)}")
        return 0
    # double
    records = load_manifest(args.path)
    params = {}
    if args.alpha is not None:
        params["alpha"] = args.alpha
    if args.beta is not None:
        params["beta"] = args.beta
    if args.factor is not None:
        params["factor"] = args.factor
    planned = plan_doubling(records, args.method, args.seed, params)
    save_manifest(planned, args.out)
    print(f"wrote {args.out}: {len(planned)} records ({len(records)} originals)")
    return 0


def _cmd_features(args) -> int:
    if args.action == "extract":
        clip = to_canonical(load_wav(args.input))
        feats, pitch_track = extract_features(clip)
        write_features(args.output, feats, pitch_track)
        print(f"wrote {args.output}: {feats.frame_count} frames x {feats.dim}")
        return 0
    feats, pitch_track = read_features(args.input)
    clip = synthesize_from_features(feats, pitch_track)
    clipped = save_wav(clip, args.output)
    print(f"wrote {args.output}: {len(clip.samples)} samples ({clipped} clipped)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speech-augment")
    sub = parser.add_subparsers(dest="command", required=True)

    p_aug = sub.add_parser("augment", help="double a manifest with one augmentation method")
    p_aug.add_argument("--method", required=True,
                       choices=["vtlp", "reverb", "pitch", "rate", "cyclegan-features"])
    p_aug.add_argument("--manifest", required=True)
    p_aug.add_argument("--out", required=True)
    p_aug.add_argument("--seed", type=int, default=0)
    p_aug.add_argument("--workers", type=int, default=1)
    p_aug.add_argument("--alpha", type=float, help="fixed warp factor (vtlp)")
    p_aug.add_argument("--rir", help="impulse-response WAV instead of simulated rooms (reverb)")
    p_aug.add_argument("--beta", type=float, help="fixed pitch factor (pitch)")
    p_aug.add_argument("--beta-from-stats", nargs=2, metavar=("CLP_JSON", "NORMAL_JSON"),
                       help="derive beta from per-speaker mean-F0 JSON arrays (pitch)")
    p_aug.add_argument("--factor", type=float, help="global rate factor (rate)")
    p_aug.add_argument("--pair", help="reference WAV or id->wav JSON map for rate matching")
    p_aug.set_defaults(func=_cmd_augment)

    p_rir = sub.add_parser("rir", help="simulate a room impulse response")
    p_rir.add_argument("--room", required=True, type=lambda s: _floats(s, 3, "--room"))
    p_rir.add_argument("--src", required=True, type=lambda s: _floats(s, 3, "--src"))
    p_rir.add_argument("--mic", required=True, type=lambda s: _floats(s, 3, "--mic"))
    p_rir.add_argument("--refl", default="0.7", type=lambda s: tuple(float(v) for v in s.split(",")))
    p_rir.add_argument("--order", type=int, default=10)
    p_rir.add_argument("--rate", type=int, default=16000)
    p_rir.add_argument("--out", required=True)
    p_rir.set_defaults(func=_cmd_rir)

    p_score = sub.add_parser("score", help="phone error rate from .trn transcripts")
    p_score.add_argument("--ref", required=True)
    p_score.add_argument("--hyp", required=True)
    p_score.add_argument("--tsv", help="write per-utterance counts here instead of stdout")
    p_score.set_defaults(func=_cmd_score)

    p_man = sub.add_parser("manifest", help="validate, fold, or double a manifest")
    man_sub = p_man.add_subparsers(dest="action", required=True)
    m_val = man_sub.add_parser("validate")
    m_val.add_argument("path")
    m_val.set_defaults(func=_cmd_manifest)
    m_folds = man_sub.add_parser("folds")
    m_folds.add_argument("path")
    m_folds.add_argument("--seed", type=int, default=0)
    m_folds.add_argument("--group", default="CLP", choices=["CLP", "NORMAL"])
    m_folds.set_defaults(func=_cmd_manifest)
    m_dbl = man_sub.add_parser("double")
    m_dbl.add_argument("path")
    m_dbl.add_argument("--method", required=True,
                       choices=["vtlp", "reverb", "pitch", "rate", "cyclegan-features"])
    m_dbl.add_argument("--seed", type=int, default=0)
    m_dbl.add_argument("--out", required=True)
    m_dbl.add_argument("--alpha", type=float)
    m_dbl.add_argument("--beta", type=float)
    m_dbl.add_argument("--factor", type=float)
    m_dbl.set_defaults(func=_cmd_manifest)

    p_feat = sub.add_parser("features", help="extract or resynthesize MCP1 feature files")
    feat_sub = p_feat.add_subparsers(dest="action", required=True)
    f_ext = feat_sub.add_parser("extract")
    f_ext.add_argument("input")
    f_ext.add_argument("output")
    f_ext.set_defaults(func=_cmd_features)
    f_syn = feat_sub.add_parser("synth")
    f_syn.add_argument("input")
    f_syn.add_argument("output")
    f_syn.set_defaults(func=_cmd_features)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("SPEECH_AUGMENT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
