"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or processing error.

An optional ``--config FILE`` JSON object supplies values for any option of
the chosen subcommand (keys spelled like the long flag, with ``-`` or
``_``). Flags given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .audio_io import read_wav
from .errors import EmptySplit, IoFailure, PcvcError, UnknownSpeaker
from .manifest import read_manifest
from .mfcc import MfccConfig, mfcc
from .mlp import TrainOptions, load_model, save_model
from .pipeline import (
    default_test_speakers,
    evaluate,
    predict_file,
    split_by_speaker,
    train_pipeline,
)
from .segmenter import SegmentParams, extract_vowel
from .synth_corpus import CorpusConfig, DEFAULT_SAMPLE_RATE, generate_corpus

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

log = logging.getLogger("pcvc_vowels")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_SEG_DEFAULTS = {"frame_ms": 10.0, "hop_ms": 5.0, "lead_s": 0.25, "pad_ms": 30.0, "min_run_ms": 40.0}
_MFCC_DEFAULTS = {"mfcc_frame_ms": 20.0, "mfcc_hop_ms": 10.0, "bands": 100, "coeffs": 50, "preemphasis": 0.0}
DEFAULTS = {
    "synth": {"speakers": 10, "seed": 0, "consonants": 23, "sample_rate": DEFAULT_SAMPLE_RATE, "bit_depth": 16},
    "segment": _SEG_DEFAULTS,
    "features": {**_SEG_DEFAULTS, **_MFCC_DEFAULTS},
    "train": {**_SEG_DEFAULTS, **_MFCC_DEFAULTS, "epochs": 1000, "seed": 0, "hidden": 50, "reg_ratio": 0.5,
              "goal": 1e-6, "min_grad": 1e-6},
    "eval": {},
    "predict": {},
}


def _seg_options(p):
    g = p.add_argument_group("segmentation")
    g.add_argument("--frame-ms", type=float, help="RMS window (default 10)")
    g.add_argument("--hop-ms", type=float, help="RMS hop (default 5)")
    g.add_argument("--lead-s", type=float, help="leading silence used for the noise ceiling (default 0.25)")
    g.add_argument("--pad-ms", type=float, help="margin added around the vowel (default 30)")
    g.add_argument("--min-run-ms", type=float, help="shortest accepted loud run (default 40)")


def _mfcc_options(p):
    g = p.add_argument_group("MFCC")
    g.add_argument("--mfcc-frame-ms", type=float, help="analysis window (default 20)")
    g.add_argument("--mfcc-hop-ms", type=float, help="analysis hop (default 10)")
    g.add_argument("--bands", type=int, help="mel bands (default 100)")
    g.add_argument("--coeffs", type=int, help="cepstral coefficients kept (default 50)")
    g.add_argument("--preemphasis", type=float, help="pre-emphasis coefficient, 0 disables (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pcvc-vowels", description="Vowel recognition on PCVC-style consonant-vowel clips.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with option values")
        return p

    p = command("synth", "generate a synthetic PCVC-shaped corpus")
    p.add_argument("--speakers", type=int, help="number of speakers (default 10)")
    p.add_argument("--seed", type=int, help="generator seed (default 0)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--consonants", type=int, help="use the first K of the 23 consonants (default 23)")
    p.add_argument("--sample-rate", type=int, help="Hz (default 16000)")
    p.add_argument("--bit-depth", type=int, choices=(16, 32), help="WAV sample format (default 16)")

    p = command("segment", "locate the vowel in one WAV file")
    p.add_argument("file")
    p.add_argument("--json", action="store_true", default=None)
    _seg_options(p)

    p = command("features", "write per-frame MFCCs of the vowel as CSV")
    p.add_argument("file")
    p.add_argument("--out", help="CSV path; a .json config snapshot is written beside it")
    _seg_options(p)
    _mfcc_options(p)

    p = command("train", "train on all but the held-out speakers")
    p.add_argument("--manifest", help="manifest CSV")
    p.add_argument("--test-speakers", help="comma-separated held-out speaker ids (default: last two)")
    p.add_argument("--model", help="output model JSON")
    p.add_argument("--epochs", type=int, help="SCG iteration limit (default 1000)")
    p.add_argument("--seed", type=int, help="weight init seed (default 0)")
    p.add_argument("--hidden", type=int, help="hidden units (default 50)")
    p.add_argument("--reg-ratio", type=float, help="weight of mean squared weights in the objective (default 0.5)")
    p.add_argument("--goal", type=float, help="stop when performance drops below this (default 1e-6)")
    p.add_argument("--min-grad", type=float, help="stop when the gradient norm drops below this (default 1e-6)")
    p.add_argument("--json", action="store_true", default=None)
    _seg_options(p)
    _mfcc_options(p)

    p = command("eval", "per-vowel recognition percentages on a manifest")
    p.add_argument("--model", help="model JSON")
    p.add_argument("--manifest", help="manifest CSV")
    p.add_argument("--speakers", help="comma-separated speaker ids to evaluate (default: all not used in training)")
    p.add_argument("--include-train-speakers", action="store_true", default=None,
                   help="also score speakers the model was trained on")
    p.add_argument("--json", action="store_true", default=None)
    p.add_argument("--out", help="also write the JSON report here")

    p = command("predict", "classify the vowel in one WAV file")
    p.add_argument("--model", help="model JSON")
    p.add_argument("file")
    return parser


def _merge_config(args) -> dict:
    opts = {k: v for k, v in vars(args).items() if k not in ("config", "command", "verbose")}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in raw.items():
            dest = key.lstrip("-").replace("-", "_")
            if dest not in opts:
                raise UsageError(f"config key {key!r} is not an option of '{args.command}'")
            if opts[dest] is None:
                opts[dest] = value
    for key, value in DEFAULTS[args.command].items():
        if opts[key] is None:
            opts[key] = value
    return opts


def _require(opts, *names):
    missing = [n for n in names if not opts.get(n)]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _csv_list(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [str(t) for t in text]
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _seg_params(o) -> SegmentParams:
    return SegmentParams(o["frame_ms"], o["hop_ms"], o["lead_s"], o["pad_ms"], o["min_run_ms"])


def _mfcc_cfg(o) -> MfccConfig:
    try:
        return MfccConfig(frame_ms=o["mfcc_frame_ms"], hop_ms=o["mfcc_hop_ms"], n_bands=o["bands"],
                          n_coeffs=o["coeffs"], preemphasis=o["preemphasis"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False)


def cmd_synth(o):
    _require(o, "out")
    if not 1 <= o["consonants"] <= 23:
        raise UsageError("--consonants must lie in 1..23")
    if o["speakers"] < 1:
        raise UsageError("--speakers must be at least 1")
    cfg = CorpusConfig(n_speakers=o["speakers"], seed=o["seed"], sample_rate=o["sample_rate"],
                       consonants=list(range(o["consonants"])), bit_depth=o["bit_depth"])
    manifest = generate_corpus(cfg, o["out"])
    print(f"wrote {len(manifest)} clips for {len(manifest.speakers)} speakers to {o['out']}")


def cmd_segment(o):
    seg = extract_vowel(read_wav(o["file"]), _seg_params(o))
    if o["json"]:
        print(_dump(seg.to_json()))
    else:
        print(f"vowel {seg.start_s:.4f}s - {seg.end_s:.4f}s  "
              f"(noise ceiling {seg.noise_ceiling:.6g}, threshold {seg.threshold:.6g})")


def cmd_features(o):
    _require(o, "out")
    clip = read_wav(o["file"])
    seg_params, cfg = _seg_params(o), _mfcc_cfg(o)
    seg = extract_vowel(clip, seg_params)
    m = mfcc(clip, seg, cfg)
    out = Path(o["out"])
    snapshot = {"mfcc": cfg.to_dict(), "segment_params": seg_params.to_dict(), "segment": seg.to_json(),
                "sample_rate": clip.sample_rate, "n_frames": m.n_frames, "source": str(o["file"])}
    try:
        with out.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"c{i}" for i in range(cfg.n_coeffs)])
            w.writerows([[repr(float(v)) for v in row] for row in m.frames])
        out.with_suffix(".json").write_text(_dump(snapshot) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {out}: {exc}") from exc
    print(f"wrote {m.n_frames} x {cfg.n_coeffs} MFCC matrix to {out}")


def cmd_train(o):
    _require(o, "manifest", "model")
    manifest = read_manifest(o["manifest"])
    held_out = _csv_list(o["test_speakers"]) or default_test_speakers(manifest)
    train, _ = split_by_speaker(manifest, held_out)
    try:
        opts = TrainOptions(max_epochs=o["epochs"], gradient_tolerance=o["min_grad"],
                            performance_goal=o["goal"], reg_ratio=o["reg_ratio"], seed=o["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = train_pipeline(train, _mfcc_cfg(o), opts, _seg_params(o), n_hidden=o["hidden"])
    result.model.config["held_out_speakers"] = sorted(held_out)
    save_model(result.model, o["model"])
    summary = {**result.report.to_dict(), "n_examples": result.n_examples, "n_skipped": len(result.skipped),
               "train_speakers": train.speakers, "held_out_speakers": sorted(held_out), "model": str(o["model"])}
    if o["json"]:
        print(_dump(summary))
    else:
        print(f"trained on {result.n_examples} clips from {', '.join(train.speakers)} "
              f"({len(result.skipped)} skipped); held out {', '.join(sorted(held_out))}")
        print(f"performance {summary['initial_performance']:.6g} -> {summary['final_performance']:.6g} "
              f"after {summary['iterations']} iterations ({summary['stop_reason']})")
        print(f"model written to {o['model']}")


def cmd_eval(o):
    _require(o, "model", "manifest")
    model = load_model(o["model"])
    manifest = read_manifest(o["manifest"])
    speakers = _csv_list(o["speakers"])
    if speakers:
        unknown = sorted(set(speakers) - set(manifest.speakers))
        if unknown:
            raise UnknownSpeaker(f"speakers not in manifest: {', '.join(unknown)}")
        manifest = manifest.subset(e for e in manifest if e.speaker in speakers)
    if not o["include_train_speakers"]:
        seen = set(model.config.get("train_speakers", []))
        kept = [e for e in manifest if e.speaker not in seen]
        if len(kept) < len(manifest):
            log.info("excluding %d clips from training speakers", len(manifest) - len(kept))
        manifest = manifest.subset(kept)
    if not len(manifest):
        raise EmptySplit("no clips left to evaluate (all belong to training speakers?)")
    report = evaluate(model, manifest)
    doc = report.to_json()
    doc["speakers"] = manifest.speakers
    if o["out"]:
        Path(o["out"]).write_text(_dump(doc) + "\n", encoding="utf-8")
    print(_dump(doc) if o["json"] else report.table())


def cmd_predict(o):
    _require(o, "model")
    pred = predict_file(load_model(o["model"]), o["file"])
    print(_dump(pred.to_json()))


COMMANDS = {"synth": cmd_synth, "segment": cmd_segment, "features": cmd_features,
            "train": cmd_train, "eval": cmd_eval, "predict": cmd_predict}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](_merge_config(args))
    except UsageError as exc:
        print(f"pcvc-vowels {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PcvcError as exc:
        print(f"pcvc-vowels {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
