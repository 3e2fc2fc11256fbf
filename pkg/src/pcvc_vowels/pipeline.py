"""End-to-end orchestration: speaker split, training, evaluation, single-file prediction.

Training and evaluation both go through :func:`file_features`, so a file
always yields the same feature vector whichever path reads it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .audio_io import read_wav
from .errors import EmptySplit, FeatureDimensionMismatch, NoTrainableExamples, NoVowelFound, UnknownSpeaker
from .manifest import Manifest
from .mfcc import FeatureVector, MfccConfig, mfcc, pool_features
from .mlp import MlpModel, TrainOptions, TrainReport, init_model, predict, train_scg
from .phonemes import VOWELS, VowelLabel, one_hot
from .segmenter import SegmentParams, VowelSegment, extract_vowel

log = logging.getLogger(__name__)

# published per-vowel recognition on the real PCVC recordings; reference only, never asserted
PUBLISHED_RECOGNITION = {"A": 80.0, "I": 96.0, "U": 96.0, "æ": 100.0, "e": 100.0, "o": 92.0}


def split_by_speaker(manifest: Manifest, test_speakers) -> tuple[Manifest, Manifest]:
    test_speakers = set(test_speakers)
    if not test_speakers:
        raise EmptySplit("no test speakers given")
    known = set(manifest.speakers)
    unknown = sorted(test_speakers - known)
    if unknown:
        raise UnknownSpeaker(f"speakers not in manifest: {', '.join(unknown)}")
    if test_speakers >= known:
        raise EmptySplit("holding out every speaker leaves nothing to train on")
    train = [e for e in manifest if e.speaker not in test_speakers]
    test = [e for e in manifest if e.speaker in test_speakers]
    return manifest.subset(train), manifest.subset(test)


def default_test_speakers(manifest: Manifest, n: int = 2) -> list[str]:
    """The last ``n`` speakers in sorted order, leaving at least one for training."""
    speakers = manifest.speakers
    n = min(n, len(speakers) - 1)
    if n < 1:
        raise EmptySplit("need at least two speakers to split")
    return speakers[-n:]


def file_features(path, seg_params: SegmentParams, mfcc_cfg: MfccConfig):
    """Read, segment, MFCC, pool. Returns (FeatureVector, VowelSegment)."""
    clip = read_wav(path)
    segment = extract_vowel(clip, seg_params)
    return pool_features(mfcc(clip, segment, mfcc_cfg)), segment


@dataclass
class FeatureSet:
    X: np.ndarray
    labels: list
    paths: list
    skipped: list = field(default_factory=list)  # (path, vowel, reason)


def featurize_manifest(manifest: Manifest, seg_params: SegmentParams, mfcc_cfg: MfccConfig) -> FeatureSet:
    rows, labels, paths, skipped = [], [], [], []
    for entry in manifest:
        path = manifest.resolve(entry)
        try:
            fv, _ = file_features(path, seg_params, mfcc_cfg)
        except NoVowelFound as exc:
            log.warning("skipping %s: %s", entry.path, exc)
            skipped.append((entry.path, entry.vowel, str(exc)))
            continue
        rows.append(fv.values)
        labels.append(entry.vowel)
        paths.append(entry.path)
    X = np.vstack(rows) if rows else np.empty((0, mfcc_cfg.n_coeffs))
    return FeatureSet(X, labels, paths, skipped)


@dataclass
class TrainResult:
    model: MlpModel
    report: TrainReport
    n_examples: int
    skipped: list


def train_pipeline(train_manifest: Manifest, mfcc_cfg: MfccConfig = MfccConfig(),
                   train_opts: TrainOptions = TrainOptions(), seg_params: SegmentParams = SegmentParams(),
                   n_hidden: int = 50) -> TrainResult:
    feats = featurize_manifest(train_manifest, seg_params, mfcc_cfg)
    if not feats.labels:
        raise NoTrainableExamples(f"all {len(train_manifest)} entries failed segmentation")
    model = init_model(feats.X.shape[1], n_hidden, len(VOWELS), seed=train_opts.seed)
    model, report = train_scg(model, feats.X, one_hot(feats.labels), train_opts)
    model.config.update({
        "mfcc": mfcc_cfg.to_dict(),
        "segment": seg_params.to_dict(),
        "train_speakers": train_manifest.speakers,
        "n_examples": len(feats.labels),
        "n_skipped": len(feats.skipped),
    })
    log.info("trained on %d examples (%d skipped): perf %.5g -> %.5g, %s",
             len(feats.labels), len(feats.skipped), report.initial_performance,
             report.final_performance, report.stop_reason)
    return TrainResult(model, report, len(feats.labels), feats.skipped)


def model_settings(model: MlpModel) -> tuple[SegmentParams, MfccConfig]:
    """Segmentation and MFCC settings recorded in a trained model (defaults if absent)."""
    seg = SegmentParams(**model.config.get("segment", {}))
    cfg = MfccConfig(**model.config.get("mfcc", {}))
    return seg, cfg


@dataclass
class ConfusionMatrix:
    """Rows are true vowels, columns predicted, in :data:`VOWELS` order.

    ``rejected`` counts test clips per true vowel that could not be
    segmented; they score as misses but have no predicted column.
    """

    counts: np.ndarray = field(default_factory=lambda: np.zeros((len(VOWELS), len(VOWELS)), dtype=int))
    rejected: np.ndarray = field(default_factory=lambda: np.zeros(len(VOWELS), dtype=int))

    def add(self, true: VowelLabel, predicted: VowelLabel | None) -> None:
        if predicted is None:
            self.rejected[true.index] += 1
        else:
            self.counts[true.index, predicted.index] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum() + self.rejected.sum())

    def class_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1) + self.rejected

    def per_class_percent(self) -> list:
        totals = self.class_totals()
        return [None if totals[i] == 0 else 100.0 * int(self.counts[i, i]) / int(totals[i])
                for i in range(len(VOWELS))]


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    per_class_percent: list  # None where a vowel had no test clips
    average_percent: float | None

    @classmethod
    def from_confusion(cls, confusion: ConfusionMatrix) -> "EvalReport":
        per = confusion.per_class_percent()
        defined = [p for p in per if p is not None]
        avg = float(np.mean(defined)) if defined else None
        return cls(confusion, per, avg)

    def to_json(self) -> dict:
        return {
            "labels": [v.value for v in VOWELS],
            "confusion": self.confusion.counts.tolist(),
            "rejected": self.confusion.rejected.tolist(),
            "per_class_percent": {v.value: p for v, p in zip(VOWELS, self.per_class_percent)},
            "average_percent": self.average_percent,
            "n_examples": self.confusion.total,
        }

    def table(self) -> str:
        lines = [f"{'Vowel':<8}{'Recognition %':>14}"]
        for v, p in zip(VOWELS, self.per_class_percent):
            lines.append(f"{v.value:<8}{'n/a' if p is None else f'{p:.1f}':>14}")
        avg = "n/a" if self.average_percent is None else f"{self.average_percent:.1f}"
        lines.append(f"{'Average':<8}{avg:>14}")
        return "\n".join(lines)


def report_from_predictions(true_labels, predicted_labels) -> EvalReport:
    cm = ConfusionMatrix()
    for t, p in zip(true_labels, predicted_labels, strict=True):
        cm.add(t, p)
    return EvalReport.from_confusion(cm)


def evaluate(model: MlpModel, test_manifest: Manifest, predictor=predict) -> EvalReport:
    seg, cfg = model_settings(model)
    if cfg.n_coeffs != model.n_inputs:
        raise FeatureDimensionMismatch(f"model takes {model.n_inputs} inputs, features have {cfg.n_coeffs}")
    feats = featurize_manifest(test_manifest, seg, cfg)
    cm = ConfusionMatrix()
    for x, true in zip(feats.X, feats.labels):
        label, _ = predictor(model, x)
        cm.add(true, label)
    for _, true, _ in feats.skipped:
        cm.add(true, None)
    return EvalReport.from_confusion(cm)


@dataclass
class Prediction:
    label: VowelLabel
    scores: np.ndarray
    segment: VowelSegment
    features: FeatureVector

    def to_json(self) -> dict:
        return {
            "label": self.label.value,
            "labels": [v.value for v in VOWELS],
            "scores": [float(s) for s in self.scores],
            "segment": self.segment.to_json(),
        }


def predict_file(model: MlpModel, path) -> Prediction:
    seg, cfg = model_settings(model)
    fv, segment = file_features(path, seg, cfg)
    if len(fv) != model.n_inputs:
        raise FeatureDimensionMismatch(f"model takes {model.n_inputs} inputs, features have {len(fv)}")
    label, scores = predict(model, fv)
    return Prediction(label, scores, segment, fv)
