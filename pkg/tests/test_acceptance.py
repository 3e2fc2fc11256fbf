"""Acceptance gate. Each test prints one PASS/FAIL line via ``record_criterion``."""

import json
import math
import shutil
import time

import numpy as np
import pytest

from pcvc_vowels.audio_io import AudioClip, read_wav, write_wav
from pcvc_vowels.cli import main
from pcvc_vowels.errors import NoVowelFound
from pcvc_vowels.mfcc import dct_matrix, hz_to_mel, mel_to_hz, next_pow2, power_spectrum, frame_signal, MfccConfig
from pcvc_vowels.mlp import (
    TrainOptions,
    forward,
    gradient,
    init_model,
    load_model,
    performance,
    save_model,
    train_scg,
)
from pcvc_vowels.phonemes import VOWELS, VowelLabel
from pcvc_vowels.segmenter import extract_vowel
from pcvc_vowels.synth_corpus import cv_sample_plan, load_profiles, make_speakers, sample_profile, synth_cv_sample

from conftest import FIXTURES, record_criterion

SEED = 2024


def cli(*argv):
    return main([str(a) for a in argv])


def full_run(root, seed=SEED):
    """synth -> train (hold out one speaker) -> eval, all through the CLI."""
    corpus, model, report = root / "corpus", root / "model.json", root / "eval.json"
    t0 = time.perf_counter()
    codes = [
        cli("synth", "--speakers", 4, "--seed", seed, "--out", corpus),
        cli("train", "--manifest", corpus / "manifest.csv", "--test-speakers", "spk04", "--model", model,
            "--seed", seed),
        cli("eval", "--model", model, "--manifest", corpus / "manifest.csv", "--json", "--out", report),
    ]
    return codes, time.perf_counter() - t0


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    roots = [tmp_path_factory.mktemp(f"run{i}") for i in range(2)]
    return roots, [full_run(r) for r in roots]


def test_criterion_1_synthetic_recognition_and_format_compat(two_runs, tmp_path, capsys):
    (root, _), ((codes, elapsed), _) = two_runs
    doc = json.loads((root / "eval.json").read_text(encoding="utf-8"))
    avg = doc["average_percent"]
    ok_run = codes == [0, 0, 0] and doc["speakers"] == ["spk04"] and doc["n_examples"] == 138
    ok = ok_run and avg is not None and avg >= 80.0 and elapsed < 300.0

    data = tmp_path / "pcvc"
    shutil.copytree(FIXTURES / "pcvc_format", data)
    fixture_codes = [cli("predict", "--model", root / "model.json", wav) for wav in sorted(data.glob("*.wav"))]
    fixture_codes.append(cli("eval", "--model", root / "model.json", "--manifest", data / "manifest.csv"))
    capsys.readouterr()
    compat = fixture_codes == [0] * 4

    per = ", ".join(f"{k} {v:.1f}" for k, v in doc["per_class_percent"].items())
    record_criterion(1, "held-out synthetic recognition >= 80% in < 300 s; hand-made fixture runs", ok and compat,
                     f"average {avg:.2f}% ({per}); {elapsed:.1f} s; fixture exit codes {fixture_codes}")
    assert ok and compat


def _fd(model, X, T, gamma, step=1e-5):
    theta = model.params()
    out = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        out[i] = (performance(model.with_params(theta + e), X, T, gamma)
                  - performance(model.with_params(theta - e), X, T, gamma)) / (2 * step)
    return out


def test_criterion_2_gradient_oracle():
    worst = 0.0
    n = 120
    for seed in range(n):
        rng = np.random.default_rng(10_000 + seed)
        n_in, n_hid, n_out = (int(v) for v in rng.integers(1, 6, 3))
        model = init_model(n_in, n_hid, n_out, seed=seed, labels=list(VOWELS[:n_out]))
        model = model.with_params(rng.normal(0, 1, model.n_params))
        X = rng.normal(size=(int(rng.integers(1, 8)), n_in))
        T = rng.uniform(0, 1, (X.shape[0], n_out))
        gamma = float(rng.uniform(0, 1))
        a, f = gradient(model, X, T, gamma), _fd(model, X, T, gamma)
        rel = np.abs(a - f) / np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-8)
        worst = max(worst, float(rel.max()))
    ok = worst <= 1e-5
    record_criterion(2, "backprop vs central differences on random small nets", ok,
                     f"{n} instances, max relative error {worst:.2e}")
    assert ok


def test_criterion_3_dsp_identities():
    # per-frame Parseval on real analysis frames plus odd-sized random ones
    profiles = load_profiles()
    clip = synth_cv_sample(3, profiles[VowelLabel.E], seed=1)
    frames = list(frame_signal(clip, None, MfccConfig()))
    rng = np.random.default_rng(0)
    frames += [rng.uniform(-1, 1, int(n)) for n in rng.integers(1, 1000, 50)]
    parseval = 0.0
    for x in frames:
        n_fft = next_pow2(x.size)
        p = power_spectrum(x)
        total = p[0] + 2 * p[1:-1].sum() + p[-1] if n_fft > 1 else p[0]
        energy = n_fft * float(np.sum(x * x))
        if energy > 0:
            parseval = max(parseval, abs(total - energy) / energy)

    D = dct_matrix(100)
    ortho = float(np.max(np.abs(D @ D.T - np.eye(100))))
    trip = max(abs(mel_to_hz(hz_to_mel(f)) - f) / f for f in (100.0, 1000.0, 8000.0))
    m700 = abs(hz_to_mel(700.0) - 2595 * math.log10(2)) / (2595 * math.log10(2))

    ok = parseval <= 1e-9 and ortho <= 1e-9 and trip <= 1e-9 and m700 <= 1e-9
    record_criterion(3, "Parseval, DCT-II orthonormality, mel round trip, mel(700)", ok,
                     f"parseval {parseval:.1e}, DCT {ortho:.1e}, round trip {trip:.1e}, mel(700) {m700:.1e}")
    assert ok


def test_criterion_4_segmentation():
    profiles = load_profiles()
    speakers = make_speakers(10, seed=SEED)
    rng = np.random.default_rng(SEED)
    ious, scale_ok = [], True
    for i in range(200):
        vowel = VOWELS[i % 6]
        cid = (i * 7) % 23
        profile = sample_profile(profiles[vowel], speakers[i % 10], rng)
        clip = synth_cv_sample(cid, profile, seed=i)
        a, b = cv_sample_plan(cid, seed=i).vowel_interval
        seg = extract_vowel(clip)
        inter = max(0, min(b, seg.end_sample) - max(a, seg.start_sample))
        ious.append(inter / (max(b, seg.end_sample) - min(a, seg.start_sample)))
        quiet = extract_vowel(clip.scaled(0.1))
        scale_ok &= (quiet.start_sample, quiet.end_sample) == (seg.start_sample, seg.end_sample)
    frac = float(np.mean(np.array(ious) >= 0.7))
    try:
        extract_vowel(AudioClip(np.zeros(32000), 16000))
        silence_ok = False
    except NoVowelFound:
        silence_ok = True
    ok = frac >= 0.95 and silence_ok and scale_ok
    record_criterion(4, "segmentation IoU, silence rejection, scale equivariance", ok,
                     f"IoU >= 0.7 on {100 * frac:.1f}% (min {min(ious):.3f}); silence -> NoVowelFound: "
                     f"{silence_ok}; x0.1 boundaries unchanged on all 200: {scale_ok}")
    assert ok


def _monotone(report):
    p = report.performance
    return all(p[i + 1] <= p[i] for i in range(len(report.accepted)))


def test_criterion_5_scg(trained4):
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    T = np.array([[0], [1], [1], [0]], dtype=float)
    reports, converged = [trained4[0].report], 0
    for seed in range(10):
        model = init_model(2, 4, 1, seed=seed, labels=[VowelLabel.A])
        trained, report = train_scg(model, X, T, TrainOptions(max_epochs=500, reg_ratio=0.0, seed=seed))
        reports.append(report)
        converged += float(np.mean((forward(trained, X)[1] - T) ** 2)) < 0.05 and report.iterations <= 500
    rng = np.random.default_rng(5)
    for seed in range(5):
        Xr = rng.normal(size=(30, 6))
        Tr = np.eye(6)[rng.integers(0, 6, 30)]
        reports.append(train_scg(init_model(6, 8, 6, seed=seed), Xr, Tr, TrainOptions(max_epochs=150))[1])
    monotone = all(_monotone(r) for r in reports)
    ok = monotone and converged >= 9
    record_criterion(5, "SCG monotone on accepted steps; XOR converges", ok,
                     f"{len(reports)} runs monotone: {monotone}; XOR MSE < 0.05 within 500 iterations "
                     f"on {converged}/10 seeds")
    assert ok


def test_criterion_6_determinism(two_runs):
    (a, b), _ = two_runs
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    other = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    differing = [str(p) for p in files if (a / p).read_bytes() != (b / p).read_bytes()]
    n_wav = sum(p.suffix == ".wav" for p in files)
    ok = files == other and not differing and n_wav == 4 * 138
    record_criterion(6, "two synth/train/eval runs are byte-identical", ok,
                     f"{len(files)} files compared ({n_wav} WAVs, model, eval JSON); differing: {differing[:3]}")
    assert ok


def test_criterion_7_serialisation(trained4, tmp_path):
    model = trained4[0].model
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    names = ("w1", "b1", "w2", "b2", "norm_mean", "norm_std")
    model_ok = all(getattr(back, n).tobytes() == getattr(model, n).tobytes() for n in names)
    model_ok &= back.labels == model.labels and back.config == model.config

    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(20):
        clip = AudioClip(rng.uniform(-1, 1, int(rng.integers(1, 5000))), int(rng.choice([8000, 16000, 44100])))
        write_wav(clip, tmp_path / f"{i}.wav")
        got = read_wav(tmp_path / f"{i}.wav")
        assert got.sample_rate == clip.sample_rate and len(got) == len(clip)
        worst = max(worst, float(np.max(np.abs(got.samples - clip.samples))))
    wav_ok = worst <= 1 / 32768
    record_criterion(7, "model round trip bit-exact; 16-bit WAV round trip within quantisation", model_ok and wav_ok,
                     f"model bit-exact: {model_ok}; WAV max error {worst:.3e} (bound {1 / 32768:.3e})")
    assert model_ok and wav_ok
