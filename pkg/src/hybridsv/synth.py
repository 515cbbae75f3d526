"""Synthetic speaker corpora for exercising the pipelines without private data.

Every utterance is a sequence of "phone" segments. A sentence fixes which
phones occur and in what order; phone means are shared by all speakers.
Each speaker adds a personal offset, scaled by ``separation``, to every
phone, so ``separation=0`` yields statistically identical speakers.
Non-neutral conditions add a condition-wide shift and extra noise.
"""

from pathlib import Path

import numpy as np

from .corpus import (
    EMOTIONS,
    AudioSignal,
    DatasetManifest,
    UtteranceRecord,
    write_manifest_csv,
    write_wav,
)
from .features import FeatureMatrix, write_feature_cache


def _speaker_ids(n):
    width = max(2, len(str(n)))
    return [f"spk{k:0{width}d}" for k in range(1, n + 1)]


def generate_synthetic_corpus(n_speakers, separation, seed, out_dir, *, n_sentences=6,
                              n_repetitions=3, conditions=EMOTIONS, dim=16, n_phones=8,
                              phones_per_sentence=5, segment_frames=(6, 12),
                              perturbation=0.3, render="features", sample_rate_hz=8000):
    """Write a synthetic corpus and its ``manifest.csv`` under ``out_dir``.

    ``render="features"`` writes feature-cache files directly;
    ``render="wav"`` writes 16-bit WAV files of tone mixtures whose
    frequencies carry the same speaker/phone structure.
    """
    if n_speakers < 2:
        raise ValueError("need at least 2 speakers")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    if render not in ("features", "wav"):
        raise ValueError(f"unknown render mode {render!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    speakers = _speaker_ids(n_speakers)
    sentences = [f"s{i + 1}" for i in range(n_sentences)]
    phone_means = rng.normal(0.0, 2.0, size=(n_phones, dim))
    scripts = {s: rng.choice(n_phones, size=phones_per_sentence) for s in sentences}
    spk_offset = {k: rng.normal(size=dim) for k in speakers}
    spk_phone = {k: rng.normal(scale=0.5, size=(n_phones, dim)) for k in speakers}
    cond_shift = {c: (0.0 if c == "neutral" else perturbation) * rng.normal(size=dim)
                  for c in conditions}
    cond_noise = {c: 1.0 if c == "neutral" else 1.0 + perturbation for c in conditions}
    # frequency layout for the audio rendering
    phone_freqs = rng.uniform(300.0, 0.4 * sample_rate_hz, size=(n_phones, 3))
    spk_warp = {k: rng.normal(size=3) for k in speakers}

    records = []
    for spk in speakers:
        (out / spk).mkdir(exist_ok=True)
        for cond in conditions:
            for sent in sentences:
                for rep in range(1, n_repetitions + 1):
                    uid = f"{spk}_{cond}_{sent}_r{rep}"
                    lengths = rng.integers(segment_frames[0], segment_frames[1] + 1,
                                           size=phones_per_sentence)
                    if render == "features":
                        rows = []
                        for p, n in zip(scripts[sent], lengths):
                            mean = (phone_means[p] + separation * (spk_offset[spk] + spk_phone[spk][p])
                                    + cond_shift[cond])
                            rows.append(mean + cond_noise[cond] * rng.normal(size=(n, dim)))
                        path = out / spk / f"{uid}.feat"
                        write_feature_cache(path, FeatureMatrix(np.concatenate(rows), uid))
                    else:
                        samples = _render_audio(rng, scripts[sent], lengths, phone_freqs,
                                                0.03 * separation * spk_warp[spk],
                                                cond_noise[cond] - 1.0, sample_rate_hz)
                        path = out / spk / f"{uid}.wav"
                        write_wav(path, AudioSignal(samples, sample_rate_hz))
                    records.append(UtteranceRecord(uid, spk, cond, sent, rep, str(path)))

    manifest = DatasetManifest(records, name=f"synthetic_sep{separation:g}")
    write_manifest_csv(manifest, out / "manifest.csv", relative_to=out)
    return manifest


def _render_audio(rng, phones, lengths, phone_freqs, warp, extra_noise, sr):
    # each feature-frame unit of length becomes 20 ms of audio
    chunks = []
    for p, n in zip(phones, lengths):
        t = np.arange(int(n * 0.02 * sr)) / sr
        freqs = phone_freqs[p] * (1.0 + warp)
        tone = sum(np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi)) for f in freqs)
        chunks.append(0.2 * tone / len(freqs) + (0.01 + 0.05 * extra_noise) * rng.normal(size=t.size))
    x = np.concatenate(chunks)
    return np.clip(x, -1.0, 1.0)
