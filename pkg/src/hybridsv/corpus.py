"""Audio ingestion, dataset manifests and train/enroll/test splitting.

WAV reading is a small RIFF chunk walker rather than the :mod:`wave` module
so that each failure mode maps to a distinct exception.
"""

import csv
import logging
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyAudioError,
    EmptyManifestError,
    FormatError,
    UnsupportedFormatError,
)

log = logging.getLogger(__name__)

CONDITIONS = (
    "neutral", "angry", "happy", "sad", "fear", "disgust",
    "slow", "soft", "lombard", "fast",
)
EMOTIONS = ("neutral", "angry", "happy", "sad", "fear", "disgust")
STRESS_STYLES = ("neutral", "angry", "slow", "soft", "lombard", "fast")

MANIFEST_COLUMNS = ("utterance_id", "speaker_id", "condition", "sentence",
                    "repetition", "path")

_PCM = 0x0001
_EXTENSIBLE = 0xFFFE
_PCM_SUBFORMAT = b"\x01\x00\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"


@dataclass(frozen=True, eq=False)
class AudioSignal:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if x.size < 1:
            raise EmptyAudioError("audio signal has no samples")
        if not np.all(np.isfinite(x)):
            raise ValueError("audio samples must be finite")
        if np.any(np.abs(x) > 1.0):
            raise ValueError("audio samples must lie in [-1, 1]")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    speaker_id: str
    condition_label: str
    sentence_id: str
    repetition: int
    path: str

    def __post_init__(self):
        if not self.speaker_id:
            raise ValueError(f"{self.utterance_id}: empty speaker_id")
        if self.condition_label not in CONDITIONS:
            raise ValueError(f"{self.utterance_id}: unknown condition {self.condition_label!r}")


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple
    name: str = "dataset"
    skipped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            if rec.utterance_id in seen:
                raise ValueError(f"duplicate utterance_id {rec.utterance_id!r}")
            seen.add(rec.utterance_id)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def speakers(self):
        return sorted({r.speaker_id for r in self.records})

    @property
    def sentences(self):
        return sorted({r.sentence_id for r in self.records})

    def check_files(self):
        missing = [r.path for r in self.records if not Path(r.path).is_file()]
        if missing:
            raise FileNotFoundError(f"{len(missing)} manifest files missing, e.g. {missing[0]}")


@dataclass(frozen=True)
class SplitSpec:
    train_speakers: frozenset
    eval_speakers: frozenset
    train_sentences: frozenset
    eval_sentences: frozenset
    eval_conditions: frozenset = frozenset(EMOTIONS)
    train_conditions: frozenset = frozenset({"neutral"})

    def __post_init__(self):
        for name in ("train_speakers", "eval_speakers", "train_sentences",
                     "eval_sentences", "eval_conditions", "train_conditions"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.train_speakers & self.eval_speakers:
            raise ValueError("train and eval speakers overlap")
        if self.train_conditions != frozenset({"neutral"}):
            raise ValueError("training is neutral-only")
        unknown = self.eval_conditions - set(CONDITIONS)
        if unknown:
            raise ValueError(f"unknown eval conditions {sorted(unknown)}")


# ---------------------------------------------------------------------------
# WAV I/O


def read_wav(path):
    """Read a 16-bit linear PCM WAV file as a mono :class:`AudioSignal`.

    Multi-channel data is averaged across channels.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    pcm = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise FormatError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == _EXTENSIBLE:
                if len(body) < 40 or body[24:40] != _PCM_SUBFORMAT:
                    raise UnsupportedFormatError(f"{path}: extensible format is not PCM")
                fmt = (_PCM,) + fmt[1:]
        elif chunk_id == b"data":
            pcm = body
            break
        # chunks are word aligned
        pos += 8 + size + (size & 1)

    if fmt is None or pcm is None:
        raise FormatError(f"{path}: missing fmt or data chunk")
    audio_format, channels, rate, _, block_align, bits = fmt
    if audio_format != _PCM:
        raise UnsupportedFormatError(f"{path}: audio format {audio_format} is not PCM")
    if bits != 16:
        raise UnsupportedFormatError(f"{path}: {bits}-bit samples, only 16-bit supported")
    if channels < 1 or block_align != 2 * channels or rate <= 0:
        raise FormatError(f"{path}: inconsistent fmt chunk")
    n_frames = len(pcm) // block_align
    if n_frames == 0:
        raise EmptyAudioError(f"{path}: empty data chunk")

    ints = np.frombuffer(pcm[:n_frames * block_align], dtype="<i2")
    x = ints.reshape(n_frames, channels).astype(np.float64) / 32768.0
    return AudioSignal(x.mean(axis=1), rate)


def write_wav(path, signal):
    """Write a mono 16-bit PCM WAV; samples are rounded to the nearest code."""
    q = np.clip(np.round(signal.samples * 32768.0), -32768, 32767).astype("<i2")
    payload = q.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, _PCM, 1, signal.sample_rate_hz, 2 * signal.sample_rate_hz, 2, 16,
        b"data", len(payload),
    )
    Path(path).write_bytes(header + payload)


def resample(signal, target_rate_hz):
    """Linear-interpolation resampler with edge hold.

    The output has ``floor(n * target / source)`` samples (at least one).
    No anti-alias filtering is applied.
    """
    target_rate_hz = int(target_rate_hz)
    if target_rate_hz <= 0:
        raise ValueError(f"target rate must be positive, got {target_rate_hz}")
    src = signal.sample_rate_hz
    if target_rate_hz == src:
        return AudioSignal(signal.samples.copy(), src)
    n_out = max(1, (len(signal) * target_rate_hz) // src)
    # query positions in units of source samples
    pos = np.arange(n_out) * (src / target_rate_hz)
    y = np.interp(pos, np.arange(len(signal)), signal.samples)
    return AudioSignal(y, target_rate_hz)


# ---------------------------------------------------------------------------
# Manifests

_RAVDESS_RE = re.compile(r"^(\d{2})-(\d{2})-(\d{2})-(\d{2})-(\d{2})-(\d{2})-(\d{2})$")
RAVDESS_EMOTIONS = {
    "01": "neutral", "03": "happy", "04": "sad",
    "05": "angry", "06": "fear", "07": "disgust",
}
SUSAS_STYLES = {
    "neutral": "neutral", "angry": "angry", "slow": "slow",
    "soft": "soft", "lombard": "lombard", "fast": "fast",
}


def decode_ravdess_name(stem):
    """Map a RAVDESS file stem such as ``03-01-05-01-02-01-12`` to record fields.

    Returns ``None`` for names outside the six emotions or for sung
    material. Emotional statements carry two intensities with two
    repetitions each; they are folded into repetitions 1..4.
    """
    m = _RAVDESS_RE.match(stem)
    if not m:
        return None
    _, channel, emotion, intensity, statement, repetition, actor = m.groups()
    if channel != "01" or emotion not in RAVDESS_EMOTIONS:
        return None
    rep = (int(intensity) - 1) * 2 + int(repetition)
    return {
        "speaker_id": f"actor{actor}",
        "condition_label": RAVDESS_EMOTIONS[emotion],
        "sentence_id": statement,
        "repetition": rep,
    }


def decode_susas_path(path, root):
    """Decode ``<root>/.../<speaker>/<style>/<word><rep>.wav``."""
    rel = Path(path).relative_to(root)
    if len(rel.parts) < 3:
        return None
    style = rel.parts[-2].lower()
    if style not in SUSAS_STYLES:
        return None
    m = re.match(r"^(.*?)(\d*)$", rel.stem)
    word, rep = m.group(1), m.group(2)
    return {
        "speaker_id": rel.parts[-3],
        "condition_label": SUSAS_STYLES[style],
        "sentence_id": word.lower() or rel.stem,
        "repetition": int(rep) if rep else 1,
    }


def read_manifest_csv(path, name=None, check_files=True):
    """Load a generic manifest CSV. Relative paths resolve against the CSV's directory."""
    path = Path(path)
    base = path.parent
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != MANIFEST_COLUMNS:
            raise FormatError(f"{path}: expected header {','.join(MANIFEST_COLUMNS)}")
        for row in reader:
            p = Path(row["path"])
            if not p.is_absolute():
                p = base / p
            records.append(UtteranceRecord(
                utterance_id=row["utterance_id"],
                speaker_id=row["speaker_id"],
                condition_label=row["condition"],
                sentence_id=row["sentence"],
                repetition=int(row["repetition"]),
                path=str(p),
            ))
    if not records:
        raise EmptyManifestError(f"{path}: no records")
    manifest = DatasetManifest(records, name=name or path.stem)
    if check_files:
        manifest.check_files()
    return manifest


def write_manifest_csv(manifest, path, relative_to=None):
    path = Path(path)
    base = Path(relative_to) if relative_to is not None else None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for r in manifest.records:
            p = Path(r.path)
            if base is not None:
                try:
                    p = p.relative_to(base)
                except ValueError:
                    pass
            w.writerow([r.utterance_id, r.speaker_id, r.condition_label,
                        r.sentence_id, r.repetition, p.as_posix()])


def build_manifest(root, schema, name=None):
    """Discover utterances under ``root``.

    ``schema`` is one of ``ravdess_filename``, ``susas_layout`` or
    ``generic_csv`` (``root`` may then be the CSV itself or a directory
    holding ``manifest.csv``). Files whose names cannot be decoded are
    skipped and counted in ``manifest.skipped``.
    """
    root = Path(root)
    if not root.exists():
        raise FileNotFoundError(root)
    if schema == "generic_csv":
        csv_path = root if root.is_file() else root / "manifest.csv"
        return read_manifest_csv(csv_path, name=name)

    if schema == "ravdess_filename":
        decode = lambda p: decode_ravdess_name(p.stem)  # noqa: E731
    elif schema == "susas_layout":
        decode = lambda p: decode_susas_path(p, root)  # noqa: E731
    else:
        raise ValueError(f"unknown manifest schema {schema!r}")

    records = []
    skipped = 0
    for p in sorted(root.rglob("*")):
        if not p.is_file() or p.suffix.lower() != ".wav":
            continue
        fields = decode(p)
        if fields is None:
            skipped += 1
            continue
        uid = p.relative_to(root).with_suffix("").as_posix()
        records.append(UtteranceRecord(utterance_id=uid, path=str(p), **fields))
    if skipped:
        log.warning("%s: skipped %d undecodable files", root, skipped)
    if not records:
        raise EmptyManifestError(f"{root}: no decodable audio files")
    return DatasetManifest(records, name=name or root.name, skipped=skipped)


# ---------------------------------------------------------------------------
# Splits


def make_splits(manifest, spec):
    """Partition a manifest into (train, enroll, test) record lists.

    train: neutral utterances of training speakers on training sentences.
    enroll: neutral utterances of evaluation speakers on training sentences.
    test: evaluation-condition utterances of evaluation speakers on
    evaluation sentences, excluding anything already used for enrollment.
    """
    known = set(manifest.speakers)
    unknown = (spec.train_speakers | spec.eval_speakers) - known
    if unknown:
        raise ValueError(f"split references unknown speakers {sorted(unknown)}")

    train, enroll, test = [], [], []
    for r in manifest.records:
        if r.speaker_id in spec.train_speakers:
            if r.condition_label in spec.train_conditions and r.sentence_id in spec.train_sentences:
                train.append(r)
        elif r.speaker_id in spec.eval_speakers:
            if r.condition_label in spec.train_conditions and r.sentence_id in spec.train_sentences:
                enroll.append(r)
            elif r.condition_label in spec.eval_conditions and r.sentence_id in spec.eval_sentences:
                test.append(r)
    return train, enroll, test


def draw_split(manifest, n_train_speakers, n_eval_speakers, n_train_sentences,
               eval_conditions=EMOTIONS, rng=None):
    """Randomly draw a :class:`SplitSpec` with the given counts.

    Remaining sentences become evaluation sentences.
    """
    rng = np.random.default_rng(rng)
    speakers = manifest.speakers
    sentences = manifest.sentences
    if n_train_speakers + n_eval_speakers > len(speakers):
        raise ValueError(f"need {n_train_speakers + n_eval_speakers} speakers, "
                         f"manifest has {len(speakers)}")
    if not 0 < n_train_sentences < len(sentences):
        raise ValueError(f"cannot take {n_train_sentences} of {len(sentences)} sentences")
    spk = [speakers[i] for i in rng.permutation(len(speakers))]
    sen = [sentences[i] for i in rng.permutation(len(sentences))]
    return SplitSpec(
        train_speakers=spk[:n_train_speakers],
        eval_speakers=spk[n_train_speakers:n_train_speakers + n_eval_speakers],
        train_sentences=sen[:n_train_sentences],
        eval_sentences=sen[n_train_sentences:],
        eval_conditions=eval_conditions,
    )


def ravdess_split(manifest, n_train_speakers=20, n_eval_speakers=4):
    """Fixed RAVDESS protocol: first actors and statement 01 for training."""
    speakers = sorted(manifest.speakers)
    return SplitSpec(
        train_speakers=speakers[:n_train_speakers],
        eval_speakers=speakers[n_train_speakers:n_train_speakers + n_eval_speakers],
        train_sentences={"01"},
        eval_sentences={"02"},
        eval_conditions=EMOTIONS,
    )
