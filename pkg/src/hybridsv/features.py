"""MFCC extraction with regression (delta) coefficients.

Pipeline per frame: pre-emphasis, Hamming window, magnitude spectrum,
triangular mel filterbank, log, orthonormal DCT-II.
"""

import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct

from .corpus import resample
from .errors import FormatError, TooShortError

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class FrameConfig:
    frame_ms: float = 20.0
    overlap_fraction: float = 0.3125
    preemphasis_alpha: float = 0.97
    n_mel_filters: int = 26
    n_cepstra: int = 16
    fft_size: int | None = None
    include_delta: bool = True
    include_delta_delta: bool = False
    delta_window_N: int = 2
    target_rate_hz: int | None = None

    def __post_init__(self):
        if self.frame_ms <= 0:
            raise ValueError("frame_ms must be positive")
        if not 0 <= self.overlap_fraction < 1:
            raise ValueError("overlap_fraction must be in [0, 1)")
        if not 0 <= self.preemphasis_alpha < 1:
            raise ValueError("preemphasis_alpha must be in [0, 1)")
        if not 1 <= self.n_cepstra <= self.n_mel_filters:
            raise ValueError("need 1 <= n_cepstra <= n_mel_filters")
        if self.delta_window_N < 1:
            raise ValueError("delta_window_N must be >= 1")
        if self.fft_size is not None and self.fft_size & (self.fft_size - 1):
            raise ValueError("fft_size must be a power of two")

    def frame_length(self, sample_rate_hz):
        return max(1, int(round(self.frame_ms * 1e-3 * sample_rate_hz)))

    def hop_length(self, sample_rate_hz):
        hop = int(round(self.frame_length(sample_rate_hz) * (1.0 - self.overlap_fraction)))
        if hop < 1:
            raise ValueError("frame hop rounds to zero samples")
        return hop

    def n_fft(self, sample_rate_hz):
        frame_len = self.frame_length(sample_rate_hz)
        if self.fft_size is None:
            return 1 << (frame_len - 1).bit_length()
        if self.fft_size < frame_len:
            raise ValueError(f"fft_size {self.fft_size} shorter than frame ({frame_len})")
        return self.fft_size

    @property
    def dim(self):
        return self.n_cepstra * (1 + int(self.include_delta) + int(self.include_delta_delta))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    utterance_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"feature matrix must be 2-D and non-empty, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{self.utterance_id}: non-finite features")
        object.__setattr__(self, "values", v)

    @property
    def n_frames(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]

    def __len__(self):
        return self.n_frames


def hz_to_mel(f):
    """Mel value ``2595 * log10(1 + f / 700)``. Accepts scalars or arrays."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be non-negative")
    m = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(m) if m.ndim == 0 else m


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return float(f) if f.ndim == 0 else f


def preemphasize(x, alpha):
    x = np.asarray(x, dtype=np.float64)
    y = x.copy()
    y[1:] -= alpha * x[:-1]
    return y


def frame_signal(x, frame_len, hop):
    if x.size < frame_len:
        raise TooShortError(f"signal of {x.size} samples shorter than one frame ({frame_len})")
    n_frames = (x.size - frame_len) // hop + 1
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def preemphasize_and_frame(signal, cfg):
    """Return the Hamming-windowed frames (n_frames x frame_len) of a signal."""
    sr = signal.sample_rate_hz
    frame_len = cfg.frame_length(sr)
    hop = cfg.hop_length(sr)
    if len(signal) < frame_len:
        raise TooShortError(f"signal of {len(signal)} samples shorter than one frame ({frame_len})")
    y = preemphasize(signal.samples, cfg.preemphasis_alpha)
    return frame_signal(y, frame_len, hop) * np.hamming(frame_len)


def mel_filterbank(n_filters, n_fft, sample_rate_hz):
    """Triangular filters (n_filters x n_fft//2+1), edges uniform on the mel scale."""
    edges_hz = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate_hz / 2.0), n_filters + 2))
    freqs = np.arange(n_fft // 2 + 1) * (sample_rate_hz / n_fft)
    lo, mid, hi = edges_hz[:-2, None], edges_hz[1:-1, None], edges_hz[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def mfcc(signal, cfg, utterance_id=""):
    """Static MFCCs, one row per frame, ``cfg.n_cepstra`` columns."""
    frames = preemphasize_and_frame(signal, cfg)
    n_fft = cfg.n_fft(signal.sample_rate_hz)
    mag = np.abs(np.fft.rfft(frames, n=n_fft, axis=1))
    fb = mel_filterbank(cfg.n_mel_filters, n_fft, signal.sample_rate_hz)
    log_energy = np.log(np.maximum(mag @ fb.T, LOG_FLOOR))
    ceps = dct(log_energy, type=2, norm="ortho", axis=1)[:, :cfg.n_cepstra]
    return FeatureMatrix(ceps, utterance_id)


def delta(values, N=2):
    """Regression coefficients over +-N frames with replicated edges."""
    values = np.asarray(values, dtype=np.float64)
    T = values.shape[0]
    padded = np.concatenate([np.repeat(values[:1], N, axis=0), values,
                             np.repeat(values[-1:], N, axis=0)])
    num = np.zeros_like(values)
    for n in range(1, N + 1):
        num += n * (padded[N + n:N + n + T] - padded[N - n:N - n + T])
    return num / (2 * sum(n * n for n in range(1, N + 1)))


def append_deltas(features, cfg):
    """Append deltas and/or delta-deltas; delta-deltas are deltas of deltas."""
    N = cfg.delta_window_N
    if features.n_frames <= 2 * N:
        raise TooShortError(f"{features.utterance_id}: {features.n_frames} frames, "
                            f"need more than {2 * N} for deltas")
    parts = [features.values]
    if cfg.include_delta or cfg.include_delta_delta:
        d = delta(features.values, N)
        if cfg.include_delta:
            parts.append(d)
        if cfg.include_delta_delta:
            parts.append(delta(d, N))
    return FeatureMatrix(np.hstack(parts), features.utterance_id)


def extract(signal, cfg, utterance_id=""):
    """Full recipe: optional resampling, MFCCs, then configured deltas."""
    if cfg.target_rate_hz is not None and cfg.target_rate_hz != signal.sample_rate_hz:
        signal = resample(signal, cfg.target_rate_hz)
    feats = mfcc(signal, cfg, utterance_id)
    if cfg.include_delta or cfg.include_delta_delta:
        feats = append_deltas(feats, cfg)
    return feats


# ---------------------------------------------------------------------------
# Feature cache files
#
#   magic     4 bytes  b"HSVF"
#   version   uint32   1
#   id_len    uint32   byte length of the UTF-8 utterance id
#   id        id_len bytes
#   n_frames  uint64
#   dim       uint32
#   values    n_frames * dim float64, row-major
#
# All integers and floats little-endian.

_CACHE_MAGIC = b"HSVF"
_CACHE_VERSION = 1


def write_feature_cache(path, features):
    uid = features.utterance_id.encode("utf-8")
    head = _CACHE_MAGIC + struct.pack("<II", _CACHE_VERSION, len(uid)) + uid
    head += struct.pack("<QI", features.n_frames, features.dim)
    Path(path).write_bytes(head + features.values.astype("<f8").tobytes())


def read_feature_cache(path):
    data = Path(path).read_bytes()
    if data[:4] != _CACHE_MAGIC:
        raise FormatError(f"{path}: not a feature cache file")
    version, id_len = struct.unpack_from("<II", data, 4)
    if version != _CACHE_VERSION:
        raise FormatError(f"{path}: unsupported cache version {version}")
    off = 12 + id_len
    uid = data[12:off].decode("utf-8")
    n_frames, dim = struct.unpack_from("<QI", data, off)
    off += 12
    expected = n_frames * dim * 8
    if len(data) - off != expected:
        raise FormatError(f"{path}: payload size {len(data) - off}, expected {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=off).reshape(n_frames, dim)
    return FeatureMatrix(values.astype(np.float64), uid)
