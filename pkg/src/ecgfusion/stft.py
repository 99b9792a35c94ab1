"""Short-time Fourier frontend.

Raw leads are framed, Hann-windowed, zero-padded, transformed with a
self-contained mixed-radix DFT, log-compressed, band-limited, and
z-normalized per lead. The transform recurses on factors 2/3/5 (the
default 480-point size is smooth) and falls back to the O(n^2) matrix
product for any other length, so every n is accepted.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

import numpy as np

from .tensor import ShapeError


@dataclass(frozen=True)
class StftConfig:
    window_size: int = 64
    hop: int = 16
    n_fft: int = 480
    band_low_hz: float = 0.5
    band_high_hz: float = 40.0
    log_epsilon: float = 1e-6

    def __post_init__(self):
        if not (1 <= self.hop <= self.window_size <= self.n_fft):
            raise ValueError(
                f"need 1 <= hop <= window_size <= n_fft, got hop={self.hop} "
                f"window_size={self.window_size} n_fft={self.n_fft}")
        if not (0.0 <= self.band_low_hz < self.band_high_hz):
            raise ValueError(
                f"need 0 <= band_low_hz < band_high_hz, got {self.band_low_hz} and {self.band_high_hz}")
        if self.log_epsilon <= 0.0:
            raise ValueError("log_epsilon must be positive")

    def config_hash(self) -> str:
        text = ",".join(f"{f.name}={getattr(self, f.name)!r}" for f in fields(self))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class Spectrogram:
    """Log-magnitude features: values has shape (frames, leads, bins)."""

    values: np.ndarray
    frame_times: np.ndarray
    bin_freqs: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_leads(self) -> int:
        return self.values.shape[1]

    @property
    def n_bins(self) -> int:
        return self.values.shape[2]


def frame_count(n_samples: int, window_size: int, hop: int) -> int:
    if n_samples < window_size:
        return 0
    return (n_samples - window_size) // hop + 1


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _dft_matrix(n: int) -> np.ndarray:
    j = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(j, j) / n)


def _smallest_factor(n: int) -> int | None:
    for p in (2, 3, 5):
        if n % p == 0:
            return p
    return None


def _dft_last_axis(x: np.ndarray) -> np.ndarray:
    """DFT along the last axis, decimation in time over radices 2/3/5.

    Splitting x into p interleaved sub-sequences of length m = n/p gives
    X[k] = sum_r twiddle(r*k) * S_r[k mod m], which is what the combine
    loop below evaluates for all leading axes at once.
    """
    n = x.shape[-1]
    if n == 1:
        return x.astype(np.complex128, copy=True)
    p = _smallest_factor(n)
    if p is None:
        return x @ _dft_matrix(n)
    m = n // p
    subs = [_dft_last_axis(x[..., r::p]) for r in range(p)]
    k = np.arange(n)
    wrap = k % m
    out = np.zeros(x.shape[:-1] + (n,), dtype=np.complex128)
    for r, sub in enumerate(subs):
        twiddle = np.exp(-2j * np.pi * (r * k % n) / n)
        out += twiddle * sub[..., wrap]
    return out


def dft(x: np.ndarray) -> np.ndarray:
    """Complex DFT of a 1-D sequence."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ShapeError(f"dft expects a 1-D sequence, got shape {x.shape}")
    return _dft_last_axis(x.astype(np.complex128))


def _lead_magnitudes(samples: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Magnitude frames for one lead: (n_frames, n_fft//2 + 1)."""
    n_frames = frame_count(samples.shape[0], cfg.window_size, cfg.hop)
    starts = np.arange(n_frames) * cfg.hop
    frames = samples[starts[:, None] + np.arange(cfg.window_size)[None, :]]
    frames = frames * hann_window(cfg.window_size)
    padded = np.zeros((n_frames, cfg.n_fft))
    padded[:, :cfg.window_size] = frames
    spectrum = _dft_last_axis(padded)
    return np.abs(spectrum[:, : cfg.n_fft // 2 + 1])


def stft_spectrogram(record, cfg: StftConfig, sample_rate: float | None = None) -> Spectrogram:
    """Full frontend for one record.

    Accepts anything with ``samples`` / ``sample_rate`` attributes, or a
    plain (n_samples, n_leads) matrix plus an explicit sample_rate.
    Log compression happens before band filtering; z-normalization runs
    per lead over the retained bins. A silent lead normalizes to zeros
    instead of dividing by its zero deviation.
    """
    if hasattr(record, "samples"):
        samples = record.samples
        sample_rate = record.sample_rate
    else:
        samples = record
        if sample_rate is None:
            raise ValueError("sample_rate is required when passing a bare sample matrix")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ShapeError(f"expected (samples, leads), got shape {samples.shape}")
    n_frames = frame_count(samples.shape[0], cfg.window_size, cfg.hop)
    if n_frames == 0:
        raise ShapeError(
            f"record too short: {samples.shape[0]} samples < window {cfg.window_size}")
    mags = np.stack([_lead_magnitudes(samples[:, lead], cfg)
                     for lead in range(samples.shape[1])], axis=1)
    values = np.log(mags + cfg.log_epsilon)
    starts = np.arange(n_frames) * cfg.hop
    full = Spectrogram(
        values=values,
        frame_times=(starts + cfg.window_size / 2.0) / sample_rate,
        bin_freqs=np.arange(cfg.n_fft // 2 + 1) * sample_rate / cfg.n_fft,
    )
    banded = band_filter(full, cfg.band_low_hz, cfg.band_high_hz)
    out = banded.values
    for lead in range(out.shape[1]):
        block = out[:, lead, :]
        std = block.std()
        if std < 1e-12:
            out[:, lead, :] = 0.0
        else:
            out[:, lead, :] = (block - block.mean()) / std
    return banded


def band_filter(spec: Spectrogram, low_hz: float, high_hz: float) -> Spectrogram:
    """Keep bins whose center frequency lies in [low_hz, high_hz], inclusive."""
    keep = (spec.bin_freqs >= low_hz) & (spec.bin_freqs <= high_hz)
    if not np.any(keep):
        raise ValueError(f"band [{low_hz}, {high_hz}] Hz retains no bins")
    return Spectrogram(values=spec.values[:, :, keep],
                       frame_times=spec.frame_times,
                       bin_freqs=spec.bin_freqs[keep])
