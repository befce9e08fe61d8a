"""Frequency-band amplitude features for multichannel epochs (e.g. EEG/EMG)."""
from __future__ import annotations

import numpy as np
from scipy.signal import periodogram

# Conventional rodent sleep-scoring bands in Hz; no claim to match any
# particular published preprocessing.
DEFAULT_BANDS = ((0.5, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 30.0), (30.0, 60.0))


def band_features(raw, bands, sample_rate: float, log_amplitude: bool = False) -> np.ndarray:
    """Mean spectral amplitude per channel and band of one epoch.

    ``raw`` is (channels, samples) or a single channel.  The spectrum is a plain
    (boxcar) periodogram; the amplitude at a bin is the square root of its
    power.  Features are ordered channel-major: ``[ch0_band0, ch0_band1, ...]``.
    """
    x = np.atleast_2d(np.asarray(raw, dtype=float))
    if x.shape[1] < 2:
        raise ValueError("epoch needs at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("epoch has non-finite samples")
    nyquist = sample_rate / 2.0
    freqs, power = periodogram(x, fs=sample_rate, window="boxcar", detrend=False,
                               scaling="spectrum", axis=-1)
    amplitude = np.sqrt(power)
    feats = []
    for lo, hi in bands:
        if not lo < hi:
            raise ValueError(f"empty band [{lo}, {hi}]")
        if hi > nyquist + 1e-12 or lo < 0:
            raise ValueError(f"band [{lo}, {hi}] exceeds the Nyquist range [0, {nyquist}]")
        mask = (freqs >= lo) & (freqs <= hi)
        if not mask.any():
            raise ValueError(f"band [{lo}, {hi}] contains no frequency bin at this epoch length")
        feats.append(amplitude[:, mask].mean(axis=1))
    out = np.stack(feats, axis=1).reshape(-1)
    if log_amplitude:
        out = np.log(out + 1e-12)
    return out


def epoch_features(signal, sample_rate: float, epoch_seconds: float, bands=DEFAULT_BANDS,
                   log_amplitude: bool = False) -> np.ndarray:
    """Split a (samples, channels) recording into epochs and featurize each.

    A trailing partial epoch is dropped.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = int(round(epoch_seconds * sample_rate))
    if n < 2:
        raise ValueError("epoch must span at least 2 samples")
    n_epochs = x.shape[0] // n
    return np.array([band_features(x[i * n:(i + 1) * n].T, bands, sample_rate, log_amplitude)
                     for i in range(n_epochs)])
