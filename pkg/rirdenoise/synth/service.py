import logging

import numpy as np
from scipy import signal as sps

from rirdenoise import rng
from rirdenoise.exceptions import InputError
from rirdenoise.synth.schemas import ModalSpec, NoiseShape
from rirdenoise.wavelet.schemas import Signal

logger = logging.getLogger(__name__)


def gen_modal(spec: ModalSpec) -> Signal:
    """h[n] = sum_k s_k e^{-alpha_k n} sin(2 pi f_k n / rate)."""
    n = np.arange(spec.length, dtype=np.float64)
    h = np.zeros(spec.length)
    for mode in spec.modes:
        h += mode.amplitude * np.exp(-mode.alpha * n) * np.sin(2.0 * np.pi * mode.frequency_hz / spec.rate * n)
    return Signal(samples=h, sample_rate=spec.rate)


def _shaping_filter(shape: NoiseShape, rate: float) -> np.ndarray | None:
    if shape.kind == "white":
        return None
    cutoff = list(shape.cutoff_hz) if isinstance(shape.cutoff_hz, tuple) else shape.cutoff_hz
    if np.max(cutoff) >= rate / 2:
        raise InputError(f"Noise cutoff {shape.cutoff_hz} Hz is not below Nyquist ({rate / 2} Hz)")
    return sps.butter(shape.order, cutoff, btype=shape.kind, output="sos", fs=rate)


def gen_shaped_noise(length: int, rate: float, seed: int, shape: NoiseShape | None = None) -> Signal:
    if length < 0:
        raise InputError(f"length must be >= 0, got {length}")
    shape = shape or NoiseShape()
    white = rng.generator(seed).standard_normal(length)
    sos = _shaping_filter(shape, rate)
    if sos is None or length < 2:
        return Signal(samples=white, sample_rate=rate)
    padlen = min(3 * (2 * len(sos) + 1), length - 1)
    return Signal(samples=sps.sosfiltfilt(sos, white, padlen=padlen), sample_rate=rate)


def noise_gain(clean: Signal, noise: Signal, snr_db: float) -> float:
    """Gain g with 10 log10(||clean||^2 / ||g noise||^2) = snr_db."""
    if len(clean) != len(noise) or clean.sample_rate != noise.sample_rate:
        raise InputError("clean and noise must have equal length and rate")
    clean_energy, noise_energy = clean.energy(), noise.energy()
    if clean_energy == 0.0 or noise_energy == 0.0:
        raise InputError("clean and noise signals must both carry energy")
    return float(np.sqrt(clean_energy / (noise_energy * 10.0 ** (snr_db / 10.0))))


def mix_at_snr(clean: Signal, noise: Signal, snr_db: float) -> Signal:
    g = noise_gain(clean, noise, snr_db)
    return clean.with_samples(clean.samples + g * noise.samples)


def measured_snr_db(clean: Signal, mixed: Signal) -> float:
    residual = mixed.samples - clean.samples
    return float(10.0 * np.log10(clean.energy() / np.dot(residual, residual)))
