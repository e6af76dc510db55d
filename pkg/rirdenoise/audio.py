"""Mono WAV input/output (PCM 16/24-bit and 32-bit float) through soundfile."""

import logging
from pathlib import Path

import numpy as np
import soundfile as sf

from rirdenoise.exceptions import AudioFormatError
from rirdenoise.wavelet.schemas import Signal

logger = logging.getLogger(__name__)

SUPPORTED_SUBTYPES = ("PCM_16", "PCM_24", "FLOAT")


def read_wav(path: Path) -> tuple[Signal, str]:
    """Return the signal (float64 in [-1, 1)) and the file's sample subtype."""
    path = Path(path)
    if not path.is_file():
        raise AudioFormatError(f"{path}: file not found")
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise AudioFormatError(f"{path}: not a readable audio file ({e})") from e
    if info.channels != 1:
        raise AudioFormatError(
            f"{path}: has {info.channels} channels; mono required (extract one channel first)"
        )
    if info.subtype not in SUPPORTED_SUBTYPES:
        raise AudioFormatError(
            f"{path}: unsupported sample format {info.subtype}; expected one of {', '.join(SUPPORTED_SUBTYPES)}"
        )
    data, rate = sf.read(str(path), dtype="float64", always_2d=False)
    return Signal(samples=data, sample_rate=float(rate)), info.subtype


def write_wav(path: Path, signal: Signal, subtype: str = "FLOAT") -> Path:
    if subtype not in SUPPORTED_SUBTYPES:
        raise AudioFormatError(f"Unsupported output format {subtype}")
    rate = int(round(signal.sample_rate))
    if rate != signal.sample_rate:
        raise AudioFormatError(f"WAV needs an integer sample rate, got {signal.sample_rate}")
    samples = signal.samples
    if subtype != "FLOAT":
        peak = float(np.max(np.abs(samples))) if samples.size else 0.0
        if peak > 1.0:
            logger.warning("Clipping output %s (peak %.3f) to the %s range", path, peak, subtype)
        samples = np.clip(samples, -1.0, 1.0)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), samples, rate, subtype=subtype, format="WAV")
    return path
