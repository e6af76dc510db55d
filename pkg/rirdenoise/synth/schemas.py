import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from rirdenoise.config import settings

DEFAULT_RATE = 48_000.0
DEFAULT_LENGTH = 2**17
DEFAULT_CENTERS: tuple[float, ...] = (25.0, 31.5, 40.0, 50.0, 63.0, 80.0, 100.0)
DEFAULT_SNR_LEVELS: tuple[float, ...] = tuple(float(v) for v in np.linspace(5.0, 50.0, 10))
DEFAULT_NOISE_SEEDS: tuple[int, ...] = tuple(range(10))
DEFAULT_DECAY_FACTORS: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0)
ARMS: tuple[str, ...] = ("noisy", "baseline", "proposed")


class Mode(BaseModel):
    model_config = ConfigDict(frozen=True)

    amplitude: float = 1.0
    alpha: float = Field(ge=0, description="amplitude decay per sample")
    frequency_hz: float = Field(gt=0)


class ModalSpec(BaseModel):
    """Sum of exponentially decaying sinusoids."""

    model_config = ConfigDict(frozen=True)

    modes: tuple[Mode, ...] = Field(min_length=1)
    length: int = Field(ge=0)
    rate: float = Field(gt=0)

    @model_validator(mode="after")
    def _below_nyquist(self) -> "ModalSpec":
        for k, mode in enumerate(self.modes):
            if mode.frequency_hz >= self.rate / 2:
                raise ValueError(
                    f"mode {k} at {mode.frequency_hz} Hz is not below Nyquist ({self.rate / 2} Hz)"
                )
        return self

    def scaled(self, factor: float) -> "ModalSpec":
        modes = tuple(m.model_copy(update={"alpha": m.alpha * factor}) for m in self.modes)
        return self.model_copy(update={"modes": modes})

    @classmethod
    def default(cls, length: int = DEFAULT_LENGTH, rate: float = DEFAULT_RATE) -> "ModalSpec":
        """Unit amplitudes at the third-octave centers 25-100 Hz with DT60
        spread linearly from 3 s (lowest band) to 1 s (highest)."""
        dt60s = np.linspace(3.0, 1.0, len(DEFAULT_CENTERS))
        modes = tuple(
            Mode(amplitude=1.0, alpha=3.0 / (dt60 * rate * math.log10(math.e)), frequency_hz=fc)
            for fc, dt60 in zip(DEFAULT_CENTERS, dt60s)
        )
        return cls(modes=modes, length=length, rate=rate)


class NoiseShape(BaseModel):
    """Butterworth shaping filter for seeded Gaussian noise, applied zero-phase."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["lowpass", "highpass", "bandpass", "white"] = "lowpass"
    cutoff_hz: float | tuple[float, float] = 150.0
    order: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def _cutoff(self) -> "NoiseShape":
        pair = isinstance(self.cutoff_hz, tuple)
        if self.kind == "bandpass" and not pair:
            raise ValueError("bandpass noise needs a (low, high) cutoff pair")
        if self.kind in ("lowpass", "highpass") and pair:
            raise ValueError(f"{self.kind} noise needs a single cutoff")
        return self


class SweepPlan(BaseModel):
    """Grid of (decay factor, noise seed, SNR) trials.

    `default()` is the full grid: 10 SNR levels from 5 to 50 dB, 10 noise
    seeds and decay factors 0.5, 1, 1.5, 2. Smaller grids are allowed for
    desk-scale runs.
    """

    model_config = ConfigDict(frozen=True)

    schema_version: Literal[1] = 1
    snr_levels_db: tuple[float, ...] = Field(default=DEFAULT_SNR_LEVELS, min_length=1)
    noise_seeds: tuple[int, ...] = Field(default=DEFAULT_NOISE_SEEDS, min_length=1)
    decay_factors: tuple[float, ...] = Field(default=DEFAULT_DECAY_FACTORS, min_length=1)
    base_spec: ModalSpec = Field(default_factory=ModalSpec.default)
    noise_shape: NoiseShape = NoiseShape()
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    range_db: tuple[float, float] = (-5.0, -25.0)

    @model_validator(mode="after")
    def _check(self) -> "SweepPlan":
        for name in ("snr_levels_db", "noise_seeds", "decay_factors"):
            values = getattr(self, name)
            if len(set(values)) != len(values):
                raise ValueError(f"{name} contains duplicates")
        if any(f <= 0 for f in self.decay_factors):
            raise ValueError("decay factors must be positive")
        return self

    @classmethod
    def default(cls) -> "SweepPlan":
        return cls()

    @property
    def trial_count(self) -> int:
        return len(self.decay_factors) * len(self.noise_seeds) * len(self.snr_levels_db)

    @property
    def bands(self) -> tuple[float, ...]:
        return tuple(m.frequency_hz for m in self.base_spec.modes)


class ArmResult(BaseModel):
    arm: str
    dt60_seconds: tuple[float | None, ...]
    fit_r2: tuple[float | None, ...]
    dynamic_improvement_db: float | None = None
    edc_undershoot_db: float | None = None


class ExperimentRecord(BaseModel):
    """Outcome of one (factor, seed, snr) trial."""

    factor_index: int
    seed_index: int
    snr_index: int
    decay_factor: float
    noise_seed: int
    snr_db: float
    bands_hz: tuple[float, ...]
    exact_dt60_seconds: tuple[float, ...]
    arms: tuple[ArmResult, ...] = ()
    status: Literal["ok", "failed"] = "ok"
    error: str | None = None

    def arm(self, name: str) -> ArmResult | None:
        return next((a for a in self.arms if a.arm == name), None)
