import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

BoundaryMode = Literal["periodic", "symmetric"]

QMF_TOLERANCE = 1e-10
DC_GAIN_TOLERANCE = 1e-8


def as_float_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D sequence, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sequence contains non-finite values")
    return arr


class Signal(BaseModel):
    """Uniformly sampled real signal.

    A zero-length signal is representable (an empty noise realization);
    every processing stage rejects it.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: np.ndarray
    sample_rate: float = Field(gt=0)

    @field_validator("samples", mode="before")
    @classmethod
    def _samples(cls, value) -> np.ndarray:
        return as_float_array(value)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))

    def with_samples(self, samples) -> "Signal":
        return Signal(samples=samples, sample_rate=self.sample_rate)


class WaveletFilterBank(BaseModel):
    """Orthogonal two-channel filter bank.

    The high-pass analysis filter is the alternating flip of the low-pass one,
    q[k] = (-1)^k g[len-1-k], and the synthesis filters are the time reverses
    of the analysis filters.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    analysis_low: tuple[float, ...]
    analysis_high: tuple[float, ...]
    synthesis_low: tuple[float, ...]
    synthesis_high: tuple[float, ...]

    @model_validator(mode="after")
    def _check_qmf(self) -> "WaveletFilterBank":
        g = np.asarray(self.analysis_low)
        q = np.asarray(self.analysis_high)
        if g.size < 2 or g.size != q.size:
            raise ValueError(
                f"analysis filters must have equal length >= 2 (got {g.size} and {q.size})"
            )
        if len(self.synthesis_low) != g.size or len(self.synthesis_high) != g.size:
            raise ValueError("synthesis filters must match the analysis filter length")
        signs = (-1.0) ** np.arange(g.size)
        if np.max(np.abs(q - signs * g[::-1])) > QMF_TOLERANCE:
            raise ValueError("analysis_high is not the quadrature mirror of analysis_low")
        if abs(g.sum() - math.sqrt(2.0)) > DC_GAIN_TOLERANCE:
            raise ValueError(f"sum(analysis_low) = {g.sum():.12f}, expected sqrt(2)")
        return self

    @property
    def length(self) -> int:
        return len(self.analysis_low)

    @classmethod
    def from_lowpass(cls, name: str, lowpass) -> "WaveletFilterBank":
        g = np.asarray(lowpass, dtype=np.float64)
        q = (-1.0) ** np.arange(g.size) * g[::-1]
        return cls(
            name=name,
            analysis_low=tuple(g),
            analysis_high=tuple(q),
            synthesis_low=tuple(g[::-1]),
            synthesis_high=tuple(q[::-1]),
        )


class WaveletDecomposition(BaseModel):
    """Coefficient set [d_0, ..., d_{L-1}, a_{L-1}], finest detail first."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    details: tuple[np.ndarray, ...]
    approximation: np.ndarray
    levels: int = Field(ge=1)
    boundary_mode: BoundaryMode = "periodic"
    original_length: int = Field(ge=1)
    sample_rate: float = Field(gt=0)
    bank_name: str = ""

    @field_validator("details", mode="before")
    @classmethod
    def _details(cls, value) -> tuple[np.ndarray, ...]:
        return tuple(as_float_array(d) for d in value)

    @field_validator("approximation", mode="before")
    @classmethod
    def _approximation(cls, value) -> np.ndarray:
        return as_float_array(value)

    def coefficient_count(self) -> int:
        return self.approximation.size + sum(d.size for d in self.details)

    def energy(self) -> float:
        total = float(np.dot(self.approximation, self.approximation))
        return total + sum(float(np.dot(d, d)) for d in self.details)
