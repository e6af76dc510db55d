import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

EDC_FLOOR_DB = -300.0

RangeDb = tuple[float, float]


class EnergyDecayCurve(BaseModel):
    """Schroeder backward-integrated energy in dB, 0 dB at the first sample."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values_db: np.ndarray
    sample_rate: float = Field(gt=0)

    @field_validator("values_db", mode="before")
    @classmethod
    def _values(cls, value) -> np.ndarray:
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("EDC must be a non-empty 1-D sequence")
        if arr[0] != 0.0:
            raise ValueError(f"EDC must start at 0 dB, got {arr[0]}")
        if np.any(np.diff(arr) > 0):
            raise ValueError("EDC must be monotone nonincreasing")
        return arr

    def __len__(self) -> int:
        return int(self.values_db.size)

    def times(self) -> np.ndarray:
        return np.arange(self.values_db.size) / self.sample_rate


class DecayEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    dt60_seconds: float = Field(gt=0)
    fit_range_db: RangeDb
    fit_r2: float = Field(ge=0, le=1)

    @model_validator(mode="after")
    def _range(self) -> "DecayEstimate":
        upper, lower = self.fit_range_db
        if not upper > lower:
            raise ValueError(f"fit range upper {upper} must exceed lower {lower}")
        return self


class BandDecay(BaseModel):
    """DT60 of one third-octave band; `error` is set when the band did not decay far enough."""

    center_hz: float
    estimate: DecayEstimate | None = None
    error: str | None = None

    @property
    def dt60_seconds(self) -> float | None:
        return self.estimate.dt60_seconds if self.estimate else None
