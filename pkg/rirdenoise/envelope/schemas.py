import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Triple = tuple[float, float, float]


class EnvelopeBounds(BaseModel):
    """Box constraints b_l <= (x1, x2, x3) <= b_u."""

    model_config = ConfigDict(frozen=True)

    lower: Triple
    upper: Triple

    @model_validator(mode="after")
    def _check(self) -> "EnvelopeBounds":
        for lo, hi in zip(self.lower, self.upper):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError("bounds must be finite")
            if lo >= hi:
                raise ValueError(f"lower bound {lo} is not below upper bound {hi}")
        if self.lower[0] <= 0 or self.lower[1] <= 0 or self.lower[2] < 0:
            raise ValueError("x1 and x2 lower bounds must be > 0 and x3 lower bound >= 0")
        return self

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= np.asarray(self.lower)) and np.all(x <= np.asarray(self.upper)))


class EnvelopeModel(BaseModel):
    """Fitted decay-plus-floor envelope x1 e^{-x2 n} + x3 (n in samples of the fit domain)."""

    model_config = ConfigDict(frozen=True)

    x1: float = Field(gt=0)
    x2: float = Field(gt=0)
    x3: float = Field(ge=0)
    fit_residual: float = 0.0
    domain_rate: float = Field(gt=0)
    no_decay_detected: bool = False
    iterations: int = 0
    stop_reason: str = ""
    objective_trace: tuple[float, ...] = ()
    bounds: EnvelopeBounds | None = None


class ErrorSchedule(BaseModel):
    """Per-sample relative reconstruction tolerance eps[n]."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    transition_index: int
    nsr: float = Field(ge=0)

    @field_validator("values", mode="before")
    @classmethod
    def _values(cls, value) -> np.ndarray:
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("schedule values must be a non-empty 1-D sequence")
        if np.any(arr <= 0) or np.any(arr > 1):
            raise ValueError("schedule values must lie in (0, 1]")
        return arr

    def __len__(self) -> int:
        return int(self.values.size)
