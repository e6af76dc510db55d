from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from rirdenoise import __version__
from rirdenoise.config import settings
from rirdenoise.envelope.schemas import EnvelopeBounds
from rirdenoise.sparsedl.schemas import Dictionary, LearningStats, SparseCode
from rirdenoise.threshold.schemas import ThresholdPolicy
from rirdenoise.wavelet.schemas import BoundaryMode

EpsilonDomain = Literal["approximation", "fullrate"]

STAGE_ORDER: tuple[str, ...] = (
    "decompose",
    "threshold",
    "envelope",
    "schedule",
    "dictionary_learning",
    "reassemble",
    "reconstruct",
)


class PipelineConfig(BaseModel):
    """Resolved denoising configuration; loaded from JSON config files."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    schema_version: Literal[1] = 1
    wavelet: str = "dmey"
    wavelet_file: Path | None = None
    levels: int = Field(default=8, ge=1)
    boundary: BoundaryMode = "periodic"
    threshold_policy: ThresholdPolicy = ThresholdPolicy()
    atoms: int = Field(default=8, ge=1)
    window_ratio: float = Field(default=0.5, gt=0, lt=1)
    dl_iterations: int = Field(default=20, ge=1)
    exact_svd: bool = False
    envelope_bounds: EnvelopeBounds | None = None
    envelope_init: tuple[float, float, float] | None = None
    envelope_block: int = Field(default=16, ge=1)
    epsilon_domain: EpsilonDomain = "approximation"
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    enable_thresholding: bool = True
    enable_dictionary_learning: bool = True


class StageTiming(BaseModel):
    name: str
    seconds: float


class EnvelopeReport(BaseModel):
    domain: EpsilonDomain
    domain_rate: float
    x1: float
    x2: float
    x3: float
    transition_time: float | None
    nsr: float
    no_decay_detected: bool
    fit_residual: float
    iterations: int
    stop_reason: str


class ScheduleReport(BaseModel):
    domain: EpsilonDomain
    tolerance_semantics: str = "relative squared error per patch column"
    transition_index: int
    first_value: float
    last_value: float
    constant_fallback: bool = False
    fallback_reason: Literal["no_decay", "too_short"] | None = None


class DenoiseReport(BaseModel):
    tool_version: str = __version__
    baseline: bool = False
    config: PipelineConfig
    sample_rate: float
    input_length: int
    padding: int = 0
    cutoff_hz: float
    stages: list[StageTiming] = []
    thresholds: list[float] | None = None
    nonzero_before: list[int] = []
    nonzero_after: list[int] = []
    envelope: EnvelopeReport | None = None
    schedule: ScheduleReport | None = None
    window: int | None = None
    dictionary_learning: LearningStats | None = None
    # learned model, kept off the JSON report
    dictionary: Dictionary | None = Field(default=None, exclude=True)
    code: SparseCode | None = Field(default=None, exclude=True)

    @property
    def stage_names(self) -> list[str]:
        return [s.name for s in self.stages]
