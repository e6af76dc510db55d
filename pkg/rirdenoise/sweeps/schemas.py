from datetime import datetime

from pydantic import BaseModel, ConfigDict, Field

from rirdenoise.pipeline.schemas import PipelineConfig
from rirdenoise.synth.schemas import SweepPlan


class SweepRequest(BaseModel):
    plan: SweepPlan = Field(default_factory=SweepPlan.default)
    config: PipelineConfig = Field(default_factory=PipelineConfig)


class SweepJobResponse(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    id: int
    status: str
    total_trials: int
    completed_trials: int
    failed_trials: int
    error_message: str | None
    created_at: datetime
    updated_at: datetime
