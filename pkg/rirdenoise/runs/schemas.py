from datetime import datetime

from pydantic import BaseModel, ConfigDict


class DenoiseRunResponse(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    id: int
    status: str
    baseline: bool
    input_filename: str
    error_message: str | None
    report: dict | None
    created_at: datetime
