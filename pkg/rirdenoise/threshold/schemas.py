from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

ThresholdRule = Literal["soft", "hard"]


class ThresholdPolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    rule: ThresholdRule = "soft"
    estimator: Literal["universal", "fixed"] = "universal"
    sigma_method: Literal["mad", "provided"] = "mad"
    scaling: Literal["per_level", "single_level"] = "per_level"
    fixed_value: float | None = Field(default=None, ge=0)
    sigma: float | None = Field(default=None, ge=0)  # used when sigma_method == "provided"

    @model_validator(mode="after")
    def _check_fields(self) -> "ThresholdPolicy":
        if self.estimator == "fixed" and self.fixed_value is None:
            raise ValueError("fixed_value is required when estimator is 'fixed'")
        if self.estimator != "fixed" and self.fixed_value is not None:
            raise ValueError("fixed_value is only allowed when estimator is 'fixed'")
        if self.sigma_method == "provided" and self.sigma is None:
            raise ValueError("sigma is required when sigma_method is 'provided'")
        return self
