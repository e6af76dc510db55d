import json
from datetime import datetime, timezone

UTC = timezone.utc

from sqlalchemy import Boolean, String, Text
from sqlalchemy.orm import Mapped, mapped_column

from rirdenoise.database import Base


def _now() -> datetime:
    return datetime.now(UTC)


class DenoiseRun(Base):
    __tablename__ = "denoise_runs"

    id: Mapped[int] = mapped_column(primary_key=True, autoincrement=True)
    status: Mapped[str] = mapped_column(String(20), nullable=False, default="pending")
    baseline: Mapped[bool] = mapped_column(Boolean, default=False)
    input_filename: Mapped[str] = mapped_column(String(500), nullable=False)
    input_path: Mapped[str | None] = mapped_column(String(1000), nullable=True)
    output_path: Mapped[str | None] = mapped_column(String(1000), nullable=True)
    config_json: Mapped[str] = mapped_column(Text, nullable=False)
    report_json: Mapped[str | None] = mapped_column(Text, nullable=True)
    error_message: Mapped[str | None] = mapped_column(Text, nullable=True)
    created_at: Mapped[datetime] = mapped_column(default=_now)

    @property
    def report(self) -> dict | None:
        return json.loads(self.report_json) if self.report_json else None
