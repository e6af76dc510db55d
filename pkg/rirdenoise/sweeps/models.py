from datetime import datetime, timezone

UTC = timezone.utc

from sqlalchemy import Integer, String, Text
from sqlalchemy.orm import Mapped, mapped_column

from rirdenoise.database import Base


def _now() -> datetime:
    return datetime.now(UTC)


class SweepJob(Base):
    __tablename__ = "sweep_jobs"

    id: Mapped[int] = mapped_column(primary_key=True, autoincrement=True)
    status: Mapped[str] = mapped_column(String(20), nullable=False, default="pending")
    total_trials: Mapped[int] = mapped_column(Integer, default=0)
    completed_trials: Mapped[int] = mapped_column(Integer, default=0)
    failed_trials: Mapped[int] = mapped_column(Integer, default=0)
    plan_json: Mapped[str] = mapped_column(Text, nullable=False)
    config_json: Mapped[str] = mapped_column(Text, nullable=False)
    output_dir: Mapped[str | None] = mapped_column(String(1000), nullable=True)
    error_message: Mapped[str | None] = mapped_column(Text, nullable=True)
    created_at: Mapped[datetime] = mapped_column(default=_now)
    updated_at: Mapped[datetime] = mapped_column(default=_now, onupdate=_now)
