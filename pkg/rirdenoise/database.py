"""SQLAlchemy engine and session factory for run and sweep-job records."""

from collections.abc import Generator

from sqlalchemy import create_engine
from sqlalchemy.engine import make_url
from sqlalchemy.orm import DeclarativeBase, Session, sessionmaker

from rirdenoise.config import settings


def _connect_args(url: str) -> dict:
    # sweep jobs write from worker threads
    if make_url(url).get_backend_name() == "sqlite":
        return {"check_same_thread": False}
    return {}


engine = create_engine(settings.DATABASE_URL, connect_args=_connect_args(settings.DATABASE_URL))

SessionLocal = sessionmaker(bind=engine, autoflush=False, autocommit=False)


class Base(DeclarativeBase):
    pass


def init_db() -> None:
    """Create the run and sweep-job tables and the upload root."""
    from rirdenoise.runs import models as _runs  # noqa: F401
    from rirdenoise.sweeps import models as _sweeps  # noqa: F401

    Base.metadata.create_all(bind=engine)
    settings.UPLOAD_ROOT.mkdir(parents=True, exist_ok=True)


def get_db() -> Generator[Session, None, None]:
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()
