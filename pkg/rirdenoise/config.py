from pathlib import Path

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    THREADS: int = 1
    LOG_LEVEL: str = "INFO"
    DEFAULT_SEED: int = 20250101
    SWEEP_MIN_SUCCESS: float = 0.95

    DATABASE_URL: str = "sqlite:///./rirdenoise.db"
    UPLOAD_ROOT: Path = Path("uploads")
    MAX_FILE_SIZE: int = 200 * 1024 * 1024  # 200 MB
    ALLOWED_EXTENSIONS: set[str] = {".wav"}

    model_config = {"env_prefix": "RIRDENOISE_"}


settings = Settings()
