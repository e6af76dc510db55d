import logging
from pathlib import Path

import aiofiles
from fastapi import HTTPException, UploadFile
from pydantic import ValidationError
from sqlalchemy.orm import Session
from starlette.concurrency import run_in_threadpool

from rirdenoise.audio import read_wav, write_wav
from rirdenoise.config import settings
from rirdenoise.exceptions import InputError, ProcessingError, bad_request, not_found, unprocessable
from rirdenoise.pipeline.schemas import PipelineConfig
from rirdenoise.pipeline.service import denoise, denoise_baseline
from rirdenoise.runs.models import DenoiseRun

logger = logging.getLogger(__name__)

CHUNK_SIZE = 64 * 1024  # 64 KB


def _validate_extension(filename: str) -> str:
    ext = Path(filename).suffix.lower()
    if ext not in settings.ALLOWED_EXTENSIONS:
        raise bad_request(
            f"File type '{ext}' not allowed. Allowed: {', '.join(sorted(settings.ALLOWED_EXTENSIONS))}"
        )
    return ext


def _parse_config(config_json: str | None) -> PipelineConfig:
    if not config_json:
        return PipelineConfig()
    try:
        return PipelineConfig.model_validate_json(config_json)
    except ValidationError as e:
        raise unprocessable(f"Invalid pipeline config: {e}") from e


def _run_dir(run_id: int) -> Path:
    folder = settings.UPLOAD_ROOT / "runs" / str(run_id)
    folder.mkdir(parents=True, exist_ok=True)
    return folder


async def _save_file(upload: UploadFile, dest: Path) -> int:
    total = 0
    async with aiofiles.open(dest, "wb") as f:
        while chunk := await upload.read(CHUNK_SIZE):
            total += len(chunk)
            if total > settings.MAX_FILE_SIZE:
                await f.close()
                dest.unlink(missing_ok=True)
                raise bad_request(
                    f"File exceeds maximum size of {settings.MAX_FILE_SIZE // (1024 * 1024)} MB"
                )
            await f.write(chunk)
    return total


def _mark_failed(db: Session, run: DenoiseRun, message: str) -> None:
    run.status = "failed"
    run.error_message = message
    db.commit()


def _process(input_path: Path, output_path: Path, config: PipelineConfig, baseline: bool) -> str:
    signal, subtype = read_wav(input_path)
    run = denoise_baseline if baseline else denoise
    out, report = run(signal, config, workers=settings.THREADS)
    write_wav(output_path, out, subtype)
    return report.model_dump_json()


async def create_run(
    db: Session,
    file: UploadFile,
    config_json: str | None = None,
    baseline: bool = False,
) -> DenoiseRun:
    original_filename = file.filename or "upload.wav"
    ext = _validate_extension(original_filename)
    config = _parse_config(config_json)

    run = DenoiseRun(
        status="processing",
        baseline=baseline,
        input_filename=original_filename,
        config_json=config.model_dump_json(),
    )
    db.add(run)
    db.commit()
    db.refresh(run)

    folder = _run_dir(run.id)
    dest = folder / f"input{ext}"
    output = folder / "denoised.wav"

    # every exit path leaves the run completed or failed
    try:
        await _save_file(file, dest)
        run.input_path = str(dest)
        run.report_json = await run_in_threadpool(_process, dest, output, config, baseline)
        run.output_path = str(output)
        run.status = "completed"
    except HTTPException as e:
        _mark_failed(db, run, str(e.detail))
        raise
    except InputError as e:
        _mark_failed(db, run, str(e))
        raise unprocessable(str(e)) from e
    except ProcessingError as e:
        logger.error("Denoise run %d failed: %s", run.id, e)
        run.status = "failed"
        run.error_message = str(e)
    except Exception as e:
        logger.exception("Denoise run %d crashed", run.id)
        run.status = "failed"
        run.error_message = f"{type(e).__name__}: {e}"
    db.commit()
    db.refresh(run)
    return run


def get_run(db: Session, run_id: int) -> DenoiseRun:
    run = db.get(DenoiseRun, run_id)
    if not run:
        raise not_found("Denoise run not found")
    return run


def list_runs(db: Session) -> list[DenoiseRun]:
    return db.query(DenoiseRun).order_by(DenoiseRun.created_at.desc()).all()
