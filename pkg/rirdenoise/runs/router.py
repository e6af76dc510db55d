from pathlib import Path

from fastapi import APIRouter, Depends, Form, UploadFile, status
from fastapi.responses import FileResponse
from sqlalchemy.orm import Session

from rirdenoise.database import get_db
from rirdenoise.exceptions import not_found
from rirdenoise.runs import service
from rirdenoise.runs.schemas import DenoiseRunResponse

router = APIRouter(prefix="/denoise", tags=["Denoise"])


@router.post("/", response_model=DenoiseRunResponse, status_code=status.HTTP_201_CREATED)
async def create_run(
    file: UploadFile,
    config: str | None = Form(None),
    baseline: bool = Form(False),
    db: Session = Depends(get_db),
):
    return await service.create_run(db, file, config, baseline)


@router.get("/", response_model=list[DenoiseRunResponse])
def list_runs(db: Session = Depends(get_db)):
    return service.list_runs(db)


@router.get("/{run_id}", response_model=DenoiseRunResponse)
def get_run(run_id: int, db: Session = Depends(get_db)):
    return service.get_run(db, run_id)


@router.get("/{run_id}/download")
def download_run(run_id: int, db: Session = Depends(get_db)):
    run = service.get_run(db, run_id)
    if not run.output_path or not Path(run.output_path).exists():
        raise not_found("Denoised file not available")
    stem = Path(run.input_filename).stem
    return FileResponse(path=run.output_path, filename=f"{stem}_denoised.wav", media_type="audio/wav")
