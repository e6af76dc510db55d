from fastapi import APIRouter, BackgroundTasks, Depends, status
from fastapi.responses import FileResponse
from sqlalchemy.orm import Session

from rirdenoise.database import get_db
from rirdenoise.sweeps import service
from rirdenoise.sweeps.schemas import SweepJobResponse, SweepRequest
from rirdenoise.synth.aggregation import SweepSummary

router = APIRouter(prefix="/sweeps", tags=["Sweeps"])


@router.post("/", response_model=SweepJobResponse, status_code=status.HTTP_202_ACCEPTED)
def launch_sweep(
    request: SweepRequest,
    background_tasks: BackgroundTasks,
    db: Session = Depends(get_db),
):
    job = service.create_sweep_job(db, request.plan, request.config)
    background_tasks.add_task(service.run_sweep_job, job.id)
    return job


@router.get("/{job_id}", response_model=SweepJobResponse)
def get_sweep(job_id: int, db: Session = Depends(get_db)):
    return service.get_sweep_job(db, job_id)


@router.get("/{job_id}/summary", response_model=SweepSummary)
def get_sweep_summary(job_id: int, db: Session = Depends(get_db)):
    return service.get_summary(service.get_sweep_job(db, job_id))


@router.get("/{job_id}/records")
def get_sweep_records(job_id: int, db: Session = Depends(get_db)):
    path = service.get_records_path(service.get_sweep_job(db, job_id))
    return FileResponse(path=path, filename=f"sweep_{job_id}_records.csv", media_type="text/csv")


@router.get("/{job_id}/export")
def export_sweep(job_id: int, db: Session = Depends(get_db)):
    path = service.export_summary(service.get_sweep_job(db, job_id))
    return FileResponse(
        path=path,
        filename=f"sweep_{job_id}_summary.xlsx",
        media_type="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
    )
