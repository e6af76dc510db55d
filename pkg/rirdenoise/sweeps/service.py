import logging
import threading
from pathlib import Path

from sqlalchemy.orm import Session

from rirdenoise.config import settings
from rirdenoise.database import SessionLocal
from rirdenoise.exceptions import bad_request, not_found
from rirdenoise.pipeline.schemas import PipelineConfig
from rirdenoise.sweeps.models import SweepJob
from rirdenoise.synth.aggregation import SweepSummary, export_summary_xlsx, summarize
from rirdenoise.synth.schemas import ExperimentRecord, SweepPlan
from rirdenoise.synth.sweep import run_sweep, success_rate, write_records_csv, write_records_json

logger = logging.getLogger(__name__)

RECORDS_FILE = "records.csv"
SUMMARY_FILE = "summary.json"


def create_sweep_job(db: Session, plan: SweepPlan, config: PipelineConfig) -> SweepJob:
    """Register a sweep job. The caller schedules `run_sweep_job`."""
    active = db.query(SweepJob).filter(SweepJob.status.in_(["pending", "processing"])).first()
    if active:
        raise bad_request(f"Sweep job {active.id} is still running")
    job = SweepJob(
        status="processing",
        total_trials=plan.trial_count,
        completed_trials=0,
        plan_json=plan.model_dump_json(),
        config_json=config.model_dump_json(),
    )
    db.add(job)
    db.commit()
    db.refresh(job)
    return job


def run_sweep_job(job_id: int) -> None:
    """Background task: run the sweep, track progress, write the artifacts."""
    db = SessionLocal()
    lock = threading.Lock()
    try:
        job = db.get(SweepJob, job_id)
        if not job:
            return
        plan = SweepPlan.model_validate_json(job.plan_json)
        config = PipelineConfig.model_validate_json(job.config_json)
        out_dir = settings.UPLOAD_ROOT / "sweeps" / str(job_id)
        out_dir.mkdir(parents=True, exist_ok=True)

        def progress(record: ExperimentRecord) -> None:
            with lock:
                job.completed_trials = job.completed_trials + 1
                if record.status == "failed":
                    job.failed_trials = job.failed_trials + 1
                db.commit()

        records = run_sweep(plan, config, workers=settings.THREADS, on_trial=progress)
        write_records_csv(records, out_dir / RECORDS_FILE)
        write_records_json(records, out_dir / "records.json")
        (out_dir / SUMMARY_FILE).write_text(summarize(records).model_dump_json(indent=2))

        job.output_dir = str(out_dir)
        job.status = "completed" if success_rate(records) >= settings.SWEEP_MIN_SUCCESS else "degraded"
        db.commit()
    except Exception as e:
        logger.exception("Sweep job %d failed", job_id)
        db.rollback()
        try:
            job = db.get(SweepJob, job_id)
            if job:
                job.status = "failed"
                job.error_message = str(e)
                db.commit()
        except Exception:
            pass
    finally:
        db.close()


def get_sweep_job(db: Session, job_id: int) -> SweepJob:
    job = db.get(SweepJob, job_id)
    if not job:
        raise not_found("Sweep job not found")
    return job


def _output_file(job: SweepJob, name: str) -> Path:
    if job.status not in ("completed", "degraded") or not job.output_dir:
        raise bad_request(f"Sweep job {job.id} has not finished (status: {job.status})")
    path = Path(job.output_dir) / name
    if not path.exists():
        raise not_found(f"{name} not found on disk")
    return path


def get_summary(job: SweepJob) -> SweepSummary:
    return SweepSummary.model_validate_json(_output_file(job, SUMMARY_FILE).read_text())


def get_records_path(job: SweepJob) -> Path:
    return _output_file(job, RECORDS_FILE)


def export_summary(job: SweepJob) -> str:
    """Summary workbook for a finished job. Returns temp file path."""
    return export_summary_xlsx(get_summary(job))
