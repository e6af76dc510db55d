"""Sweep aggregation: medians per (arm, decay factor, SNR) and their workbook export."""

import statistics
import tempfile
from pathlib import Path

from openpyxl import Workbook
from openpyxl.styles import Alignment, Font
from pydantic import BaseModel

from rirdenoise.synth.schemas import ARMS, ExperimentRecord


class SummaryRow(BaseModel):
    arm: str
    decay_factor: float
    snr_db: float
    median_dt60_error: float | None
    median_dynamic_improvement_db: float | None
    median_edc_undershoot_db: float | None
    trials: int
    failed: int


class SweepSummary(BaseModel):
    trials: int
    succeeded: int
    success_rate: float
    rows: list[SummaryRow]

    def lookup(self, arm: str, decay_factor: float, snr_db: float) -> SummaryRow | None:
        return next(
            (r for r in self.rows
             if r.arm == arm and r.decay_factor == decay_factor and r.snr_db == snr_db),
            None,
        )


def _median(values: list[float]) -> float | None:
    return statistics.median(values) if values else None


def group_by_condition(records: list[ExperimentRecord]) -> dict[tuple[float, float], list[ExperimentRecord]]:
    """Records keyed by (decay_factor, snr_db), in first-seen order."""
    groups: dict[tuple[float, float], list[ExperimentRecord]] = {}
    for rec in records:
        groups.setdefault((rec.decay_factor, rec.snr_db), []).append(rec)
    return groups


def summarize(records: list[ExperimentRecord]) -> SweepSummary:
    """Median relative DT60 error over seeds and bands, and median floor
    improvement over seeds, for every arm and condition."""
    rows = []
    for arm in ARMS:
        for (factor, snr), group in group_by_condition(records).items():
            errors, improvements, undershoots = [], [], []
            for rec in group:
                result = rec.arm(arm)
                if rec.status != "ok" or result is None:
                    continue
                for est, exact in zip(result.dt60_seconds, rec.exact_dt60_seconds):
                    if est is not None:
                        errors.append(abs(est - exact) / exact)
                if result.dynamic_improvement_db is not None:
                    improvements.append(result.dynamic_improvement_db)
                if result.edc_undershoot_db is not None:
                    undershoots.append(result.edc_undershoot_db)
            rows.append(SummaryRow(
                arm=arm,
                decay_factor=factor,
                snr_db=snr,
                median_dt60_error=_median(errors),
                median_dynamic_improvement_db=_median(improvements),
                median_edc_undershoot_db=_median(undershoots),
                trials=len(group),
                failed=sum(r.status == "failed" for r in group),
            ))
    succeeded = sum(r.status == "ok" for r in records)
    return SweepSummary(
        trials=len(records),
        succeeded=succeeded,
        success_rate=succeeded / len(records) if records else 0.0,
        rows=rows,
    )


def export_summary_xlsx(summary: SweepSummary, path: Path | None = None) -> str:
    """Write one sheet per arm. Returns the workbook path (a temp file when none is given)."""
    wb = Workbook()
    wb.remove(wb.active)

    headers = ["Decay factor", "SNR (dB)", "Median DT60 error", "Median dynamic improvement (dB)",
               "Median EDC undershoot (dB)", "Trials", "Failed"]
    for arm in ARMS:
        ws = wb.create_sheet(title=arm.capitalize())
        ws.append(headers)
        for col_idx, _ in enumerate(headers, 1):
            cell = ws.cell(row=1, column=col_idx)
            cell.font = Font(bold=True, size=11)
            cell.alignment = Alignment(horizontal="center")

        for row in (r for r in summary.rows if r.arm == arm):
            ws.append([
                row.decay_factor,
                row.snr_db,
                row.median_dt60_error,
                row.median_dynamic_improvement_db,
                row.median_edc_undershoot_db,
                row.trials,
                row.failed,
            ])
            ws.cell(row=ws.max_row, column=3).number_format = "0.00%"
            for col_idx in (4, 5):
                ws.cell(row=ws.max_row, column=col_idx).number_format = "0.00"

        for col in ws.columns:
            width = max(len(str(cell.value)) if cell.value is not None else 0 for cell in col)
            ws.column_dimensions[col[0].column_letter].width = min(width + 4, 50)

    if path is None:
        tmp = tempfile.NamedTemporaryFile(suffix=".xlsx", delete=False)
        tmp.close()
        path = Path(tmp.name)
    wb.save(str(path))
    return str(path)
