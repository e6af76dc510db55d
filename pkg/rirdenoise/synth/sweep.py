"""Experiment sweep: modal signal + shaped noise at each SNR, denoised by both
arms, evaluated per band against the exact modal DT60."""

import csv
import itertools
import json
import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from rirdenoise import rng
from rirdenoise.acoustics.service import (
    band_dt60,
    dynamic_improvement,
    edc_undershoot,
    exact_mode_dt60,
    schroeder_edc,
)
from rirdenoise.pipeline.schemas import PipelineConfig
from rirdenoise.pipeline.service import denoise, denoise_baseline
from rirdenoise.synth.schemas import ARMS, ArmResult, ExperimentRecord, SweepPlan
from rirdenoise.synth.service import gen_modal, gen_shaped_noise, mix_at_snr
from rirdenoise.wavelet.schemas import Signal

logger = logging.getLogger(__name__)

RECORD_COLUMNS: tuple[str, ...] = (
    "decay_factor",
    "noise_seed",
    "snr_db",
    "arm",
    "band_hz",
    "exact_dt60_s",
    "dt60_s",
    "relative_error",
    "fit_r2",
    "dynamic_improvement_db",
    "edc_undershoot_db",
    "status",
    "error",
)


def trial_indices(plan: SweepPlan) -> list[tuple[int, int, int]]:
    """(factor, seed, snr) index triples in lexicographic order."""
    return list(
        itertools.product(
            range(len(plan.decay_factors)),
            range(len(plan.noise_seeds)),
            range(len(plan.snr_levels_db)),
        )
    )


def trial_signals(plan: SweepPlan, fi: int, si: int, ni: int) -> tuple[Signal, Signal]:
    """Clean modal signal and its noisy mixture for one trial.

    The noise realization depends on the noise seed only, so it is shared
    across decay factors and SNR levels.
    """
    spec = plan.base_spec.scaled(plan.decay_factors[fi])
    clean = gen_modal(spec)
    noise_seed = rng.derive_seed(plan.seed, plan.noise_seeds[si])
    noise = gen_shaped_noise(spec.length, spec.rate, noise_seed, plan.noise_shape)
    return clean, mix_at_snr(clean, noise, plan.snr_levels_db[ni])


def run_trial(plan: SweepPlan, config: PipelineConfig, fi: int, si: int, ni: int) -> ExperimentRecord:
    spec = plan.base_spec.scaled(plan.decay_factors[fi])
    record = ExperimentRecord(
        factor_index=fi,
        seed_index=si,
        snr_index=ni,
        decay_factor=plan.decay_factors[fi],
        noise_seed=plan.noise_seeds[si],
        snr_db=plan.snr_levels_db[ni],
        bands_hz=plan.bands,
        exact_dt60_seconds=tuple(exact_mode_dt60(m.alpha, spec.rate) for m in spec.modes),
    )
    try:
        clean, noisy = trial_signals(plan, fi, si, ni)
        trial_config = config.model_copy(update={"seed": rng.derive_seed(plan.seed, fi, si, ni)})
        outputs = {
            "noisy": noisy,
            "baseline": denoise_baseline(noisy, trial_config)[0],
            "proposed": denoise(noisy, trial_config)[0],
        }
        clean_edc = schroeder_edc(clean)
        arms = []
        for arm in ARMS:
            out = outputs[arm]
            bands = band_dt60(out, plan.bands, plan.range_db)
            arms.append(
                ArmResult(
                    arm=arm,
                    dt60_seconds=tuple(b.dt60_seconds for b in bands),
                    fit_r2=tuple(b.estimate.fit_r2 if b.estimate else None for b in bands),
                    dynamic_improvement_db=0.0 if arm == "noisy" else dynamic_improvement(noisy, out),
                    edc_undershoot_db=edc_undershoot(clean_edc, schroeder_edc(out)),
                )
            )
        return record.model_copy(update={"arms": tuple(arms)})
    except Exception as e:
        logger.exception(
            "Trial (factor=%s, seed=%s, snr=%s) failed",
            record.decay_factor, record.noise_seed, record.snr_db,
        )
        return record.model_copy(update={"status": "failed", "error": str(e)})


def run_sweep(
    plan: SweepPlan,
    config: PipelineConfig,
    workers: int = 1,
    on_trial: Callable[[ExperimentRecord], None] | None = None,
) -> list[ExperimentRecord]:
    """Run every trial of the plan; records come back in (factor, seed, snr)
    order whatever the worker count."""
    indices = trial_indices(plan)
    logger.info("Running %d trials with %d worker(s)", len(indices), workers)

    def _run(idx: tuple[int, int, int]) -> ExperimentRecord:
        record = run_trial(plan, config, *idx)
        if on_trial is not None:
            on_trial(record)
        return record

    if workers <= 1:
        records = [_run(idx) for idx in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run, indices))

    failed = sum(r.status == "failed" for r in records)
    if failed:
        logger.warning("%d of %d trials failed", failed, len(records))
    return records


def success_rate(records: list[ExperimentRecord]) -> float:
    if not records:
        return 0.0
    return sum(r.status == "ok" for r in records) / len(records)


# ── Export ─────────────────────────────────────────────────────────────────


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def record_rows(records: list[ExperimentRecord]) -> list[dict[str, str]]:
    """One row per trial, arm and band."""
    rows = []
    for rec in records:
        for arm_name in ARMS:
            arm = rec.arm(arm_name)
            for b, band in enumerate(rec.bands_hz):
                exact = rec.exact_dt60_seconds[b]
                est = arm.dt60_seconds[b] if arm else None
                rows.append({
                    "decay_factor": _fmt(rec.decay_factor),
                    "noise_seed": str(rec.noise_seed),
                    "snr_db": _fmt(rec.snr_db),
                    "arm": arm_name,
                    "band_hz": _fmt(band),
                    "exact_dt60_s": _fmt(exact),
                    "dt60_s": _fmt(est),
                    "relative_error": _fmt(abs(est - exact) / exact if est is not None else None),
                    "fit_r2": _fmt(arm.fit_r2[b] if arm else None),
                    "dynamic_improvement_db": _fmt(arm.dynamic_improvement_db if arm else None),
                    "edc_undershoot_db": _fmt(arm.edc_undershoot_db if arm else None),
                    "status": rec.status,
                    "error": rec.error or "",
                })
    return rows


def write_records_csv(records: list[ExperimentRecord], path: Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_COLUMNS, lineterminator="\r\n")
        writer.writeheader()
        writer.writerows(record_rows(records))
    return path


def write_records_json(records: list[ExperimentRecord], path: Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps([r.model_dump(mode="json") for r in records], indent=2))
    return path
