"""End-to-end denoising: DWT, detail thresholding, envelope fit, error
schedule, dictionary learning on a_{L-1}, inverse DWT."""

import logging
import math
import time
from contextlib import contextmanager

import numpy as np

from rirdenoise.envelope.schemas import EnvelopeModel, ErrorSchedule
from rirdenoise.envelope.service import (
    EPSILON_FLOOR,
    constant_schedule,
    error_schedule,
    fit_envelope,
    nsr,
    transition_time,
)
from rirdenoise.exceptions import EnvelopeFitError, NoTransitionError, SignalLengthError
from rirdenoise.pipeline.schemas import (
    DenoiseReport,
    EnvelopeReport,
    PipelineConfig,
    ScheduleReport,
    StageTiming,
)
from rirdenoise.sparsedl.service import (
    build_patch_matrix,
    column_tolerances,
    learn,
    learning_stats,
    reconstruct_sequence,
)
from rirdenoise.threshold.service import count_nonzero, denoise_details, level_thresholds
from rirdenoise.wavelet.schemas import Signal, WaveletDecomposition, WaveletFilterBank
from rirdenoise.wavelet.service import (
    cutoff_frequency,
    decompose,
    get_bank,
    load_bank_file,
    pad_to_multiple,
    reconstruct,
)

logger = logging.getLogger(__name__)


def resolve_bank(config: PipelineConfig) -> WaveletFilterBank:
    if config.wavelet_file is not None:
        return load_bank_file(config.wavelet_file)
    return get_bank(config.wavelet)


@contextmanager
def _stage(report: DenoiseReport, name: str):
    start = time.perf_counter()
    yield
    report.stages.append(StageTiming(name=name, seconds=time.perf_counter() - start))


def _envelope_report(model: EnvelopeModel, config: PipelineConfig, t_t: float | None) -> EnvelopeReport:
    return EnvelopeReport(
        domain=config.epsilon_domain,
        domain_rate=model.domain_rate,
        x1=model.x1,
        x2=model.x2,
        x3=model.x3,
        transition_time=t_t,
        nsr=nsr(model),
        no_decay_detected=model.no_decay_detected,
        fit_residual=model.fit_residual,
        iterations=model.iterations,
        stop_reason=model.stop_reason,
    )


def _schedule(
    model: EnvelopeModel, config: PipelineConfig, n_a: int, full_length: int
) -> tuple[ErrorSchedule, float | None]:
    """eps over the approximation samples, plus the transition time in the fit domain."""
    if model.no_decay_detected:
        logger.warning("No decay found in the envelope; using a constant 1e-4 tolerance")
        return constant_schedule(n_a, nsr(model)), None

    factor = 1 << config.levels
    domain_length = n_a if config.epsilon_domain == "approximation" else full_length
    try:
        t_t = transition_time(model)
    except NoTransitionError:
        # zero floor: the decay never meets it
        t_t = float(domain_length)

    if config.epsilon_domain == "approximation":
        return error_schedule(model, model.domain_rate, n_a, transition=t_t), t_t

    # symmetric boundaries give n_a * 2^L > full_length
    full_length = max(full_length, (n_a - 1) * factor + 1)
    full = error_schedule(model, model.domain_rate, full_length, transition=t_t)
    values = full.values[np.arange(n_a) * factor]
    return ErrorSchedule(values=values, transition_index=math.floor(t_t / factor), nsr=full.nsr), t_t


def denoise_coefficients(
    signal: Signal, config: PipelineConfig, workers: int = 1
) -> tuple[WaveletDecomposition, WaveletDecomposition, DenoiseReport]:
    """Run every stage up to (not including) the inverse transform.

    Returns the decomposition of the padded input, the processed
    decomposition and the report.
    """
    n = len(signal)
    minimum = 1 << (config.levels + 2)
    if n < minimum:
        raise SignalLengthError(
            f"Signal has {n} samples; {config.levels} levels need at least {minimum}"
        )
    if not np.any(signal.samples):
        raise EnvelopeFitError("Signal is all zeros: nothing to denoise")

    bank = resolve_bank(config)
    padded, pad = (
        pad_to_multiple(signal, config.levels) if config.boundary == "periodic" else (signal, 0)
    )
    report = DenoiseReport(
        config=config,
        sample_rate=signal.sample_rate,
        input_length=n,
        padding=pad,
        cutoff_hz=signal.sample_rate / 2**config.levels,
    )

    with _stage(report, "decompose"):
        original = decompose(padded, bank, config.levels, config.boundary)
    report.cutoff_hz = cutoff_frequency(original)
    report.nonzero_before = count_nonzero(original)

    processed = original
    if config.enable_thresholding:
        with _stage(report, "threshold"):
            report.thresholds = level_thresholds(original, config.threshold_policy)
            processed = denoise_details(original, config.threshold_policy)
    report.nonzero_after = count_nonzero(processed)

    if not config.enable_dictionary_learning:
        return original, processed, report

    approx = original.approximation
    n_a = approx.size
    if config.epsilon_domain == "approximation":
        target = Signal(samples=approx, sample_rate=report.cutoff_hz)
    else:
        target = padded
    model = None
    with _stage(report, "envelope"):
        if len(target) >= config.envelope_block:
            model = fit_envelope(
                target,
                bounds=config.envelope_bounds,
                init=config.envelope_init,
                block=config.envelope_block,
                hop=config.envelope_block,
            )
        else:
            logger.warning(
                "Envelope target has %d samples, fewer than one %d-sample block; "
                "using a constant %.0e tolerance",
                len(target), config.envelope_block, EPSILON_FLOOR,
            )

    with _stage(report, "schedule"):
        if model is None:
            schedule, t_t, fallback = constant_schedule(n_a), None, "too_short"
        else:
            schedule, t_t = _schedule(model, config, n_a, len(padded))
            fallback = "no_decay" if model.no_decay_detected else None
    if model is not None:
        report.envelope = _envelope_report(model, config, t_t)
    report.schedule = ScheduleReport(
        domain=config.epsilon_domain,
        transition_index=schedule.transition_index,
        first_value=float(schedule.values[0]),
        last_value=float(schedule.values[-1]),
        constant_fallback=fallback is not None,
        fallback_reason=fallback,
    )

    window = min(max(2, round(config.window_ratio * n_a)), n_a - 1)
    report.window = window
    with _stage(report, "dictionary_learning"):
        patches = build_patch_matrix(approx, window)
        tolerances = column_tolerances(schedule, window, patches.column_energies())
        dictionary, code = learn(
            patches,
            config.atoms,
            tolerances,
            iterations=config.dl_iterations,
            seed=config.seed,
            exact_svd=config.exact_svd,
            workers=workers,
        )
    report.dictionary_learning = learning_stats(patches, dictionary, code, tolerances)
    report.dictionary, report.code = dictionary, code

    with _stage(report, "reassemble"):
        new_approx = reconstruct_sequence(dictionary, code, n_a, approx)
        processed = processed.model_copy(update={"approximation": new_approx})
    return original, processed, report


def denoise(signal: Signal, config: PipelineConfig, workers: int = 1) -> tuple[Signal, DenoiseReport]:
    _, processed, report = denoise_coefficients(signal, config, workers)
    with _stage(report, "reconstruct"):
        out = reconstruct(processed, resolve_bank(config))
    logger.debug(
        "Denoised %d samples (%s)", len(signal), ", ".join(report_stage_summary(report))
    )
    return signal.with_samples(out.samples[: len(signal)]), report


def denoise_baseline(
    signal: Signal, config: PipelineConfig, workers: int = 1
) -> tuple[Signal, DenoiseReport]:
    """Thresholding only: the approximation passes through unchanged."""
    out, report = denoise(
        signal, config.model_copy(update={"enable_dictionary_learning": False}), workers
    )
    report.baseline = True
    return out, report


def report_stage_summary(report: DenoiseReport) -> list[str]:
    return [f"{s.name} {s.seconds * 1e3:.1f} ms" for s in report.stages]
