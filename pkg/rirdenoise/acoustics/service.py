"""Room-acoustics metrics: Schroeder EDC, DT60 line fits and floor level changes."""

import logging
import math

import numpy as np
from scipy import signal as sps
from scipy import stats

from rirdenoise.acoustics.schemas import (
    EDC_FLOOR_DB,
    BandDecay,
    DecayEstimate,
    EnergyDecayCurve,
    RangeDb,
)
from rirdenoise.envelope.service import fit_envelope
from rirdenoise.exceptions import InputError, InsufficientDecayError
from rirdenoise.wavelet.schemas import Signal

logger = logging.getLogger(__name__)

DEFAULT_RANGE_DB: RangeDb = (-5.0, -25.0)
FALLBACK_RANGE_DB: RangeDb = (-5.0, -15.0)
THIRD_OCTAVE_CENTERS: tuple[float, ...] = (25.0, 31.5, 40.0, 50.0, 63.0, 80.0, 100.0)
BAND_FILTER_ORDER = 4
REPORT_CAP_DB = 300.0
FLOOR_MIN_AMPLITUDE = 1e-15


def schroeder_edc(signal: Signal) -> EnergyDecayCurve:
    h = signal.samples
    if h.size == 0:
        raise InputError("Cannot integrate an empty signal")
    # reverse cumulative sum, accumulated in extended precision
    energy = np.cumsum((h[::-1].astype(np.longdouble)) ** 2)[::-1]
    total = energy[0]
    if total == 0:
        raise InputError("Cannot compute an energy decay curve of an all-zero signal")
    with np.errstate(divide="ignore"):
        values = (10.0 * np.log10(energy / total)).astype(np.float64)
    values = np.maximum(values, EDC_FLOOR_DB)
    values[0] = 0.0
    values = np.minimum.accumulate(values)
    return EnergyDecayCurve(values_db=values, sample_rate=signal.sample_rate)


def estimate_dt60(edc: EnergyDecayCurve, range_db: RangeDb = DEFAULT_RANGE_DB) -> DecayEstimate:
    """Line fit to the EDC between `upper` and `lower` dB, extrapolated to 60 dB."""
    upper, lower = range_db
    if not upper > lower:
        raise InputError(f"Fit range upper {upper} dB must exceed lower {lower} dB")
    values = edc.values_db
    if values[-1] > lower:
        raise InsufficientDecayError(
            f"EDC only reaches {values[-1]:.1f} dB, fit range needs {lower:.1f} dB"
        )
    inside = np.nonzero((values <= upper) & (values >= lower))[0]
    if inside.size < 2:
        raise InsufficientDecayError(f"Fewer than 2 EDC samples between {upper} and {lower} dB")

    fit = stats.linregress(inside / edc.sample_rate, values[inside])
    if fit.slope >= 0:
        raise InsufficientDecayError("EDC does not decay inside the fit range")
    return DecayEstimate(
        dt60_seconds=60.0 / abs(fit.slope),
        fit_range_db=(upper, lower),
        fit_r2=float(min(fit.rvalue**2, 1.0)),
    )


def estimate_dt60_with_fallback(
    edc: EnergyDecayCurve,
    range_db: RangeDb = DEFAULT_RANGE_DB,
    fallback_db: RangeDb | None = FALLBACK_RANGE_DB,
) -> DecayEstimate:
    """estimate_dt60 over `range_db`, retried over `fallback_db` when the EDC
    does not decay far enough. The estimate records the range it used."""
    try:
        return estimate_dt60(edc, range_db)
    except InsufficientDecayError as e:
        if fallback_db is None or tuple(fallback_db) == tuple(range_db):
            raise
        logger.debug("%s; retrying over %s dB", e, fallback_db)
        return estimate_dt60(edc, fallback_db)


def exact_mode_dt60(alpha: float, rate: float) -> float:
    """DT60 of e^{-alpha n}: 3 / (alpha log10 e) samples, in seconds."""
    if alpha <= 0:
        raise InputError(f"alpha must be positive, got {alpha}")
    if rate <= 0:
        raise InputError(f"rate must be positive, got {rate}")
    return 3.0 / (alpha * math.log10(math.e)) / rate


def noise_floor_db(signal: Signal) -> float:
    """Fitted envelope floor x3 in dB re full scale."""
    model = fit_envelope(signal)
    return 20.0 * math.log10(max(model.x3, FLOOR_MIN_AMPLITUDE))


def dynamic_improvement(before: Signal, after: Signal) -> float:
    """Floor level before minus floor level after; positive means the floor dropped."""
    if len(before) != len(after) or before.sample_rate != after.sample_rate:
        raise InputError("dynamic improvement needs signals of equal length and rate")
    delta = noise_floor_db(before) - noise_floor_db(after)
    return float(np.clip(delta, -REPORT_CAP_DB, REPORT_CAP_DB))


def third_octave_band(signal: Signal, center_hz: float, order: int = BAND_FILTER_ORDER) -> Signal:
    """Zero-phase third-octave band-pass (forward-backward SOS Butterworth)."""
    low, high = center_hz * 2.0 ** (-1.0 / 6.0), center_hz * 2.0 ** (1.0 / 6.0)
    if center_hz <= 0 or high >= signal.sample_rate / 2.0:
        raise InputError(
            f"Band centered at {center_hz} Hz does not fit below Nyquist ({signal.sample_rate / 2.0} Hz)"
        )
    sos = sps.butter(order, [low, high], btype="bandpass", output="sos", fs=signal.sample_rate)
    return signal.with_samples(sps.sosfiltfilt(sos, signal.samples))


def band_dt60(
    signal: Signal,
    centers: tuple[float, ...] = THIRD_OCTAVE_CENTERS,
    range_db: RangeDb = DEFAULT_RANGE_DB,
    fallback_db: RangeDb | None = FALLBACK_RANGE_DB,
) -> list[BandDecay]:
    rows = []
    for fc in centers:
        try:
            band = third_octave_band(signal, fc)
            estimate = estimate_dt60_with_fallback(schroeder_edc(band), range_db, fallback_db)
            rows.append(BandDecay(center_hz=fc, estimate=estimate))
        except (InsufficientDecayError, InputError) as e:
            logger.debug("Band %.1f Hz: %s", fc, e)
            rows.append(BandDecay(center_hz=fc, error=str(e)))
    return rows


def edc_undershoot(clean: EnergyDecayCurve, processed: EnergyDecayCurve, stop_db: float = -30.0) -> float:
    """Largest dip (dB) of the processed EDC below the clean EDC, taken over
    the samples before the clean EDC first reaches `stop_db`."""
    if len(clean) != len(processed):
        raise InputError("EDCs must have equal length")
    reached = np.nonzero(clean.values_db <= stop_db)[0]
    stop = int(reached[0]) if reached.size else len(clean)
    if stop == 0:
        return 0.0
    return float(np.max(clean.values_db[:stop] - processed.values_db[:stop]))
