"""Decay-plus-floor envelope fitting and the time-varying error schedule.

The model is fitted on a block-mean power envelope. Each block's model value
is the block mean of x1^2 e^{-2 x2 n} + x3^2 over the same samples, so a
sequence generated by the model is recovered exactly and x2 stays a per-sample
rate of the input sequence.
"""

import logging
import math

import numpy as np

from rirdenoise.envelope.schemas import EnvelopeBounds, EnvelopeModel, ErrorSchedule
from rirdenoise.exceptions import EnvelopeFitError, InputError, NoTransitionError
from rirdenoise.wavelet.schemas import Signal

logger = logging.getLogger(__name__)

BLOCK = 16
HOP = 16
POWER_FLOOR = 1e-24  # (1e-12)^2: digital silence guard before log10
EPSILON_FLOOR = 1e-4
MIN_DECAY_DB = 6.0
MAX_ITERATIONS = 200
GRADIENT_TOLERANCE = 1e-8

_LN10 = math.log(10.0)


def block_rms(samples, block: int = BLOCK, hop: int = HOP) -> np.ndarray:
    return np.sqrt(_block_power(np.asarray(samples, dtype=np.float64), block, hop))


def _block_power(samples: np.ndarray, block: int, hop: int) -> np.ndarray:
    if samples.size < block:
        raise InputError(f"Envelope needs at least {block} samples, got {samples.size}")
    windows = np.lib.stride_tricks.sliding_window_view(samples**2, block)[::hop]
    return windows.mean(axis=1)


def default_bounds(peak: float) -> EnvelopeBounds:
    return EnvelopeBounds(
        lower=(1e-6 * peak, 1e-7, 0.0),
        upper=(1e3 * peak, 1.0, peak),
    )


class _BlockModel:
    """Block-averaged log-power model and its Jacobian."""

    def __init__(self, starts: np.ndarray, block: int, observed_log: np.ndarray):
        self.starts = starts
        self.offsets = np.arange(block, dtype=np.float64)
        self.observed_log = observed_log

    def power(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, float, float]:
        x1, x2, x3 = x
        decay = np.exp(-2.0 * x2 * self.starts)
        kernel = np.exp(-2.0 * x2 * self.offsets)
        w = kernel.mean()
        dw = (-2.0 * self.offsets * kernel).mean()
        return x1**2 * decay * w + x3**2, decay, w, dw

    def residual(self, x: np.ndarray) -> np.ndarray:
        p, *_ = self.power(x)
        return self.observed_log - np.log10(np.maximum(p, POWER_FLOOR))

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x1, _, x3 = x
        p, decay, w, dw = self.power(x)
        p = np.maximum(p, POWER_FLOOR)
        d_x1 = 2.0 * x1 * decay * w
        d_x2 = x1**2 * decay * (dw - 2.0 * self.starts * w)
        d_x3 = np.full_like(p, 2.0 * x3)
        return -np.column_stack([d_x1, d_x2, d_x3]) / (p[:, None] * _LN10)


def _projected_gradient(x: np.ndarray, grad: np.ndarray, bounds: EnvelopeBounds) -> np.ndarray:
    pg = grad.copy()
    lo, hi = np.asarray(bounds.lower), np.asarray(bounds.upper)
    pg[(x <= lo) & (grad > 0)] = 0.0
    pg[(x >= hi) & (grad < 0)] = 0.0
    return pg


def _initial_guess(rms: np.ndarray, starts: np.ndarray) -> tuple[np.ndarray, bool]:
    """Head level, tail floor and log-slope between them; second value is False
    when the envelope shows no usable decay."""
    count = rms.size
    head = max(1, math.ceil(0.05 * count))
    tail = max(1, math.ceil(0.10 * count))
    power = rms**2
    head_db = 10.0 * math.log10(max(power[:head].mean(), POWER_FLOOR))
    tail_db = 10.0 * math.log10(max(float(np.median(power[-tail:])), POWER_FLOOR))
    x1 = float(rms[:head].max())
    x3 = float(np.median(rms[-tail:]))
    if head_db - tail_db < MIN_DECAY_DB:
        return np.array([x1, 0.0, x3]), False

    peak = int(np.argmax(rms[:head]))
    reach = np.nonzero(rms[peak:] <= 2.0 * x3)[0]
    stop = peak + int(reach[0]) if reach.size else count - tail
    stop = max(stop, peak + 2)
    seg = slice(peak, min(stop, count))
    slope = np.polyfit(starts[seg], np.log(np.maximum(rms[seg], 1e-12)), 1)[0]
    if slope >= 0:
        return np.array([x1, 0.0, x3]), False
    return np.array([x1, -slope, x3]), True


def fit_envelope(
    signal: Signal,
    bounds: EnvelopeBounds | None = None,
    init: tuple[float, float, float] | None = None,
    block: int = BLOCK,
    hop: int = HOP,
    max_iterations: int = MAX_ITERATIONS,
) -> EnvelopeModel:
    """Bounded Levenberg-Marquardt fit of the decay-plus-floor model.

    Bounds are enforced by projecting every trial step onto the box; a step is
    accepted only when it lowers the objective, so the objective trace is
    non-increasing and every iterate is feasible.
    """
    samples = signal.samples
    if samples.size < block:
        raise EnvelopeFitError(f"Envelope fit needs at least {block} samples, got {samples.size}")
    peak = float(np.max(np.abs(samples)))
    if peak == 0.0:
        raise EnvelopeFitError("Cannot fit an envelope to an all-zero signal")
    bounds = bounds or default_bounds(peak)

    power = _block_power(samples, block, hop)
    starts = np.arange(power.size, dtype=np.float64) * hop
    observed_log = np.log10(np.maximum(power, POWER_FLOOR))
    model = _BlockModel(starts, block, observed_log)

    guess, decaying = _initial_guess(np.sqrt(power), starts)
    if init is not None:
        guess, decaying = np.asarray(init, dtype=np.float64), True

    if not decaying:
        # Flat envelope: only the floor is identifiable.
        x3 = 10.0 ** (0.5 * observed_log.mean())
        x = bounds.clip(np.array([bounds.lower[0], bounds.lower[1], x3]))
        objective = float(np.sum(model.residual(x) ** 2))
        logger.debug("No decay in envelope; floor %.3e", x[2])
        return EnvelopeModel(
            x1=x[0], x2=x[1], x3=x[2], fit_residual=objective,
            domain_rate=signal.sample_rate, no_decay_detected=True,
            stop_reason="no_decay", objective_trace=(objective,), bounds=bounds,
        )

    x = bounds.clip(guess)
    r = model.residual(x)
    objective = float(r @ r)
    trace = [objective]
    lam = 1e-3
    stop_reason = "max_iterations"
    iterations = 0

    while iterations < max_iterations:
        jac = model.jacobian(x)
        grad = jac.T @ r
        if objective < 1e-28 or np.max(np.abs(_projected_gradient(x, 2.0 * grad, bounds))) <= GRADIENT_TOLERANCE:
            stop_reason = "gradient"
            break
        hess = jac.T @ jac
        scale = np.maximum(np.diag(hess), 1e-12 * max(float(np.max(np.diag(hess))), 1e-300))

        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(hess + lam * np.diag(scale), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            candidate = bounds.clip(x + step)
            r_new = model.residual(candidate)
            f_new = float(r_new @ r_new)
            if f_new < objective:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            stop_reason = "no_progress"
            break

        iterations += 1
        improvement = objective - f_new
        x, r, objective = candidate, r_new, f_new
        trace.append(objective)
        lam = max(lam / 10.0, 1e-15)
        if improvement <= 1e-15 * max(objective, 1e-300) and objective > 1e-28:
            stop_reason = "no_progress"
            break

    if stop_reason == "max_iterations":
        logger.warning("Envelope fit stopped after %d iterations (objective %.3e)", iterations, objective)

    x1, x2, x3 = (float(v) for v in x)
    return EnvelopeModel(
        x1=x1, x2=x2, x3=x3, fit_residual=objective,
        domain_rate=signal.sample_rate, no_decay_detected=x3 >= x1,
        iterations=iterations, stop_reason=stop_reason,
        objective_trace=tuple(trace), bounds=bounds,
    )


def nsr(model: EnvelopeModel) -> float:
    return model.x3 / model.x1


def transition_time(model: EnvelopeModel) -> float:
    """Sample index where x1 e^{-x2 n} meets x3 (natural log)."""
    if model.x3 >= model.x1:
        raise NoTransitionError("Noise floor dominates from the first sample")
    if model.x3 == 0.0:
        raise NoTransitionError("Zero noise floor: the decay never meets it")
    return math.log(model.x1 / model.x3) / model.x2


def error_schedule(
    model: EnvelopeModel,
    rate: float,
    length: int,
    transition: float | None = None,
) -> ErrorSchedule:
    """eps[n] = 1e-4 up to floor(T_t), then 1 - exp(-(x2/rate)(n - floor(T_t)) c_nsr),
    clamped below at 1e-4 so the schedule never drops after T_t."""
    if length <= 0:
        raise InputError(f"Schedule length must be positive, got {length}")
    if rate <= 0:
        raise InputError(f"rate must be positive, got {rate}")
    t = transition_time(model) if transition is None else transition
    index = math.floor(t)
    c_nsr = nsr(model)
    n = np.arange(length)
    values = np.full(length, EPSILON_FLOOR)
    late = n > index
    values[late] = -np.expm1(-(model.x2 / rate) * (n[late] - index) * c_nsr)
    values = np.clip(values, EPSILON_FLOOR, np.nextafter(1.0, 0.0))
    return ErrorSchedule(values=values, transition_index=index, nsr=c_nsr)


def constant_schedule(length: int, nsr_value: float = 0.0, value: float = EPSILON_FLOOR) -> ErrorSchedule:
    if length <= 0:
        raise InputError(f"Schedule length must be positive, got {length}")
    return ErrorSchedule(values=np.full(length, value), transition_index=length - 1, nsr=nsr_value)
