"""Multi-level discrete wavelet analysis and synthesis.

The transform itself is PyWavelets'; this module owns the filter-bank
registry, the coefficient ordering [d_0, ..., d_{L-1}, a_{L-1}] and the
length bookkeeping the rest of the pipeline relies on.
"""

import logging
import math
import warnings
from functools import lru_cache
from pathlib import Path

import numpy as np
import pywt
from pydantic import ValidationError
from scipy.optimize import least_squares

from rirdenoise.exceptions import (
    FilterBankError,
    SignalLengthError,
    WaveletLevelError,
    WaveletStructureError,
)
from rirdenoise.wavelet.schemas import (
    BoundaryMode,
    Signal,
    WaveletDecomposition,
    WaveletFilterBank,
)

logger = logging.getLogger(__name__)

SHIPPED_BANKS: tuple[str, ...] = ("haar", *(f"db{n}" for n in range(2, 11)), "dmey")

_PYWT_MODES: dict[str, str] = {"periodic": "periodization", "symmetric": "symmetric"}

MEYER_ORTHONORMALITY_TOLERANCE = 1e-12
MEYER_ANCHOR_WEIGHT = 1e-8


def _meyer_conditions(g: np.ndarray) -> np.ndarray:
    """sum_k g[k] g[k+2m] - delta_m for every even shift, then sum(g) - sqrt(2)."""
    n = g.size
    shifted = [np.dot(g[: n - 2 * m], g[2 * m :]) for m in range(n // 2)]
    shifted[0] -= 1.0
    return np.append(shifted, g.sum() - math.sqrt(2.0))


def _meyer_conditions_jacobian(g: np.ndarray) -> np.ndarray:
    n = g.size
    jac = np.zeros((n // 2 + 1, n))
    for m in range(n // 2):
        s = 2 * m
        jac[m, : n - s] += g[s:]
        jac[m, s:] += g[: n - s]
    jac[-1] = 1.0
    return jac


def _meyer_residuals(g: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # weak pull towards the truncated taps selects the nearest solution
    return np.concatenate([_meyer_conditions(g), MEYER_ANCHOR_WEIGHT * (g - taps)])


def _meyer_jacobian(g: np.ndarray, taps: np.ndarray) -> np.ndarray:
    return np.vstack([_meyer_conditions_jacobian(g), MEYER_ANCHOR_WEIGHT * np.eye(g.size)])


def _orthonormal_meyer_lowpass() -> np.ndarray:
    """PyWavelets' 62-tap discrete Meyer low-pass, moved onto the nearest
    orthonormal filter with sum sqrt(2)."""
    taps = np.asarray(pywt.Wavelet("dmey").dec_lo, dtype=np.float64)
    fit = least_squares(
        _meyer_residuals, taps, jac=_meyer_jacobian, args=(taps,),
        method="lm", ftol=1e-15, xtol=1e-15, gtol=1e-15,
    )
    worst = float(np.max(np.abs(_meyer_conditions(fit.x))))
    if worst > MEYER_ORTHONORMALITY_TOLERANCE:
        raise WaveletStructureError(f"Could not orthonormalize the dmey filter (residual {worst:.2e})")
    logger.debug("dmey taps moved by %.2e to reach orthonormality", float(np.max(np.abs(fit.x - taps))))
    return fit.x


@lru_cache(maxsize=None)
def get_bank(name: str) -> WaveletFilterBank:
    if name not in SHIPPED_BANKS:
        raise FilterBankError(
            f"Unknown wavelet '{name}'. Available: {', '.join(SHIPPED_BANKS)}"
        )
    if name == "dmey":
        return WaveletFilterBank.from_lowpass(name, _orthonormal_meyer_lowpass())
    return WaveletFilterBank.from_lowpass(name, pywt.Wavelet(name).dec_lo)


def available_banks() -> tuple[str, ...]:
    return SHIPPED_BANKS


def load_bank_file(path: Path) -> WaveletFilterBank:
    """Read a custom bank: four lines of space-separated decimals
    (analysis_low, analysis_high, synthesis_low, synthesis_high)."""
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as e:
        raise FilterBankError(f"Cannot read filter bank file {path}: {e}") from e
    if len(lines) != 4:
        raise FilterBankError(f"{path}: expected 4 filter lines, found {len(lines)}")
    try:
        filters = [tuple(float(tok) for tok in ln.split()) for ln in lines]
    except ValueError as e:
        raise FilterBankError(f"{path}: {e}") from e
    try:
        return WaveletFilterBank(
            name=f"custom:{path.stem}",
            analysis_low=filters[0],
            analysis_high=filters[1],
            synthesis_low=filters[2],
            synthesis_high=filters[3],
        )
    except ValidationError as e:
        raise FilterBankError(f"{path}: {e.errors()[0]['msg']}") from e


@lru_cache(maxsize=64)
def _pywt_wavelet(bank: WaveletFilterBank) -> pywt.Wavelet:
    return pywt.Wavelet(
        bank.name,
        filter_bank=[
            list(bank.analysis_low),
            list(bank.analysis_high),
            list(bank.synthesis_low),
            list(bank.synthesis_high),
        ],
    )


def max_level(length: int, bank: WaveletFilterBank, boundary: BoundaryMode = "periodic") -> int:
    if length < 2:
        return 0
    if boundary == "periodic":
        return length.bit_length() - 1
    return pywt.dwt_max_level(length, bank.length)


def pad_to_multiple(signal: Signal, levels: int) -> tuple[Signal, int]:
    """Zero-pad the tail so the length is a multiple of 2^levels."""
    block = 1 << levels
    pad = (-len(signal)) % block
    if pad == 0:
        return signal, 0
    return signal.with_samples(np.concatenate([signal.samples, np.zeros(pad)])), pad


def _expected_lengths(n: int, bank: WaveletFilterBank, levels: int, boundary: BoundaryMode) -> list[int]:
    lengths = []
    current = n
    for _ in range(levels):
        current = pywt.dwt_coeff_len(current, bank.length, _PYWT_MODES[boundary])
        lengths.append(current)
    return lengths


def decompose(
    signal: Signal,
    bank: WaveletFilterBank,
    levels: int,
    boundary: BoundaryMode = "periodic",
) -> WaveletDecomposition:
    n = len(signal)
    if n == 0:
        raise SignalLengthError("Cannot decompose an empty signal")
    if levels < 1:
        raise WaveletLevelError(f"levels must be >= 1, got {levels}")
    deepest = max_level(n, bank, boundary)
    if levels > deepest:
        raise WaveletLevelError(
            f"Level {levels} too deep for {n} samples with {bank.name}: "
            f"maximum feasible level is {deepest}"
        )
    if boundary == "periodic" and n % (1 << levels):
        raise SignalLengthError(
            f"Periodic mode needs a length divisible by 2^{levels} = {1 << levels}, got {n}; "
            "pad the signal first (pad_to_multiple)"
        )

    with warnings.catch_warnings():
        # pywt warns about boundary effects once the filter outgrows the level;
        # periodization has no boundary, so the warning is noise here.
        warnings.simplefilter("ignore", UserWarning)
        coeffs = pywt.wavedec(
            signal.samples, _pywt_wavelet(bank), mode=_PYWT_MODES[boundary], level=levels
        )

    return WaveletDecomposition(
        details=tuple(reversed(coeffs[1:])),
        approximation=coeffs[0],
        levels=levels,
        boundary_mode=boundary,
        original_length=n,
        sample_rate=signal.sample_rate,
        bank_name=bank.name,
    )


def _check_structure(dec: WaveletDecomposition, bank: WaveletFilterBank) -> None:
    if dec.bank_name and dec.bank_name != bank.name:
        raise WaveletStructureError(
            f"Decomposition was produced by '{dec.bank_name}', not '{bank.name}'"
        )
    if len(dec.details) != dec.levels:
        raise WaveletStructureError(
            f"Expected {dec.levels} detail levels, found {len(dec.details)}"
        )
    expected = _expected_lengths(dec.original_length, bank, dec.levels, dec.boundary_mode)
    for level, (detail, size) in enumerate(zip(dec.details, expected)):
        if detail.size != size:
            raise WaveletStructureError(
                f"Detail level {level} has {detail.size} coefficients, expected {size}"
            )
    if dec.approximation.size != expected[-1]:
        raise WaveletStructureError(
            f"Approximation has {dec.approximation.size} coefficients, expected {expected[-1]}"
        )


def reconstruct(dec: WaveletDecomposition, bank: WaveletFilterBank) -> Signal:
    _check_structure(dec, bank)
    coeffs = [dec.approximation, *reversed(dec.details)]
    samples = pywt.waverec(coeffs, _pywt_wavelet(bank), mode=_PYWT_MODES[dec.boundary_mode])
    return Signal(samples=samples[: dec.original_length], sample_rate=dec.sample_rate)


def effective_rate(dec: WaveletDecomposition, level: int) -> float:
    if not 0 <= level < dec.levels:
        raise WaveletLevelError(f"level must be in [0, {dec.levels - 1}], got {level}")
    return dec.sample_rate / 2 ** (level + 1)


def cutoff_frequency(dec: WaveletDecomposition) -> float:
    """Boundary between threshold-processed and approximation bands, f_s / 2^L."""
    return dec.sample_rate / 2**dec.levels
