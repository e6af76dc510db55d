"""Detail-coefficient thresholding (the baseline wavelet denoiser)."""

import math

import numpy as np

from rirdenoise.exceptions import InputError
from rirdenoise.threshold.schemas import ThresholdPolicy, ThresholdRule
from rirdenoise.wavelet.schemas import WaveletDecomposition

MAD_TO_SIGMA = 0.6745


def estimate_sigma(coeffs) -> float:
    """Robust noise scale: median(|c|) / 0.6745."""
    arr = np.asarray(coeffs, dtype=np.float64)
    if arr.size == 0:
        raise InputError("Cannot estimate a noise scale from an empty sequence")
    return float(np.median(np.abs(arr)) / MAD_TO_SIGMA)


def compute_threshold(sigma: float, n: int, policy: ThresholdPolicy) -> float:
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if policy.estimator == "fixed":
        return float(policy.fixed_value)
    return float(sigma * math.sqrt(2.0 * math.log(n)))


def apply_threshold(coeffs, thr: float, rule: ThresholdRule) -> np.ndarray:
    if thr < 0:
        raise InputError(f"threshold must be >= 0, got {thr}")
    arr = np.asarray(coeffs, dtype=np.float64)
    if rule == "hard":
        return np.where(np.abs(arr) > thr, arr, 0.0)
    return np.sign(arr) * np.maximum(np.abs(arr) - thr, 0.0)


def _sigma(coeffs: np.ndarray, policy: ThresholdPolicy) -> float:
    if policy.sigma_method == "provided":
        return float(policy.sigma)
    return estimate_sigma(coeffs)


def level_thresholds(dec: WaveletDecomposition, policy: ThresholdPolicy) -> list[float]:
    """Threshold applied to each detail level d_0 .. d_{L-1}."""
    if policy.scaling == "single_level":
        sigma = _sigma(dec.details[0], policy)
        thr = compute_threshold(sigma, dec.original_length, policy)
        return [thr] * dec.levels
    return [compute_threshold(_sigma(d, policy), d.size, policy) for d in dec.details]


def denoise_details(dec: WaveletDecomposition, policy: ThresholdPolicy) -> WaveletDecomposition:
    thresholds = level_thresholds(dec, policy)
    details = tuple(
        apply_threshold(d, thr, policy.rule) for d, thr in zip(dec.details, thresholds)
    )
    # the approximation array is handed through as the same object
    return dec.model_copy(update={"details": details})


def count_nonzero(dec: WaveletDecomposition) -> list[int]:
    return [int(np.count_nonzero(d)) for d in dec.details]
