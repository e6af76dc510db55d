import os
import tempfile
from pathlib import Path

_TMP = Path(tempfile.mkdtemp(prefix="rirdenoise-tests-"))
os.environ.setdefault("RIRDENOISE_DATABASE_URL", f"sqlite:///{_TMP / 'test.db'}")
os.environ.setdefault("RIRDENOISE_UPLOAD_ROOT", str(_TMP / "uploads"))

import math  # noqa: E402

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from rirdenoise.synth.schemas import ModalSpec, Mode  # noqa: E402
from rirdenoise.wavelet.schemas import Signal  # noqa: E402


def alpha_for_dt60(dt60: float, rate: float) -> float:
    return 3.0 / (dt60 * rate * math.log10(math.e))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_spec() -> ModalSpec:
    """Two low-frequency modes, 2^15 samples at 8 kHz."""
    rate = 8000.0
    return ModalSpec(
        modes=(
            Mode(amplitude=1.0, alpha=alpha_for_dt60(1.0, rate), frequency_hz=50.0),
            Mode(amplitude=0.7, alpha=alpha_for_dt60(0.6, rate), frequency_hz=80.0),
        ),
        length=2**15,
        rate=rate,
    )


@pytest.fixture
def white_signal(rng) -> Signal:
    return Signal(samples=rng.standard_normal(2**12), sample_rate=1000.0)
