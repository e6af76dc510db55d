import io

import numpy as np
import pytest
import soundfile as sf
from fastapi.testclient import TestClient
from sqlalchemy import inspect

from rirdenoise.config import settings
from rirdenoise.database import engine
from rirdenoise.main import app
from rirdenoise.pipeline.schemas import PipelineConfig
from rirdenoise.synth.schemas import SweepPlan
from rirdenoise.synth.service import gen_modal, gen_shaped_noise, mix_at_snr

FAST_CONFIG = PipelineConfig(wavelet="db8", levels=4, dl_iterations=3, atoms=4)


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def _wav_bytes(samples: np.ndarray, rate: int = 8000) -> bytes:
    buf = io.BytesIO()
    sf.write(buf, samples, rate, subtype="PCM_16", format="WAV")
    return buf.getvalue()


@pytest.fixture
def rir_bytes(small_spec) -> bytes:
    clean = gen_modal(small_spec)
    noisy = mix_at_snr(clean, gen_shaped_noise(small_spec.length, small_spec.rate, seed=9), 25.0)
    return _wav_bytes(0.5 * noisy.samples / np.max(np.abs(noisy.samples)))


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_wavelets(client):
    names = client.get("/api/v1/wavelets").json()["wavelets"]
    assert "dmey" in names and "haar" in names


# ── Denoise runs ───────────────────────────────────────────────────────────


def test_denoise_upload_and_download(client, rir_bytes):
    resp = client.post(
        "/api/v1/denoise/",
        files={"file": ("room.wav", rir_bytes, "audio/wav")},
        data={"config": FAST_CONFIG.model_dump_json()},
    )
    assert resp.status_code == 201
    run = resp.json()
    assert run["status"] == "completed"
    assert run["baseline"] is False
    assert run["report"]["stages"][0]["name"] == "decompose"

    assert client.get(f"/api/v1/denoise/{run['id']}").json()["id"] == run["id"]
    assert run["id"] in [r["id"] for r in client.get("/api/v1/denoise/").json()]

    download = client.get(f"/api/v1/denoise/{run['id']}/download")
    assert download.status_code == 200
    assert "room_denoised.wav" in download.headers["content-disposition"]
    data, rate = sf.read(io.BytesIO(download.content))
    assert rate == 8000
    assert data.shape == (2**15,)


def test_baseline_run(client, rir_bytes):
    resp = client.post(
        "/api/v1/denoise/",
        files={"file": ("room.wav", rir_bytes, "audio/wav")},
        data={"config": FAST_CONFIG.model_dump_json(), "baseline": "true"},
    )
    assert resp.status_code == 201
    assert resp.json()["baseline"] is True
    assert resp.json()["report"]["baseline"] is True


def test_rejects_wrong_extension(client):
    resp = client.post("/api/v1/denoise/", files={"file": ("room.mp3", b"abc", "audio/mpeg")})
    assert resp.status_code == 400


def test_rejects_invalid_config(client, rir_bytes):
    resp = client.post(
        "/api/v1/denoise/",
        files={"file": ("room.wav", rir_bytes, "audio/wav")},
        data={"config": '{"levels": 0}'},
    )
    assert resp.status_code == 422


def test_rejects_stereo_upload(client):
    resp = client.post(
        "/api/v1/denoise/", files={"file": ("stereo.wav", _wav_bytes(np.zeros((4096, 2))), "audio/wav")}
    )
    assert resp.status_code == 422
    assert "mono required" in resp.json()["detail"]


def test_silent_upload_is_recorded_as_failed(client):
    resp = client.post(
        "/api/v1/denoise/",
        files={"file": ("silent.wav", _wav_bytes(np.zeros(4096)), "audio/wav")},
        data={"config": FAST_CONFIG.model_dump_json()},
    )
    assert resp.status_code == 201
    run = resp.json()
    assert run["status"] == "failed"
    assert "all zeros" in run["error_message"]
    assert client.get(f"/api/v1/denoise/{run['id']}/download").status_code == 404


def test_unknown_run(client):
    assert client.get("/api/v1/denoise/999999").status_code == 404


def _runs_named(client, filename: str) -> list[dict]:
    return [r for r in client.get("/api/v1/denoise/").json() if r["input_filename"] == filename]


def test_oversize_upload_marks_run_failed(client, rir_bytes, monkeypatch):
    monkeypatch.setattr(settings, "MAX_FILE_SIZE", 1024)
    resp = client.post("/api/v1/denoise/", files={"file": ("oversize.wav", rir_bytes, "audio/wav")})
    assert resp.status_code == 400
    runs = _runs_named(client, "oversize.wav")
    assert [r["status"] for r in runs] == ["failed"]
    assert "maximum size" in runs[0]["error_message"]


def test_unexpected_failure_marks_run_failed(client, rir_bytes, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr("rirdenoise.runs.service.denoise", broken)
    resp = client.post(
        "/api/v1/denoise/",
        files={"file": ("crash.wav", rir_bytes, "audio/wav")},
        data={"config": FAST_CONFIG.model_dump_json()},
    )
    assert resp.status_code == 201
    run = resp.json()
    assert run["status"] == "failed"
    assert run["error_message"] == "RuntimeError: solver exploded"
    assert client.get(f"/api/v1/denoise/{run['id']}/download").status_code == 404


def test_tables_exist_after_startup(client):
    assert {"denoise_runs", "sweep_jobs"} <= set(inspect(engine).get_table_names())
    assert settings.UPLOAD_ROOT.is_dir()


# ── Sweeps ─────────────────────────────────────────────────────────────────


def test_sweep_job_lifecycle(client, small_spec):
    plan = SweepPlan(snr_levels_db=(30.0,), noise_seeds=(0,), decay_factors=(1.0,), base_spec=small_spec, seed=1)
    resp = client.post(
        "/api/v1/sweeps/",
        json={"plan": plan.model_dump(mode="json"), "config": FAST_CONFIG.model_dump(mode="json")},
    )
    assert resp.status_code == 202
    job_id = resp.json()["id"]
    assert resp.json()["total_trials"] == 1

    # background tasks finish before the test client returns
    job = client.get(f"/api/v1/sweeps/{job_id}").json()
    assert job["status"] == "completed"
    assert job["completed_trials"] == 1 and job["failed_trials"] == 0

    summary = client.get(f"/api/v1/sweeps/{job_id}/summary").json()
    assert summary["trials"] == 1
    assert {row["arm"] for row in summary["rows"]} == {"noisy", "baseline", "proposed"}

    records = client.get(f"/api/v1/sweeps/{job_id}/records")
    assert records.status_code == 200
    assert records.text.startswith("decay_factor,noise_seed,snr_db,arm")

    export = client.get(f"/api/v1/sweeps/{job_id}/export")
    assert export.status_code == 200
    assert export.headers["content-type"].startswith("application/vnd.openxmlformats")


def test_sweep_request_validation(client):
    resp = client.post("/api/v1/sweeps/", json={"plan": {"noise_seeds": []}})
    assert resp.status_code == 422


def test_unknown_sweep(client):
    assert client.get("/api/v1/sweeps/999999").status_code == 404
    assert client.get("/api/v1/sweeps/999999/summary").status_code == 404
