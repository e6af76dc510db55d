from contextlib import asynccontextmanager

from fastapi import FastAPI

from rirdenoise import __version__
from rirdenoise.database import init_db
from rirdenoise.runs.router import router as runs_router
from rirdenoise.sweeps.router import router as sweeps_router
from rirdenoise.wavelet.service import available_banks


@asynccontextmanager
async def lifespan(app: FastAPI):
    init_db()
    yield


app = FastAPI(
    title="Room Impulse Response Denoising API",
    version=__version__,
    lifespan=lifespan,
)

app.include_router(runs_router, prefix="/api/v1")
app.include_router(sweeps_router, prefix="/api/v1")


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.get("/api/v1/wavelets")
def list_wavelets():
    return {"wavelets": list(available_banks())}
