"""Sidecar manifests written next to every CLI artifact."""

import json
from datetime import datetime, timezone

UTC = timezone.utc
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from rirdenoise import __version__


class RunManifest(BaseModel):
    command: str
    arguments: dict[str, Any] = {}
    config: dict[str, Any] | None = None
    plan: dict[str, Any] | None = None
    inputs: list[str] = []
    outputs: list[str] = []
    seed: int | None = None
    tool_version: str = __version__
    timestamp: datetime = Field(default_factory=lambda: datetime.now(UTC))
    report: dict[str, Any] | None = None


def sidecar_path(artifact: Path) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + ".json")


def write_manifest(artifact: Path, manifest: RunManifest) -> Path:
    path = sidecar_path(artifact)
    path.write_text(manifest.model_dump_json(indent=2))
    return path


def read_manifest(artifact: Path) -> RunManifest:
    return RunManifest.model_validate(json.loads(sidecar_path(artifact).read_text()))
