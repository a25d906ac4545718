from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator, Union

import pandas as pd
from pydantic import BaseModel, ValidationError

from app.core.errors import ConfigError, SchemaVersionError
from app.models.models import SCHEMA_VERSION, ExperimentRecord, RunManifest, TrajectorySample

INCOMPLETE_MARKER = "INCOMPLETE"


def read_records(path: Union[str, Path]) -> Iterator[ExperimentRecord]:
    """Parse a records.jsonl file line by line; blank lines are skipped."""
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}:{lineno}: not valid JSON", [f"line {lineno}: {e.msg}"]) from e
            found = payload.get("schema") if isinstance(payload, dict) else None
            if found != SCHEMA_VERSION:
                raise SchemaVersionError(found, SCHEMA_VERSION)
            try:
                yield ExperimentRecord.model_validate(payload)
            except ValidationError as e:
                raise ConfigError.from_validation(e, f"record at {path}:{lineno}") from e


class RecordsRepository:
    """Output directory of one CLI invocation: manifest, records and derived tables."""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.directory / name

    # Manifest ----------------------------------------------------------------

    def write_manifest(self, manifest: RunManifest) -> Path:
        return self.write_json("manifest.json", manifest)

    def mark_incomplete(self, reason: str) -> None:
        self.path(INCOMPLETE_MARKER).write_text(reason.rstrip() + "\n", encoding="utf-8")

    def clear_incomplete(self) -> None:
        self.path(INCOMPLETE_MARKER).unlink(missing_ok=True)

    # Records -----------------------------------------------------------------

    def reset_records(self, name: str = "records.jsonl") -> Path:
        target = self.path(name)
        target.write_text("", encoding="utf-8")
        return target

    def append_record(self, record: ExperimentRecord, name: str = "records.jsonl") -> None:
        with open(self.path(name), "a", encoding="utf-8") as f:
            f.write(record.to_json_line() + "\n")

    def append_samples(self, samples: Iterable[TrajectorySample], name: str = "trajectory.jsonl") -> None:
        with open(self.path(name), "a", encoding="utf-8") as f:
            for sample in samples:
                f.write(sample.model_dump_json() + "\n")

    # Tables ------------------------------------------------------------------

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        target = self.path(name)
        frame.to_csv(target, index=False, float_format=None, lineterminator="\n")
        return target

    def write_json(self, name: str, data: Union[BaseModel, list, dict]) -> Path:
        if isinstance(data, BaseModel):
            payload = data.model_dump(mode="json")
        elif isinstance(data, list):
            payload = [d.model_dump(mode="json") if isinstance(d, BaseModel) else d for d in data]
        else:
            payload = data
        target = self.path(name)
        target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return target
