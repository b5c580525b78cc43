"""Line-delimited JSON dataset files (UTF-8, one object per line)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator, Union

PathLike = Union[str, Path]


def iter_records(path: PathLike) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{number}: bad JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise ValueError(f"{path}:{number}: expected an object")
            yield record


def read_records(path: PathLike) -> list[dict]:
    return list(iter_records(path))


def write_records(path: PathLike, records: Iterable[dict]) -> int:
    """Write records as JSONL; returns the count.  Key order is
    preserved, so identical record sequences give identical bytes."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count
