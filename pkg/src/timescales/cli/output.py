"""File emission: CSV or JSON tables, JSON documents and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__
from .config import SCHEMA_VERSION, UsageError, to_jsonable

FORMATS = ("csv", "json")


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))  # shortest string that round-trips
    return str(x)


def write_atomic(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(doc) -> bytes:
    return (json.dumps(to_jsonable(doc), indent=2, allow_nan=False) + "\n").encode()


class Emitter:
    """Collects the files of one run; with no output directory nothing is written."""

    def __init__(self, out_dir=None, fmt="csv"):
        if fmt not in FORMATS:
            raise UsageError("invalid_format", f"--format must be one of {FORMATS}")
        self.fmt = fmt
        self.out_dir = None if out_dir is None else Path(out_dir)
        self.files: list[dict] = []
        if self.out_dir is not None:
            try:
                self.out_dir.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise UsageError("output_unwritable", f"cannot create {out_dir}: {exc}") from None
            if not os.access(self.out_dir, os.W_OK):
                raise UsageError("output_unwritable", f"output directory not writable: {out_dir}")

    def _write(self, name: str, data: bytes) -> None:
        if self.out_dir is None:
            return
        path = self.out_dir / name
        try:
            write_atomic(path, data)
        except OSError as exc:
            raise UsageError("output_unwritable", f"cannot write {path}: {exc}") from None
        self.files.append({"path": name, "bytes": len(data),
                           "sha256": hashlib.sha256(data).hexdigest()})

    def table(self, stem: str, header, columns) -> None:
        """Columns of equal length; the first one is the time-like axis.

        CSV keeps ``header`` as given. JSON wraps the data as
        ``{"columns": [...], "times": [...], "values": [[...], ...]}``.
        """
        columns = [np.asarray(c) for c in columns]
        if len({len(c) for c in columns}) != 1 or len(header) != len(columns):
            raise ValueError("table columns must match the header and share one length")
        if self.fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for row in zip(*columns):
                w.writerow([_cell(x) for x in row])
            self._write(f"{stem}.csv", buf.getvalue().encode())
        else:
            doc = {"columns": list(header[1:]), "times": columns[0],
                   "values": [list(row) for row in zip(*columns[1:])]}
            self._write(f"{stem}.json", dump_json(doc))

    def document(self, stem: str, doc) -> None:
        self._write(f"{stem}.json", dump_json(doc))

    def manifest(self, subcommand: str, config: dict, seed, started: datetime,
                 summary: dict) -> None:
        """Written last, so a manifest implies every listed file is complete."""
        if self.out_dir is None:
            return
        doc = {
            "schema_version": SCHEMA_VERSION,
            "tool": "timescales",
            "version": __version__,
            "subcommand": subcommand,
            "config": config,
            "seed": seed,
            "format": self.fmt,
            "started": started.isoformat(),
            "finished": datetime.now(timezone.utc).isoformat(),
            "files": self.files,
            "summary": summary,
        }
        try:
            write_atomic(self.out_dir / "manifest.json", dump_json(doc))
        except OSError as exc:
            raise UsageError("output_unwritable", f"cannot write manifest: {exc}") from None


def verify_manifest(out_dir) -> bool:
    """True when every file listed in the manifest matches its recorded digest."""
    out = Path(out_dir)
    doc = json.loads((out / "manifest.json").read_text())
    for entry in doc["files"]:
        data = (out / entry["path"]).read_bytes()
        if hashlib.sha256(data).hexdigest() != entry["sha256"] or len(data) != entry["bytes"]:
            return False
    return True
