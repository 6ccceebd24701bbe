"""Run records and CSV/JSON emission.

Every CLI invocation writes a RunRecord JSON next to its data files,
success or failure: the resolved config snapshot, code version, bath
expansions, hierarchy size, wall-clock timings and the output manifest.
Re-running from the snapshot reproduces the numeric columns exactly
(the algorithms are deterministic; parallel sweep points never share
accumulators).
"""

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .accel import backend_name
from .config import config_to_dict


def fmt(value):
    """Full-precision text for one CSV cell."""
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, columns):
    """RFC-4180 CSV (CRLF, header row) from equal-length named columns."""
    names = list(columns)
    lengths = {len(np.atleast_1d(columns[n])) for n in names}
    if len(lengths) != 1:
        raise ValueError(f"column lengths differ: { {n: len(np.atleast_1d(columns[n])) for n in names} }")
    n_rows = lengths.pop()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(n_rows):
            writer.writerow([fmt(np.atleast_1d(columns[n])[i]) for n in names])
    return path


def write_rows_csv(path, header, rows):
    """RFC-4180 CSV from already-ordered rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


@dataclass
class RunRecord:
    command: str
    config: dict
    version: str = __version__
    backend: str = field(default_factory=backend_name)
    expansions: list = field(default_factory=list)
    hierarchy_size: int | None = None
    timings: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    status: str = "running"
    error: str | None = None
    summary: dict = field(default_factory=dict)

    @classmethod
    def start(cls, command, cfg):
        return cls(command=command, config=config_to_dict(cfg))

    def note_expansions(self, *expansions):
        self.expansions = [
            {
                "scheme": e.scheme,
                "n_terms": e.n_terms,
                "coefficients": [_jsonable(complex(c)) for c in e.coefficients],
                "rates": [_jsonable(complex(r)) for r in e.rates],
            }
            for e in expansions
        ]

    def add_output(self, path):
        self.outputs.append(str(path))
        return path

    def write(self, path):
        payload = {
            "command": self.command,
            "config": self.config,
            "version": self.version,
            "backend": self.backend,
            "bath_expansions": self.expansions,
            "hierarchy_size": self.hierarchy_size,
            "timings": self.timings,
            "outputs": self.outputs,
            "status": self.status,
            "error": self.error,
            "summary": _jsonable(self.summary),
        }
        return write_json(path, payload)


class Stopwatch:
    """Accumulates named wall-clock intervals into a RunRecord."""

    def __init__(self, record):
        self.record = record

    def time(self, name):
        sw = self

        class _Span:
            def __enter__(self_inner):
                self_inner.t0 = time.perf_counter()
                return self_inner

            def __exit__(self_inner, *exc):
                sw.record.timings[name] = round(
                    time.perf_counter() - self_inner.t0, 6
                )
                return False

        return _Span()
