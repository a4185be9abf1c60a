"""Series files and atomic output.

Series are stored as CSV text preceded by two comment lines::

    # eop-series v1
    # meta: {"kind": "returns", ...}
    value
    1.2345e-05
    ...

``kind`` is ``prices`` (columns ``timestamp,price``, ISO minutes) or
``returns`` (single column ``value``). Floats are written with ``repr`` so a
save/load round trip is exact.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .marketdata import PriceSeries, ReturnSeries

FORMAT_TAG = "# eop-series v1"
FORMAT_VERSION = 1


class SeriesFormatError(ValueError):
    pass


@contextmanager
def atomic_write(path: str | Path, mode: str = "w"):
    """Write to a temporary sibling and rename over ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_meta(meta: dict) -> str:
    return "# meta: " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n"


def save_series(series: PriceSeries | ReturnSeries, path: str | Path) -> None:
    if isinstance(series, PriceSeries):
        meta = {"kind": "prices", "minutes_per_day": series.minutes_per_day,
                "session_boundaries": list(series.session_boundaries)}
        header = "timestamp,price\n"
        body = "".join(f"{t},{p!r}\n" for t, p in
                       zip(np.datetime_as_string(series.timestamps, unit="m"),
                           series.prices.tolist()))
    elif isinstance(series, ReturnSeries):
        meta = {"kind": "returns", "step_minutes": series.step_minutes,
                "mean_removed": series.mean_removed,
                "outliers_neutralized": series.outliers_neutralized,
                "source_span": list(series.source_span) if series.source_span else None,
                "drift_fallback": series.drift_fallback, "meta": series.meta}
        header = "value\n"
        body = "".join(f"{v!r}\n" for v in series.values.tolist())
    else:
        raise TypeError(f"cannot save {type(series).__name__}")
    with atomic_write(path) as fh:
        fh.write(FORMAT_TAG + "\n")
        fh.write(_dump_meta(meta))
        fh.write(header)
        fh.write(body)


def load_series(path: str | Path) -> PriceSeries | ReturnSeries:
    with open(path) as fh:
        tag = fh.readline().rstrip("\n")
        if tag != FORMAT_TAG:
            raise SeriesFormatError(f"{path}: not an eop series file (header {tag!r})")
        meta_line = fh.readline()
        if not meta_line.startswith("# meta: "):
            raise SeriesFormatError(f"{path}: missing meta line")
        meta = json.loads(meta_line[len("# meta: "):])
        columns = fh.readline().strip()
        lines = fh.read().split()
    kind = meta.get("kind")
    if kind == "returns":
        if columns != "value":
            raise SeriesFormatError(f"{path}: expected a 'value' column")
        values = np.array([float(v) for v in lines])
        span = meta.get("source_span")
        return ReturnSeries(values, step_minutes=meta["step_minutes"],
                            mean_removed=meta["mean_removed"],
                            outliers_neutralized=meta["outliers_neutralized"],
                            source_span=tuple(span) if span else None,
                            drift_fallback=meta["drift_fallback"], meta=meta.get("meta", {}))
    if kind == "prices":
        if columns != "timestamp,price":
            raise SeriesFormatError(f"{path}: expected 'timestamp,price' columns")
        pairs = [line.split(",") for line in lines]
        ts = np.array([p[0] for p in pairs], dtype="datetime64[m]")
        px = np.array([float(p[1]) for p in pairs])
        return PriceSeries(ts, px, tuple(meta["session_boundaries"]), meta["minutes_per_day"])
    raise SeriesFormatError(f"{path}: unknown series kind {kind!r}")


def load_returns(path: str | Path) -> ReturnSeries:
    s = load_series(path)
    if not isinstance(s, ReturnSeries):
        raise SeriesFormatError(f"{path}: expected a return series, found prices "
                                "(run 'eop preprocess' first)")
    return s


def write_json(path: str | Path, payload) -> None:
    with atomic_write(path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
