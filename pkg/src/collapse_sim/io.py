"""CSV/JSON serialization of ensemble statistics, spectra and check reports.

Floats are written with ``repr`` so files are locale-independent and JSON
round-trips bit-exactly. Output never contains timestamps or host data, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from .ensemble import EnsembleStats
from .spectral import SpectralResult

__all__ = [
    "stats_to_dict",
    "stats_from_dict",
    "write_stats_json",
    "read_stats_json",
    "series_csv",
    "spectrum_csv",
    "reports_to_json",
    "write_text",
    "dumps_json",
    "SERIES_COLUMNS",
    "SPECTRUM_COLUMNS",
]

SERIES_COLUMNS = ("step", "packet_index", "mean_weight", "mean_amp_re", "mean_amp_im")
SPECTRUM_COLUMNS = ("index", "eigenvalue", "relaxation_time")


def _f(x) -> str:
    return repr(float(x))


def _cplx(a: np.ndarray) -> dict:
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _from_cplx(d: dict, shape) -> np.ndarray:
    re = np.asarray(d["re"], dtype=float).reshape(shape)
    im = np.asarray(d["im"], dtype=float).reshape(shape)
    return re + 1j * im


def stats_to_dict(stats: EnsembleStats, config: dict | None = None) -> dict:
    n = stats.n_packets
    out = {
        "config": config or {},
        "n_packets": n,
        "n_trajectories": stats.n_trajectories,
        "record_every": stats.record_every,
        "survival_counts": list(stats.survival_counts),
        "unresolved": stats.unresolved,
        "survival_frequencies": [float(f) for f in stats.survival_frequencies],
        "mean_collapse_time": stats.mean_collapse_time,
        "collapse_time_histogram": {str(k): v for k, v in sorted(stats.collapse_times.items())},
        "cascade_length_histogram": {str(k): v for k, v in sorted(stats.cascade_lengths.items())},
        "weight_sums": stats.weight_sums.tolist(),
        "amp_sums": _cplx(stats.amp_sums),
        "final_weight_sums": stats.final_weight_sums.tolist(),
        "final_amp_sums": _cplx(stats.final_amp_sums),
    }
    return out


def stats_from_dict(d: dict) -> EnsembleStats:
    n = d["n_packets"]
    W = np.asarray(d["weight_sums"], dtype=float).reshape(-1, n)
    return EnsembleStats(
        n_packets=n,
        record_every=d["record_every"],
        n_trajectories=d["n_trajectories"],
        survival_counts=list(d["survival_counts"]),
        unresolved=d["unresolved"],
        weight_sums=W,
        amp_sums=_from_cplx(d["amp_sums"], W.shape),
        final_weight_sums=np.asarray(d["final_weight_sums"], dtype=float),
        final_amp_sums=_from_cplx(d["final_amp_sums"], (n,)),
        collapse_times={int(k): v for k, v in d["collapse_time_histogram"].items()},
        cascade_lengths={int(k): v for k, v in d["cascade_length_histogram"].items()},
    )


def dumps_json(obj) -> str:
    # allow_nan keeps NaN summaries (no resolved trajectories) representable
    return json.dumps(obj, indent=1, sort_keys=False, allow_nan=True) + "\n"


def write_stats_json(path, stats: EnsembleStats, config: dict | None = None) -> None:
    write_text(path, dumps_json(stats_to_dict(stats, config)))


def read_stats_json(path) -> EnsembleStats:
    with open(path, encoding="utf-8") as fh:
        return stats_from_dict(json.load(fh))


def series_csv(stats: EnsembleStats) -> str:
    """Long-format time series: one row per (recorded step, packet)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_COLUMNS)
    mw = stats.mean_weights
    ma = stats.mean_amplitudes
    for row, step in enumerate(stats.steps):
        for k in range(stats.n_packets):
            w.writerow((int(step), k, _f(mw[row, k]), _f(ma[row, k].real), _f(ma[row, k].imag)))
    return buf.getvalue()


def spectrum_csv(result: SpectralResult, asymptotic: float) -> str:
    """Eigenvalues with their relaxation times, plus a trailing summary line.

    The unit eigenvalues have no finite relaxation time and are written as
    ``inf``.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SPECTRUM_COLUMNS)
    times = [float("inf"), float("inf")] + list(result.relaxation)
    for k, (lam, t) in enumerate(zip(result.eigenvalues, times)):
        w.writerow((k, _f(lam), _f(t)))
    T2 = result.selection_time
    buf.write(f"# selection_time={_f(T2)} ratio_to_tau_over_2eps2={_f(T2 / asymptotic)}\n")
    return buf.getvalue()


def reports_to_json(reports: Iterable, config: dict | None = None) -> str:
    reports = list(reports)
    return dumps_json({
        "config": config or {},
        "passed": all(r.passed for r in reports),
        "checks": [r.to_dict() for r in reports],
    })


def write_text(path, text: str) -> None:
    if path is None or str(path) == "-":
        import sys

        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8", newline="\n")
