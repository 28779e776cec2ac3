"""Line-delimited structured report and trajectory table writers.

One JSON record per line so diffs stay stable; floats serialize through
repr (shortest round-trip, at most 17 significant digits), which makes
byte-identical reruns achievable.  Non-finite log fields become null.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

REPORT_NAME = "report.jsonl"
TRAJECTORY_NAME = "trajectory.csv"


def _clean(value):
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return None
        return value
    return value


def certificate_record(cert) -> dict:
    return {
        "record": "certificate",
        "name": cert.name,
        "stage": cert.stage,
        "bound": _clean(cert.bound),
        "measured": _clean(cert.measured),
        "bound_log": _clean(cert.bound_log),
        "measured_log": _clean(cert.measured_log),
        "pass": cert.passed,
        "detail": cert.detail,
    }


def big_int_record(n: int):
    """Exact decimal when small, otherwise a base-10 magnitude."""
    if n < 10**18:
        return {"exact": str(n), "log10": _clean(math.log10(n)) if n > 0 else None}
    return {"exact": None, "log10": n.bit_length() * math.log10(2.0)}


def write_report(path: Path, records: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(r, allow_nan=False, separators=(",", ":")) for r in records]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_trajectory(path: Path, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = ["step,generator,norm,dist_to_target"]
    for r in rows:
        out.append(f"{r.step},{r.generator},{r.norm!r},{r.dist_to_target!r}")
    path.write_text("\n".join(out) + "\n")
    return path
