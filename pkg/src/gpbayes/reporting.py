"""CSV and metadata output helpers for the experiment CLI.

Every CSV gets a header row and a sibling ``<name>.meta`` file carrying
the seed, package version, and the SHA-256 of the resolved config, so an
output directory is self-describing. Floats are written with 17
significant digits (lossless float64 round trip), which also makes
repeated runs with the same seed byte-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path


def format_float(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [format_float(v) if isinstance(v, float) else str(v) for v in row]
            )


def write_meta(path: Path, seed: int, config_digest: str, extra: dict | None = None) -> None:
    from . import __version__

    lines = [
        f"tool = gpbayes-{__version__}",
        f"seed = {seed}",
        f"config_sha256 = {config_digest}",
    ]
    for key, val in (extra or {}).items():
        lines.append(f"{key} = {format_float(val) if isinstance(val, float) else val}")
    path.write_text("\n".join(lines) + "\n")


def write_keyvalues(path: Path, mapping: dict) -> None:
    lines = [
        f"{key} = {format_float(val) if isinstance(val, float) else val}"
        for key, val in mapping.items()
    ]
    path.write_text("\n".join(lines) + "\n")
