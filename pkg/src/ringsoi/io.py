"""Deterministic CSV output with an embedded JSON metadata line.

Every file starts with one comment line holding a JSON object (parameters,
truncation, tool version), then a CSV header and rows printed with 17
significant digits so values round-trip bit exactly. No timestamps, no
locale dependence: identical inputs give identical bytes.
"""

import json

import numpy as np

from . import __version__
from .errors import ContractError, ValidationError


def format_float(x) -> str:
    return f"{float(x):.17g}"


def write_table(path, metadata: dict, columns: dict):
    """Write named columns with a metadata header line."""
    names = list(columns)
    if not names:
        raise ContractError("refusing to write a table with no columns")
    arrays = [np.atleast_1d(np.asarray(columns[n])) for n in names]
    length = arrays[0].size
    if any(a.size != length for a in arrays):
        raise ContractError("columns differ in length")
    meta = dict(metadata)
    meta.setdefault("tool_version", __version__)
    lines = ["# " + json.dumps(meta, sort_keys=True, separators=(",", ":"))]
    lines.append(",".join(names))
    for i in range(length):
        lines.append(",".join(format_float(a[i]) for a in arrays))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_table(path):
    """Parse a file written by write_table back into (metadata, columns)."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValidationError(f"{path}: missing metadata header line")
        try:
            meta = json.loads(first[2:])
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: metadata is not valid JSON: {exc}")
        header = fh.readline().strip()
        if not header:
            raise ValidationError(f"{path}: missing column header")
        names = header.split(",")
        rows = []
        for lineno, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(names):
                raise ValidationError(
                    f"{path}:{lineno}: expected {len(names)} fields, "
                    f"got {len(parts)}")
            rows.append([float(p) for p in parts])
    data = np.array(rows) if rows else np.empty((0, len(names)))
    return meta, {n: data[:, i] for i, n in enumerate(names)}


def validate_table(path):
    """Re-read a written file and run the embedded invariant checks.

    Checks are keyed by the metadata's "kind": spectrum tables must be
    energy sorted with half-integer kappa and branch in {-1, 0, +1} and
    residuals below tolerance; series tables need a uniform time grid;
    spectra need peak-normalised magnitudes. Returns (metadata, columns).
    """
    meta, cols = read_table(path)
    kind = meta.get("kind", "")
    if kind in ("spectrum", "floquet-spectrum"):
        key = "energy" if "energy" in cols else "quasienergy"
        e = cols[key]
        if e.size and np.any(np.diff(cols["m"]) < 0):
            raise ValidationError(f"{path}: sectors not sorted")
        for m in np.unique(cols["m"]):
            sel = cols["m"] == m
            if np.any(np.diff(e[sel]) <= 0):
                raise ValidationError(f"{path}: energies not sorted in m={int(m)}")
        if np.any(np.abs(cols["kappa"] - (cols["m"] + 0.5)) > 1e-12):
            raise ValidationError(f"{path}: kappa does not equal m + 1/2")
        if "boundary_residual" in cols and np.any(cols["boundary_residual"] > 1e-9):
            raise ValidationError(f"{path}: boundary residual above 1e-9")
        if "branch" in cols and not set(np.unique(cols["branch"])) <= {-1.0, 1.0}:
            raise ValidationError(f"{path}: branch labels outside {{-1, +1}}")
    elif kind in ("series", "autocorrelation"):
        t = cols["tau"]
        if t.size >= 2:
            steps = np.diff(t)
            if np.max(np.abs(steps - steps[0])) > 1e-9 * abs(steps[0]):
                raise ValidationError(f"{path}: time grid not uniform")
    elif kind == "frequency-spectrum":
        mags = cols["normalized_magnitude"]
        if mags.size and not np.isclose(np.max(mags), 1.0, atol=1e-12):
            raise ValidationError(f"{path}: magnitudes not peak-normalised")
    elif kind == "field":
        dens = cols["density"]
        if np.any(dens < -1e-15):
            raise ValidationError(f"{path}: negative density")
    elif kind in ("sidebands", "bessel-debug", "revival"):
        pass
    else:
        raise ValidationError(f"{path}: unknown table kind {kind!r}")
    return meta, cols
