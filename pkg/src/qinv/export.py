"""CSV/JSON serialization of trajectories and decompositions.

Numbers in CSV files are written with 17 significant digits in lowercase
scientific notation, so the same run always produces the same bytes.
Every file is written to a temporary sibling first and then renamed over
the target, so a failed run never leaves a half-written artifact behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .operators import matrix_to_literal


def fmt(x):
    """One CSV cell."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.16e}"


def csv_text(columns, rows):
    lines = [",".join(columns)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def to_jsonable(obj):
    """Recursively turn numpy values, complex numbers and tuples into JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan; null keeps the file parseable
        return x if np.isfinite(x) else None
    return obj


def json_text(obj):
    return json.dumps(to_jsonable(obj), indent=2) + "\n"


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        # mkstemp creates 0600; give the result ordinary umask-based permissions
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def flat_columns(prefix, dim):
    """Column names for the row-major re/im entries of a ``dim x dim`` matrix."""
    cols = []
    for i in range(dim):
        for j in range(dim):
            cols += [f"{prefix}re_{i}{j}", f"{prefix}im_{i}{j}"]
    return cols


def flat_entries(m):
    m = np.asarray(m, dtype=complex).ravel()
    return np.column_stack([m.real, m.imag]).ravel().tolist()


def basis_to_json(basis):
    """Columns of a basis as a list of ``{"re": [...], "im": [...]}`` vectors."""
    basis = np.asarray(basis, dtype=complex)
    return [{"re": basis[:, k].real.tolist(), "im": basis[:, k].imag.tolist()}
            for k in range(basis.shape[1])]


def decomposition_to_json(d):
    out = {
        "dim": d.dim,
        "dfs_dim": d.dfs_dim,
        "time": d.time,
        "c": [{"re": c.real, "im": c.imag} for c in map(complex, d.c)],
        "rates": list(d.rates),
        "dfs_basis": basis_to_json(d.dfs_basis),
        "comp_basis": basis_to_json(d.comp_basis),
        "heff_invariant": d.heff_invariant,
        "heff_residual": d.heff_residual,
    }
    if d.H_D is not None:
        out["blocks"] = {
            "A": [matrix_literal(a) for a in d.A],
            "B": [matrix_literal(b) for b in d.B],
            **{name: matrix_literal(getattr(d, name))
               for name in ("H_D", "H_N", "H_C", "G_D", "G_N", "G_C")},
        }
    return out


def matrix_literal(m):
    """Like ``matrix_to_literal`` but tolerant of rectangular blocks."""
    m = np.asarray(m, dtype=complex)
    if m.ndim == 2 and m.shape[0] == m.shape[1] and m.shape[0] > 0:
        return matrix_to_literal(m)
    return {"shape": list(m.shape), "re": m.real.tolist(), "im": m.imag.tolist()}
