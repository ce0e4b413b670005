"""CSV and manifest serialisation."""

from __future__ import annotations

import hashlib
import json
import platform
from pathlib import Path

import numpy as np

from .dynamics import Trajectory
from .exceptions import ValidationError
from .filtering import FilterRun
from .observation import ObservationSeries

FLOAT_FMT = "%.17g"
MANIFEST = "manifest.json"

__all__ = [
    "write_trajectory",
    "read_trajectory",
    "write_observations",
    "read_observations",
    "write_filter_run",
    "write_field",
    "file_sha256",
    "write_manifest",
    "read_manifest",
    "verify_manifest",
    "snapshot_name",
]


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, rows, fmt=FLOAT_FMT, delimiter=",")
    return path


def _read_csv(path):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"missing input file {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def _complex_columns(prefix, labels):
    cols = []
    for lab in labels:
        cols += [f"re_{prefix}{lab}", f"im_{prefix}{lab}"]
    return cols


def _interleave(z):
    z = np.asarray(z)
    out = np.empty((z.shape[0], 2 * z.shape[1]))
    out[:, 0::2] = z.real
    out[:, 1::2] = z.imag
    return out


def _deinterleave(a):
    return a[:, 0::2] + 1j * a[:, 1::2]


def write_trajectory(path, traj: Trajectory, grid):
    c, d = grid.wavenumbers
    labels = [f"({ci};{di})" for ci, di in zip(c, d)]
    rows = np.column_stack([traj.times, _interleave(traj.states)])
    return _write_csv(path, ["t"] + _complex_columns("w", labels), rows)


def read_trajectory(path, grid) -> Trajectory:
    header, data = _read_csv(path)
    if data.shape[1] != 1 + 2 * grid.N:
        raise ValidationError(
            f"{path} has {(data.shape[1] - 1) // 2} modes but the configured grid has {grid.N}"
        )
    return Trajectory(data[:, 0], _deinterleave(data[:, 1:]))


def write_observations(path, obs: ObservationSeries, grid):
    labels = [f"({grid.mode(int(k))[0]};{grid.mode(int(k))[1]})" for k in obs.observed]
    rows = np.column_stack([obs.times, _interleave(obs.y)])
    return _write_csv(path, ["t"] + _complex_columns("y", labels), rows)


def read_observations(path, observed, seed=None, noise=None) -> ObservationSeries:
    header, data = _read_csv(path)
    if data.shape[1] != 1 + 2 * len(observed):
        raise ValidationError(f"{path} has {(data.shape[1] - 1) // 2} observed components, expected {len(observed)}")
    return ObservationSeries(data[:, 0], _deinterleave(data[:, 1:]), np.asarray(observed), seed, noise or {})


FILTER_COLUMNS = [
    "t",
    "sigma",
    "rel_error",
    "rel_error_observed",
    "detect_max_real",
    "detect_unobserved_max",
    "lmi_max_eig",
    "gain_residual",
    "symmetry_correction",
]


def write_filter_run(path, run: FilterRun):
    rows = np.column_stack([run.times] + [getattr(run, c) for c in FILTER_COLUMNS[1:]])
    return _write_csv(path, FILTER_COLUMNS, rows)


def read_filter_run_table(path):
    header, data = _read_csv(path)
    return {h: data[:, i] for i, h in enumerate(header)}


def write_field(path, field_):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, field_, fmt=FLOAT_FMT, delimiter=",")
    return path


def snapshot_name(prefix, t):
    return f"{prefix}_t{t:08.3f}.csv"


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(directory, *, config_hash, stage_hash, files, seeds=None, timings=None, extra=None):
    directory = Path(directory)
    import numpy as _np
    import scipy as _sp

    from . import __version__

    entries = {}
    for f in files:
        f = Path(f)
        entries[str(f.relative_to(directory))] = file_sha256(f)
    manifest = {
        "config_hash": config_hash,
        "stage_hash": stage_hash,
        "seeds": seeds or {},
        "versions": {
            "vortassim": __version__,
            "numpy": _np.__version__,
            "scipy": _sp.__version__,
            "python": platform.python_version(),
        },
        "files": entries,
        "timings_s": timings or {},
    }
    if extra:
        manifest.update(extra)
    path = directory / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(directory):
    path = Path(directory) / MANIFEST
    if not path.exists():
        raise ValidationError(f"no manifest in {directory}; run the upstream command first")
    return json.loads(path.read_text(encoding="utf-8"))


def verify_manifest(directory, expected_stage_hash):
    """Refuse inputs produced by another configuration or modified afterwards."""
    manifest = read_manifest(directory)
    if manifest.get("stage_hash") != expected_stage_hash:
        raise ValidationError(
            f"{directory} was produced with a different configuration "
            f"(stage hash {manifest.get('stage_hash')} != {expected_stage_hash}); refusing to reuse it"
        )
    for rel, digest in manifest["files"].items():
        p = Path(directory) / rel
        if not p.exists():
            raise ValidationError(f"{p} listed in the manifest is missing")
        if file_sha256(p) != digest:
            raise ValidationError(f"{p} does not match its manifest checksum; refusing to reuse it")
    return manifest
