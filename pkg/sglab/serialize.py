"""
File formats for histories, diagnostics, datasets, reports and network checkpoints.

Binary formats are little-endian. A history file is a 24-byte header
(magic ``SGH1``, u32 version, u64 Nt, u64 Nx) followed by the f64 matrix in row order.
A checkpoint is magic ``SGNN`` followed by a u32 version, the layer dims, seed, epoch,
loss, the input scaling and then every weight and bias block in layer order.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import astuple, fields
from pathlib import Path
from typing import Any, BinaryIO, Iterable, List, Sequence, Tuple

import numpy as np

from sglab.diagnostics import DampedEnergyReport, EnergyReport, StabilityRow
from sglab.errors import CheckpointFormatError, HistoryFormatError
from sglab.grid import Field
from sglab.inverse import Dataset, InverseReport
from sglab.neural import InputScaling, MLPParams
from sglab.solver import StateHistory

HISTORY_MAGIC = b"SGH1"
HISTORY_VERSION = 1
HISTORY_HEADER = struct.Struct("<4sIQQ")

CHECKPOINT_MAGIC = b"SGNN"
CHECKPOINT_VERSION = 1

FLOAT_FORMAT = "%.17g"


def _savetxt(
    path: Path, columns: Sequence[str], matrix: np.ndarray, fmt: Any = FLOAT_FORMAT
) -> None:
    np.savetxt(path, matrix, fmt=fmt, delimiter=",", header=",".join(columns), comments="")


def write_history_csv(h: StateHistory, path: Path) -> None:
    """One row per time slice; the header is ``t`` followed by the x grid."""
    columns = ["t", *(f"{x:.17g}" for x in h.grid.x)]
    _savetxt(path, columns, np.column_stack([h.times, h.data]))


def read_history_csv(path: Path) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns ``(times, x, data)``."""
    with path.open() as f:
        header = f.readline().strip().split(",")
    if not header or header[0] != "t":
        raise HistoryFormatError(f"{path} does not start with a t column")

    x = np.array([float(v) for v in header[1:]])
    matrix = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if matrix.shape[1] != len(x) + 1:
        raise HistoryFormatError(f"{path} has {matrix.shape[1]} columns for {len(x)} x values")
    return matrix[:, 0], x, matrix[:, 1:]


def write_history_binary(h: StateHistory, path: Path) -> None:
    with path.open("wb") as f:
        f.write(HISTORY_HEADER.pack(HISTORY_MAGIC, HISTORY_VERSION, h.Nt, h.grid.Nx))
        f.write(np.ascontiguousarray(h.data, dtype="<f8").tobytes())


def read_history_binary(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < HISTORY_HEADER.size:
        raise HistoryFormatError(f"{path} is too short for a history header")

    magic, version, nt, nx = HISTORY_HEADER.unpack_from(raw)
    if magic != HISTORY_MAGIC:
        raise HistoryFormatError(f"{path} has magic {magic!r}, expected {HISTORY_MAGIC!r}")
    if version != HISTORY_VERSION:
        raise HistoryFormatError(f"{path} has unsupported version {version}")

    expected = HISTORY_HEADER.size + 8 * nt * nx
    if len(raw) != expected:
        raise HistoryFormatError(f"{path} holds {len(raw)} bytes, expected {expected}")

    return np.frombuffer(raw, dtype="<f8", offset=HISTORY_HEADER.size).reshape(nt, nx).copy()


def read_history(path: Path) -> np.ndarray:
    """Load the data matrix of either history format, by suffix."""
    if path.suffix == ".csv":
        return read_history_csv(path)[2]
    return read_history_binary(path)


def write_snapshots_csv(h: StateHistory, times: Iterable[float], path: Path) -> None:
    """Columns ``x`` and one column per requested time, taken from the nearest slice."""
    times = list(times)
    columns = ["x", *(f"t={t:g}" for t in times)]
    _savetxt(path, columns, np.column_stack([h.grid.x, *(h.snapshot(t).values for t in times)]))


def write_energy_csv(report: EnergyReport, path: Path) -> None:
    _savetxt(
        path,
        ["t", "E", "bound", "satisfied"],
        np.column_stack([report.times, report.E, report.bound, report.satisfied.astype(int)]),
        fmt=[FLOAT_FORMAT, FLOAT_FORMAT, FLOAT_FORMAT, "%d"],
    )


def write_damped_csv(report: DampedEnergyReport, path: Path) -> None:
    _savetxt(
        path,
        ["t", "energy", "dissipation", "lhs", "rhs"],
        np.column_stack(
            [
                report.times,
                report.energy,
                report.dissipation,
                report.lhs,
                np.full_like(report.times, report.rhs),
            ]
        ),
    )


def write_dataset_csv(dataset: Dataset, path: Path) -> None:
    _savetxt(
        path,
        ["x", "omega", "t", "eta", "eta_t", "noisy"],
        np.column_stack([dataset.inputs, dataset.targets, dataset.noisy.astype(int)]),
        fmt=[FLOAT_FORMAT] * 5 + ["%d"],
    )


REPORT_COLUMNS: List[str] = [f.name for f in fields(InverseReport)]


def write_reports_csv(reports: Sequence[InverseReport], path: Path) -> None:
    """One row per sampling configuration; integers stay exact."""
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for report in reports:
            writer.writerow(
                v if isinstance(v, int) else repr(float(v)) for v in astuple(report)
            )


_INTEGER_COLUMNS = {"N_t", "N_x", "epochs", "seed"}


def read_reports_csv(path: Path) -> List[InverseReport]:
    with path.open(newline="") as f:
        return [
            InverseReport(
                **{
                    name: int(value) if name in _INTEGER_COLUMNS else float(value)
                    for name, value in row.items()
                }
            )
            for row in csv.DictReader(f)
        ]


def write_loss_history_csv(history: np.ndarray, path: Path) -> None:
    _savetxt(
        path,
        ["epoch", "loss"],
        np.column_stack([np.arange(len(history)), history]),
        fmt=["%d", FLOAT_FORMAT],
    )


def write_overlay_csv(
    truth: Tuple[Field, Field], reconstruction: Tuple[Field, Field], path: Path
) -> None:
    (u0, v0), (u0_nn, v0_nn) = truth, reconstruction
    _savetxt(
        path,
        ["x", "u0", "v0", "u0_nn", "v0_nn"],
        np.column_stack([u0.grid.x, u0.values, v0.values, u0_nn.values, v0_nn.values]),
    )


def _write_struct(f: BinaryIO, fmt: str, *values: object) -> None:
    f.write(struct.pack(fmt, *values))


def _read_struct(raw: memoryview, offset: int, fmt: str) -> Tuple[Tuple[Any, ...], int]:
    size = struct.calcsize(fmt)
    if offset + size > len(raw):
        raise CheckpointFormatError("Checkpoint is truncated")
    return struct.unpack_from(fmt, raw, offset), offset + size


def _read_block(raw: memoryview, offset: int, shape: Tuple[int, ...]) -> Tuple[np.ndarray, int]:
    size = 8 * int(np.prod(shape))
    if offset + size > len(raw):
        raise CheckpointFormatError("Checkpoint is truncated")
    block = np.frombuffer(raw, dtype="<f8", count=size // 8, offset=offset).reshape(shape)
    return block.astype(float), offset + size


def save_checkpoint(p: MLPParams, path: Path, epoch: int, loss: float) -> None:
    assert p.scaling is not None
    dims = p.layer_dims
    with path.open("wb") as f:
        f.write(CHECKPOINT_MAGIC)
        _write_struct(f, "<II", CHECKPOINT_VERSION, len(dims))
        _write_struct(f, f"<{len(dims)}Q", *dims)
        _write_struct(f, "<QQd", p.seed, epoch, loss)
        for block in (p.scaling.lo, p.scaling.hi, *p.arrays()):
            f.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_checkpoint(path: Path) -> Tuple[MLPParams, int, float]:
    """Returns ``(params, epoch, loss)``."""
    raw = memoryview(path.read_bytes())
    if bytes(raw[:4]) != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path} is not a network checkpoint")

    (version, n_dims), offset = _read_struct(raw, 4, "<II")
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"{path} has unsupported version {version}")
    dims_raw, offset = _read_struct(raw, offset, f"<{n_dims}Q")
    dims = tuple(int(d) for d in dims_raw)
    (seed, epoch, loss), offset = _read_struct(raw, offset, "<QQd")

    lo, offset = _read_block(raw, offset, (dims[0],))
    hi, offset = _read_block(raw, offset, (dims[0],))
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w, offset = _read_block(raw, offset, (fan_in, fan_out))
        b, offset = _read_block(raw, offset, (fan_out,))
        weights.append(w)
        biases.append(b)

    if offset != len(raw):
        raise CheckpointFormatError(f"{path} has {len(raw) - offset} trailing bytes")

    params = MLPParams(
        layer_dims=dims,
        weights=tuple(weights),
        biases=tuple(biases),
        seed=int(seed),
        scaling=InputScaling(lo=lo, hi=hi),
    )
    return params, int(epoch), float(loss)


def write_stability_csv(rows: Sequence[StabilityRow], path: Path) -> None:
    _savetxt(
        path,
        ["delta", "d0", "dg", "ratio"],
        np.array([[row.delta, row.d0, row.dg, row.ratio] for row in rows]),
    )
