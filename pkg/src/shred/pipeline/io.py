"""Lossless file formats: CSV snapshot matrices and binary checkpoints.

Snapshots: one header row
    # shred-snapshots v1; Nh=<int>; Nt=<int>; L=<float>; bc=<str>
followed by Nh comma-separated rows of Nt doubles, written with
shortest round-trip formatting (Python repr), so round trips are
bit-exact.

Checkpoints: magic ``SHRD``, format version (u32 LE), a length-prefixed
JSON metadata block, then raw little-endian float64 payloads in the
order listed in the metadata.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, UnsupportedVersion
from ..rom import SvdBundle
from ..shrednet import Normalization, ShredModel
from ..simulate import SnapshotMatrix, TimeGrid
from ..spectral import SpatialGrid

SNAPSHOT_MAGIC = "# shred-snapshots v1"
MEASUREMENT_MAGIC = "# shred-measurements v1"
CHECKPOINT_MAGIC = b"SHRD"
CHECKPOINT_VERSION = 1


def _format_row(row) -> str:
    return ",".join(repr(float(v)) for v in row)


def save_snapshots(path, snapshots: SnapshotMatrix) -> None:
    nh, nt = snapshots.values.shape
    lines = [
        f"{SNAPSHOT_MAGIC}; Nh={nh}; Nt={nt}; "
        f"L={snapshots.grid.length!r}; bc={snapshots.grid.boundary_kind}"
    ]
    lines.extend(_format_row(row) for row in snapshots.values)
    Path(path).write_text("\n".join(lines) + "\n")


def load_snapshots(path) -> SnapshotMatrix:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(SNAPSHOT_MAGIC):
        raise FormatError(f"{path}: missing snapshot header")
    fields = dict(
        part.strip().split("=", 1)
        for part in lines[0].split(";")[1:]
    )
    try:
        nh, nt = int(fields["Nh"]), int(fields["Nt"])
        length, bc = float(fields["L"]), fields["bc"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed snapshot header") from exc
    if len(lines) - 1 != nh:
        raise FormatError(f"{path}: header says Nh={nh}, file has {len(lines) - 1} rows")
    values = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    if values.shape != (nh, nt):
        raise FormatError(f"{path}: header says Nt={nt}, rows disagree")
    grid = SpatialGrid(length=length, num_points=nh, boundary_kind=bc)
    return SnapshotMatrix(values, grid, TimeGrid(np.arange(nt, dtype=float)))


def save_measurements(path, values: np.ndarray, instants: np.ndarray) -> None:
    """Sensor trajectories: rows = sensors; first data row is the time axis."""
    values = np.atleast_2d(values)
    lines = [f"{MEASUREMENT_MAGIC}; S={values.shape[0]}; Nt={values.shape[1]}"]
    lines.append(_format_row(instants))
    lines.extend(_format_row(row) for row in values)
    Path(path).write_text("\n".join(lines) + "\n")


def load_measurements(path):
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(MEASUREMENT_MAGIC):
        raise FormatError(f"{path}: missing measurement header")
    instants = np.array([float(v) for v in lines[1].split(",")])
    values = np.array([[float(v) for v in line.split(",")] for line in lines[2:]])
    return values, instants


# -- binary checkpoints ------------------------------------------------------

def _write_checkpoint(path, metadata: dict, arrays: list) -> None:
    meta = json.dumps(metadata, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_checkpoint(path):
    blob = Path(path).read_bytes()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic")
    version = struct.unpack("<I", blob[4:8])[0]
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersion(f"{path}: checkpoint version {version} is not supported")
    meta_len = struct.unpack("<I", blob[8:12])[0]
    metadata = json.loads(blob[12:12 + meta_len].decode())
    payload = np.frombuffer(blob[12 + meta_len:], dtype="<f8")
    return metadata, payload


def save_checkpoint(path, obj) -> None:
    if isinstance(obj, SvdBundle):
        metadata = {
            "kind": "svd_bundle",
            "num_dof": obj.U.shape[0],
            "rank": obj.rank,
            "num_times": obj.V_latent.shape[1],
            "discarded_energy": obj.discarded_energy,
            "payload": ["U", "singular_values", "V_latent"],
        }
        _write_checkpoint(path, metadata, [obj.U, obj.singular_values, obj.V_latent])
        return
    if isinstance(obj, ShredModel):
        names = [name for name, _ in obj.parameters()]
        shapes = {name: list(arr.shape) for name, arr in obj.parameters()}
        metadata = {
            "kind": "shred_model",
            "input_width": obj.input_width,
            "output_width": obj.output_width,
            "lag": obj.lag,
            "hidden_size": obj.lstm[0].hidden_size,
            "num_lstm_layers": len(obj.lstm),
            "decoder_widths": [w.shape[0] for w in obj.decoder.weights[:-1]],
            "seed": obj.seed,
            "has_norm": obj.in_norm is not None,
            "payload": names,
            "shapes": shapes,
        }
        arrays = [arr for _, arr in obj.parameters()]
        if obj.in_norm is not None:
            arrays += [obj.in_norm.minimum, obj.in_norm.maximum,
                       obj.out_norm.minimum, obj.out_norm.maximum]
            metadata["norm_width"] = int(obj.in_norm.minimum.size)
        _write_checkpoint(path, metadata, arrays)
        return
    raise TypeError(f"cannot checkpoint object of type {type(obj).__name__}")


def load_checkpoint(path):
    metadata, payload = _read_checkpoint(path)
    kind = metadata.get("kind")
    if kind == "svd_bundle":
        nh, r, nt = metadata["num_dof"], metadata["rank"], metadata["num_times"]
        sizes = [nh * r, r, r * nt]
        if payload.size != sum(sizes):
            raise FormatError(f"{path}: payload size does not match metadata")
        u, s, v = np.split(payload, np.cumsum(sizes)[:-1])
        return SvdBundle(
            U=u.reshape(nh, r).copy(),
            singular_values=s.copy(),
            V_latent=v.reshape(r, nt).copy(),
            rank=r,
            discarded_energy=metadata["discarded_energy"],
        )
    if kind == "shred_model":
        model = ShredModel.build(
            input_width=metadata["input_width"],
            output_width=metadata["output_width"],
            lag=metadata["lag"],
            hidden_size=metadata["hidden_size"],
            num_lstm_layers=metadata["num_lstm_layers"],
            decoder_widths=metadata["decoder_widths"],
            seed=metadata["seed"],
        )
        offset = 0
        for name, arr in model.parameters():
            shape = tuple(metadata["shapes"][name])
            size = int(np.prod(shape))
            arr[...] = payload[offset:offset + size].reshape(shape)
            offset += size
        if metadata.get("has_norm"):
            w = metadata["norm_width"]
            r = metadata["output_width"]
            i0, i1, o0, o1 = np.split(payload[offset:], np.cumsum([w, w, r]))
            model.in_norm = Normalization(minimum=i0.copy(), maximum=i1.copy())
            model.out_norm = Normalization(minimum=o0.copy(), maximum=o1.copy())
        return model
    raise FormatError(f"{path}: unknown checkpoint kind {kind!r}")
