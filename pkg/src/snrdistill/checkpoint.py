"""Checkpoint persistence.

Plain-text format: a version line, `key = value` header lines describing the
schedule, architecture and training provenance, then one block per parameter
(`param <name> <shape>` followed by hex-encoded little-endian float64 data,
64 values per line) and a final `end` line. Hex encoding round-trips every
bit of the parameters, and the parser reports byte offsets on any damage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointFormatError
from .nnet import DenoiserModel, Parameterization
from .schedule import CosineSchedule
from .util import fmt_float

FORMAT_VERSION = 1
MAGIC = "snrdistill checkpoint"
VALUES_PER_LINE = 64

Array = np.ndarray


@dataclass
class Checkpoint:
    parameterization: Parameterization
    latent_dim: int
    num_classes: int
    embed_dim: int
    num_frequencies: int
    hidden: tuple[int, ...]
    schedule_kind: str
    t_min: float
    params: dict[str, Array]
    provenance: dict[str, str] = field(default_factory=dict)
    version: int = FORMAT_VERSION


def checkpoint_from_model(model: DenoiserModel, schedule: CosineSchedule,
                          provenance: dict | None = None) -> Checkpoint:
    return Checkpoint(
        parameterization=model.parameterization,
        latent_dim=model.latent_dim,
        num_classes=model.num_classes,
        embed_dim=model.embed_dim,
        num_frequencies=model.num_frequencies,
        hidden=model.hidden,
        schedule_kind=schedule.kind,
        t_min=schedule.t_min,
        params={k: v.copy() for k, v in model.params.items()},
        provenance={k: str(v) for k, v in (provenance or {}).items()},
    )


def model_from_checkpoint(ckpt: Checkpoint) -> tuple[DenoiserModel, CosineSchedule]:
    model = DenoiserModel(
        latent_dim=ckpt.latent_dim,
        num_classes=ckpt.num_classes,
        hidden=ckpt.hidden,
        embed_dim=ckpt.embed_dim,
        num_frequencies=ckpt.num_frequencies,
        parameterization=ckpt.parameterization,
        params={k: v.copy() for k, v in ckpt.params.items()},
    )
    if ckpt.schedule_kind != "cosine":
        raise CheckpointFormatError(f"unknown schedule kind {ckpt.schedule_kind!r}", 0)
    return model, CosineSchedule(t_min=ckpt.t_min)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    lines = [f"{MAGIC} v{ckpt.version}"]
    lines.append(f"model.parameterization = {ckpt.parameterization.value}")
    lines.append(f"model.latent_dim = {ckpt.latent_dim}")
    lines.append(f"model.num_classes = {ckpt.num_classes}")
    lines.append(f"model.embed_dim = {ckpt.embed_dim}")
    lines.append(f"model.num_frequencies = {ckpt.num_frequencies}")
    lines.append(f"model.hidden = {','.join(str(h) for h in ckpt.hidden)}")
    lines.append(f"schedule.kind = {ckpt.schedule_kind}")
    lines.append(f"schedule.t_min = {fmt_float(ckpt.t_min)}")
    for key in sorted(ckpt.provenance):
        lines.append(f"provenance.{key} = {ckpt.provenance[key]}")
    for name, value in ckpt.params.items():
        shape = ",".join(str(s) for s in value.shape)
        lines.append(f"param {name} {shape}")
        flat = np.ascontiguousarray(value, dtype="<f8").reshape(-1)
        raw = flat.tobytes()
        step = VALUES_PER_LINE * 8
        for lo in range(0, len(raw), step):
            lines.append(raw[lo:lo + step].hex())
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


class _Reader:
    """Line reader that tracks the byte offset of the current line."""

    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0
        self.line_start = 0

    def next_line(self) -> str | None:
        if self.pos >= len(self.blob):
            return None
        self.line_start = self.pos
        end = self.blob.find(b"\n", self.pos)
        if end == -1:
            end = len(self.blob)
            self.pos = end
        else:
            self.pos = end + 1
        try:
            return self.blob[self.line_start:end].decode("ascii")
        except UnicodeDecodeError as exc:
            raise CheckpointFormatError("non-ascii bytes in checkpoint", self.line_start) from exc

    def fail(self, message: str):
        raise CheckpointFormatError(message, self.line_start)


def _parse_header_value(reader: _Reader, line: str) -> tuple[str, str]:
    if "=" not in line:
        reader.fail(f"expected 'key = value', got {line!r}")
    key, _, value = line.partition("=")
    return key.strip(), value.strip()


def load_checkpoint(path: str | Path) -> Checkpoint:
    reader = _Reader(Path(path).read_bytes())
    first = reader.next_line()
    if first is None:
        reader.fail("empty checkpoint file")
    if not first.startswith(MAGIC + " v"):
        reader.fail(f"bad magic line {first!r}")
    try:
        version = int(first[len(MAGIC) + 2:])
    except ValueError:
        reader.fail(f"bad version in {first!r}")
    if version != FORMAT_VERSION:
        reader.fail(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")

    header: dict[str, str] = {}
    provenance: dict[str, str] = {}
    params: dict[str, Array] = {}
    line = reader.next_line()
    while line is not None and not line.startswith("param ") and line != "end":
        key, value = _parse_header_value(reader, line)
        if key.startswith("provenance."):
            provenance[key[len("provenance."):]] = value
        else:
            header[key] = value
        line = reader.next_line()

    required = [
        "model.parameterization", "model.latent_dim", "model.num_classes",
        "model.embed_dim", "model.num_frequencies", "model.hidden",
        "schedule.kind", "schedule.t_min",
    ]
    for key in required:
        if key not in header:
            reader.fail(f"missing header field {key}")

    while line is not None and line.startswith("param "):
        parts = line.split()
        if len(parts) != 3:
            reader.fail(f"malformed param line {line!r}")
        name = parts[1]
        try:
            shape = tuple(int(s) for s in parts[2].split(","))
        except ValueError:
            reader.fail(f"malformed shape in {line!r}")
        count = int(np.prod(shape)) if shape else 1
        values = np.empty(count, dtype=np.float64)
        got = 0
        while got < count:
            data_line = reader.next_line()
            if data_line is None:
                reader.fail(f"unexpected end of file inside param {name}")
            try:
                raw = bytes.fromhex(data_line)
            except ValueError:
                reader.fail(f"bad hex data in param {name}")
            if len(raw) % 8 != 0:
                reader.fail(f"hex line in param {name} is not a whole number of float64s")
            chunk = np.frombuffer(raw, dtype="<f8").astype(np.float64)
            if got + chunk.size > count:
                reader.fail(f"too many values in param {name}")
            values[got:got + chunk.size] = chunk
            got += chunk.size
        params[name] = values.reshape(shape)
        line = reader.next_line()

    if line != "end":
        reader.fail(f"expected 'end', got {line!r}")

    try:
        parameterization = Parameterization(header["model.parameterization"])
    except ValueError:
        reader.fail(f"unknown parameterization {header['model.parameterization']!r}")
    try:
        return Checkpoint(
            parameterization=parameterization,
            latent_dim=int(header["model.latent_dim"]),
            num_classes=int(header["model.num_classes"]),
            embed_dim=int(header["model.embed_dim"]),
            num_frequencies=int(header["model.num_frequencies"]),
            hidden=tuple(int(h) for h in header["model.hidden"].split(",")),
            schedule_kind=header["schedule.kind"],
            t_min=float(header["schedule.t_min"]),
            params=params,
            provenance=provenance,
            version=version,
        )
    except ValueError as exc:
        raise CheckpointFormatError(f"bad header value: {exc}", 0) from exc
