"""Binary model container: save/load for trained ModelHandles.

Layout (big-endian):
    magic   4 bytes  b"RHTM"
    version u16      currently 1
    schema  u32 length + UTF-8 JSON {"name", "labels", "outside_label"}
    backend u32 length + UTF-8 backend id
    payload u64 length + bytes (JSON {"meta": ..., "params": ...})
    crc     u32      zlib.crc32 of payload bytes
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path
from typing import BinaryIO, Union

from ..errors import (
    BadMagicError,
    ModelFormatError,
    TruncatedModelError,
    VersionMismatchError,
)
from ..schema import LabelSchema

MAGIC = b"RHTM"
VERSION = 1


def _read_exact(fp: BinaryIO, n: int, what: str) -> bytes:
    data = fp.read(n)
    if len(data) != n:
        raise TruncatedModelError(f"model file truncated while reading {what}")
    return data


def save_model(model, path: Union[str, Path]) -> None:
    schema_blob = json.dumps(
        {
            "name": model.schema.name,
            "labels": list(model.schema.labels),
            "outside_label": model.schema.outside_label,
        },
        sort_keys=True,
    ).encode("utf-8")
    backend_blob = model.backend_id.encode("utf-8")
    payload = json.dumps(
        {"meta": model.training_meta, "params": model.parameters}, sort_keys=True
    ).encode("utf-8")
    with open(path, "wb") as fp:
        fp.write(MAGIC)
        fp.write(struct.pack(">H", VERSION))
        fp.write(struct.pack(">I", len(schema_blob)))
        fp.write(schema_blob)
        fp.write(struct.pack(">I", len(backend_blob)))
        fp.write(backend_blob)
        fp.write(struct.pack(">Q", len(payload)))
        fp.write(payload)
        fp.write(struct.pack(">I", zlib.crc32(payload)))


def load_model(path: Union[str, Path]):
    from . import ModelHandle

    with open(path, "rb") as fp:
        magic = fp.read(len(MAGIC))
        if magic != MAGIC:
            raise BadMagicError(f"bad magic header in {path}")
        (version,) = struct.unpack(">H", _read_exact(fp, 2, "version"))
        if version != VERSION:
            raise VersionMismatchError(
                f"model format version {version}, this build reads {VERSION}"
            )
        (schema_len,) = struct.unpack(">I", _read_exact(fp, 4, "schema length"))
        schema_raw = json.loads(_read_exact(fp, schema_len, "schema").decode("utf-8"))
        (backend_len,) = struct.unpack(">I", _read_exact(fp, 4, "backend length"))
        backend_id = _read_exact(fp, backend_len, "backend id").decode("utf-8")
        (payload_len,) = struct.unpack(">Q", _read_exact(fp, 8, "payload length"))
        payload = _read_exact(fp, payload_len, "payload")
        (crc,) = struct.unpack(">I", _read_exact(fp, 4, "checksum"))
        if zlib.crc32(payload) != crc:
            raise ModelFormatError(f"payload checksum mismatch in {path}")

    try:
        body = json.loads(payload.decode("utf-8"))
        schema = LabelSchema(
            name=schema_raw["name"],
            labels=tuple(schema_raw["labels"]),
            outside_label=schema_raw["outside_label"],
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"unreadable model content in {path}: {exc}") from exc
    return ModelHandle(
        backend_id=backend_id,
        schema=schema,
        parameters=body.get("params", {}),
        training_meta=body.get("meta", {}),
    )
