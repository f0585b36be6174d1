"""Ordered, named tensor collection with a bit-exact on-disk format.

File layout (all integers little-endian):

* bytes 0-3    magic ``LCAM`` (4C 43 41 4D)
* bytes 4-7    format version, 32-bit unsigned (currently 1)
* bytes 8-15   header_len, 64-bit unsigned
* header       UTF-8 JSON ``{"records": [{"name": ..., "shape": [...]}, ...]}``
               in payload order; the writer pads it with trailing newlines
               to a multiple of 8 bytes
* padding      8 - (header_len % 8) zero bytes, so the payload starts on an
               8-byte boundary
* payloads     concatenated 32-bit IEEE-754 floats, row-major, header order

Because the writer aligns the header, every file it produces has size
24 + header_len + 4 * total_scalar_count.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import WeightFormatError

MAGIC = b"LCAM"
VERSION = 1
_PREAMBLE = 16  # magic + version + header_len


class WeightStore:
    """Insertion-ordered mapping of names to float32 arrays."""

    def __init__(self):
        self._arrays: dict[str, np.ndarray] = {}

    def add(self, name: str, array) -> None:
        if not name:
            raise WeightFormatError("bad-name", "empty tensor name")
        if name in self._arrays:
            raise WeightFormatError("duplicate-name", name)
        arr = np.ascontiguousarray(array, dtype=np.float32)
        if arr.size == 0:
            raise WeightFormatError("bad-shape", f"{name}: empty tensor")
        self._arrays[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __len__(self) -> int:
        return len(self._arrays)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._arrays)

    def items(self):
        return self._arrays.items()

    def total_scalars(self) -> int:
        return sum(a.size for a in self._arrays.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        if self.names != other.names:
            return False
        return all(a.shape == other._arrays[n].shape
                   and a.tobytes() == other._arrays[n].tobytes()
                   for n, a in self._arrays.items())

    def to_bytes(self) -> bytes:
        records = [{"name": n, "shape": list(a.shape)} for n, a in self._arrays.items()]
        header = json.dumps({"records": records}, separators=(",", ":")).encode("utf-8")
        header += b"\n" * (-len(header) % 8)  # align so total size is 24 + header + payload
        pad = b"\0" * (8 - len(header) % 8)
        parts = [MAGIC,
                 VERSION.to_bytes(4, "little"),
                 len(header).to_bytes(8, "little"),
                 header,
                 pad]
        parts += [a.astype("<f4", copy=False).tobytes() for a in self._arrays.values()]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "WeightStore":
        if len(data) < _PREAMBLE or data[0:4] != MAGIC:
            raise WeightFormatError("bad-magic", "not an LCAM weight file")
        version = int.from_bytes(data[4:8], "little")
        if version != VERSION:
            raise WeightFormatError("unsupported-version", str(version))
        header_len = int.from_bytes(data[8:16], "little")
        if _PREAMBLE + header_len > len(data):
            raise WeightFormatError("truncated-header",
                                    f"header declares {header_len} bytes")
        try:
            header = json.loads(data[_PREAMBLE:_PREAMBLE + header_len].decode("utf-8"))
            records = header["records"]
            assert isinstance(records, list)
        except (ValueError, KeyError, AssertionError, UnicodeDecodeError) as e:
            raise WeightFormatError("bad-header", str(e)) from e

        pad = 8 - header_len % 8
        offset = _PREAMBLE + header_len
        if offset + pad > len(data) or any(data[offset:offset + pad]):
            raise WeightFormatError("bad-padding", "alignment padding missing or non-zero")
        offset += pad

        store = cls()
        for rec in records:
            try:
                name, shape = rec["name"], tuple(rec["shape"])
            except (TypeError, KeyError) as e:
                raise WeightFormatError("bad-header", f"malformed record {rec!r}") from e
            if not all(isinstance(d, int) and d >= 1 for d in shape):
                raise WeightFormatError("bad-shape", f"{name}: shape {shape}")
            nbytes = 4 * math.prod(shape)
            if offset + nbytes > len(data):
                raise WeightFormatError(
                    "truncated-payload",
                    f"{name}: needs {nbytes} bytes at offset {offset}, "
                    f"{len(data) - offset} available")
            arr = np.frombuffer(data[offset:offset + nbytes], dtype="<f4").reshape(shape)
            store.add(name, arr)
            offset += nbytes
        if offset != len(data):
            raise WeightFormatError("trailing-data",
                                    f"{len(data) - offset} unexpected bytes after payloads")
        return store

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "WeightStore":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())
