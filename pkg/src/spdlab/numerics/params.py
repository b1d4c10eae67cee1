"""Named parameter containers and their binary serialization."""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

MAGIC = b"SPDPARAM"
FORMAT_VERSION = 1
_LITTLE = b"<"


class DimensionError(ValueError):
    """Raised when array shapes do not line up."""


class DomainError(ValueError):
    """Raised when a scalar argument lies outside its admissible range."""


class ParameterSet:
    """Ordered name -> float64 array map with a monotone version counter.

    The version is bumped by every in-place update so that activation tapes
    recorded against an older version can be detected as stale.
    """

    def __init__(self, arrays: Mapping[str, np.ndarray] | None = None, version: int = 0):
        self._arrays: dict[str, np.ndarray] = {}
        for name, value in (arrays or {}).items():
            arr = np.array(value, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"parameter {name!r} has non-finite entries")
            self._arrays[name] = arr
        self.version = version

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: object) -> bool:
        return name in self._arrays

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def items(self):
        return self._arrays.items()

    def keys(self):
        return self._arrays.keys()

    def values(self):
        return self._arrays.values()

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self._arrays.items()}

    def copy(self) -> "ParameterSet":
        return ParameterSet({k: v.copy() for k, v in self._arrays.items()}, self.version)

    def zeros_like(self) -> "ParameterSet":
        return ParameterSet({k: np.zeros_like(v) for k, v in self._arrays.items()})

    def bump(self) -> None:
        self.version += 1

    def num_values(self) -> int:
        return int(sum(v.size for v in self._arrays.values()))

    def check_compatible(self, other: "ParameterSet") -> None:
        if list(self._arrays) != list(other._arrays):
            raise DimensionError(f"parameter names differ: {list(self)} vs {list(other)}")
        for name, arr in self._arrays.items():
            if arr.shape != other[name].shape:
                raise DimensionError(
                    f"shape mismatch for {name!r}: {arr.shape} vs {other[name].shape}"
                )

    def set(self, name: str, value: np.ndarray) -> None:
        """Overwrite one array in place (shape must not change)."""
        if name not in self._arrays:
            raise KeyError(name)
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._arrays[name].shape:
            raise DimensionError(f"{name!r}: shape is immutable ({self._arrays[name].shape})")
        self._arrays[name][...] = value
        self.bump()

    def equals(self, other: "ParameterSet") -> bool:
        """Bitwise equality of names, shapes and values."""
        if list(self) != list(other):
            return False
        return all(
            self[k].shape == other[k].shape and self[k].tobytes() == other[k].tobytes()
            for k in self
        )

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}{v.shape}" for k, v in self._arrays.items())
        return f"ParameterSet(v{self.version}: {inner})"


def soft_update(target: ParameterSet, online: ParameterSet, tau: float) -> ParameterSet:
    """Polyak update ``target <- tau * online + (1 - tau) * target`` in place."""
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    target.check_compatible(online)
    for name, arr in target.items():
        if tau == 1.0:
            arr[...] = online[name]
        elif tau != 0.0:
            arr[...] = tau * online[name] + (1.0 - tau) * arr
    target.bump()
    return target


def dumps_params(params: ParameterSet) -> bytes:
    """Serialize to the versioned little-endian binary layout.

    Layout: 8-byte magic, 1-byte endianness tag (``<``), u32 format version,
    u64 parameter-set version, u32 entry count, then per entry: u32 name
    length, utf-8 name, u32 ndim, ndim x u64 extents, float64 values.
    """
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(_LITTLE)
    buf.write(struct.pack("<IQI", FORMAT_VERSION, params.version, len(params)))
    for name, arr in params.items():
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def loads_params(blob: bytes) -> ParameterSet:
    if blob[:8] != MAGIC:
        raise ValueError("not a parameter blob (bad magic)")
    if blob[8:9] != _LITTLE:
        raise ValueError(f"unsupported endianness tag {blob[8:9]!r}")
    pos = 9
    fmt_version, version, count = struct.unpack_from("<IQI", blob, pos)
    if fmt_version != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {fmt_version}")
    pos += struct.calcsize("<IQI")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        name = blob[pos : pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}Q", blob, pos)
        pos += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(blob, dtype="<f8", count=size, offset=pos)
        pos += 8 * size
        arrays[name] = data.reshape(shape).astype(np.float64)
    return ParameterSet(arrays, version)


def save_params(params: ParameterSet, path: str | Path) -> None:
    Path(path).write_bytes(dumps_params(params))


def load_params(path: str | Path) -> ParameterSet:
    return loads_params(Path(path).read_bytes())
