"""Deterministic binary container used for policy checkpoints and demo files.

Layout (all integers little-endian)::

    magic      8 bytes  b"CMZBLOB\\x00"
    version    uint32
    kind_len   uint32, then kind (utf-8)
    header_len uint64, then header (canonical JSON, utf-8)
    n_arrays   uint64
    per array: ndim uint32, shape uint64 * ndim, then float64 data (C order)

No timestamps or other ambient state go into the file, so writing the same
content twice gives identical bytes.
"""

import json
import struct

import numpy as np

MAGIC = b"CMZBLOB\x00"
VERSION = 1


class FormatError(ValueError):
    pass


def dumps(kind, header, arrays):
    parts = [MAGIC, struct.pack("<I", VERSION)]
    k = kind.encode()
    parts += [struct.pack("<I", len(k)), k]
    h = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts += [struct.pack("<Q", len(h)), h]
    parts.append(struct.pack("<Q", len(arrays)))
    for arr in arrays:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def loads(data, kind):
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise FormatError("truncated file")
        out = view[pos : pos + n]
        pos += n
        return out

    if bytes(take(8)) != MAGIC:
        raise FormatError("bad magic")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    (klen,) = struct.unpack("<I", take(4))
    got = bytes(take(klen)).decode()
    if got != kind:
        raise FormatError(f"expected a {kind!r} file, got {got!r}")
    (hlen,) = struct.unpack("<Q", take(8))
    header = json.loads(bytes(take(hlen)).decode())
    (n,) = struct.unpack("<Q", take(8))
    arrays = []
    for _ in range(n):
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(bytes(take(8 * count)), dtype="<f8").reshape(shape)
        arrays.append(arr.astype(np.float64))
    if pos != len(view):
        raise FormatError("trailing bytes")
    return header, arrays


def write(path, kind, header, arrays):
    with open(path, "wb") as fh:
        fh.write(dumps(kind, header, arrays))


def read(path, kind):
    with open(path, "rb") as fh:
        return loads(fh.read(), kind)
