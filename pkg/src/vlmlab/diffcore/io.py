"""Tensor file format for fixtures and checkpoints.

Layout: the magic string ``VLMF1\\n``, one ASCII header line
``dims d0 d1 ... dn\\n`` (no dims for a scalar), then the row-major
little-endian float64 payload.
"""

import numpy as np

from ..errors import IntegrityError

MAGIC = b"VLMF1\n"


def save_tensor(path, array):
    arr = np.ascontiguousarray(np.asarray(array, dtype=np.float64))
    header = "dims" + "".join(f" {d}" for d in arr.shape) + "\n"
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.encode("ascii"))
        fh.write(arr.astype("<f8", copy=False).tobytes(order="C"))


def load_tensor(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise IntegrityError(f"{path}: bad magic {magic!r}")
        header = b""
        while not header.endswith(b"\n"):
            ch = fh.read(1)
            if not ch:
                raise IntegrityError(f"{path}: truncated header")
            header += ch
        fields = header.decode("ascii").split()
        if not fields or fields[0] != "dims":
            raise IntegrityError(f"{path}: malformed header {header!r}")
        shape = tuple(int(f) for f in fields[1:])
        count = int(np.prod(shape)) if shape else 1
        payload = fh.read(count * 8)
        if len(payload) != count * 8:
            raise IntegrityError(f"{path}: payload has {len(payload)} bytes, expected {count * 8}")
        if fh.read(1):
            raise IntegrityError(f"{path}: trailing bytes after payload")
    arr = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return arr.reshape(shape)
