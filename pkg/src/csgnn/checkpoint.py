"""Textual checkpoint format.

Layout: a header line ``CSGNN-CKPT v1``, then one block per tensor:
a line ``name rows cols`` followed by ``rows`` lines of ``cols``
space-separated decimal values written with 17 significant digits, which
round-trips float64 bit-exactly. Scalars are stored as 1 x 1 tensors.
"""

from __future__ import annotations

import numpy as np

HEADER = "CSGNN-CKPT v1"


def save_checkpoint(path, tensors: dict) -> None:
    """Write named float64 tensors (2-D arrays or scalars) to path."""
    with open(path, "w") as fh:
        fh.write(HEADER + "\n")
        for name, value in tensors.items():
            if any(ch.isspace() for ch in name):
                raise ValueError(f"tensor name {name!r} contains whitespace")
            arr = np.atleast_2d(np.asarray(value, dtype=np.float64))
            fh.write(f"{name} {arr.shape[0]} {arr.shape[1]}\n")
            for row in arr:
                fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def load_checkpoint(path) -> dict:
    """Read the tensors back; inverse of save_checkpoint."""
    tensors = {}
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != HEADER:
            raise ValueError(f"not a checkpoint file (header {header!r})")
        while True:
            line = fh.readline()
            if not line:
                break
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"bad tensor header line: {line!r}")
            name, rows, cols = parts[0], int(parts[1]), int(parts[2])
            data = np.empty((rows, cols), dtype=np.float64)
            for r in range(rows):
                row = fh.readline().split()
                if len(row) != cols:
                    raise ValueError(f"tensor {name}: row {r} has {len(row)} values")
                data[r] = [float(x) for x in row]
            tensors[name] = data
    return tensors
