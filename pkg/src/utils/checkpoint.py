"""

*** Checkpoint.py ***

Contains:
Binary checkpoint format shared by the forecaster and the synthesizers

Layout:
    bytes 0-3    magic b"WBCK"
    bytes 4-7    uint32 LE format version (1)
    bytes 8-11   uint32 LE header length H
    bytes 12..   UTF-8 JSON header of H bytes:
                   {"kind": ..., "meta": {...}, "params": [[name, shape], ...]}
    then         every parameter, in header order, as little-endian float64 (C order)

External dependencies:
numpy       -Numpy Python extension. http://numpy.org/

Changelog:
Date          Name              Change
__ _          __ _              ____ _
06/09/2024    Workbench team    Initial release

"""
# Imports
import json
import struct
from collections import OrderedDict

import numpy as np

from src.utils.errors import CheckpointFormatError

MAGIC = b"WBCK"
VERSION = 1


def write_checkpoint(path, kind, meta, params):
    """
    Args:
        path (str | Path): output file
        kind (str): model kind tag
        meta (dict): JSON-serialisable dimensions and configuration
        params (OrderedDict[str, np.ndarray]): parameters in their fixed order
    """
    arrays = [(name, np.ascontiguousarray(value, dtype="<f8")) for name, value in params.items()]
    header = json.dumps({"kind": kind, "meta": meta,
                         "params": [[name, list(a.shape)] for name, a in arrays]},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(header)))
        f.write(header)
        for _, a in arrays:
            f.write(a.tobytes(order="C"))


def read_checkpoint(path, expected_kind=None):
    """Returns (kind, meta, OrderedDict[name, np.ndarray])."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise CheckpointFormatError(f"{path}: not a workbench checkpoint")
    version, header_len = struct.unpack("<II", blob[4:12])
    if version != VERSION:
        raise CheckpointFormatError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(blob[12:12 + header_len].decode("utf-8"))
    if expected_kind is not None and header["kind"] != expected_kind:
        raise CheckpointFormatError(f"{path}: expected a '{expected_kind}' checkpoint, found '{header['kind']}'")

    offset = 12 + header_len
    params = OrderedDict()
    for name, shape in header["params"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(blob):
            raise CheckpointFormatError(f"{path}: truncated at parameter '{name}'")
        params[name] = np.frombuffer(blob[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(blob):
        raise CheckpointFormatError(f"{path}: {len(blob) - offset} trailing bytes")
    return header["kind"], header["meta"], params


def peek_kind(path):
    """Model kind tag of a checkpoint file."""
    kind, _, _ = read_checkpoint(path)
    return kind
