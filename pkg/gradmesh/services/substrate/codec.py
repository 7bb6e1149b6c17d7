"""
Wire format: 8-byte little-endian element count, then little-endian float64 values.

Traffic counters charge the body (8 bytes per element) as payload; the 8-byte header
is charged as envelope bytes.
"""

import struct

import numpy as np

from gradmesh.core.constants import FLOAT_BYTES, FRAME_HEADER_BYTES
from gradmesh.core.exceptions import ContractError

_HEADER = struct.Struct("<Q")


def encode_vector(values: np.ndarray) -> bytes:
    body = np.ascontiguousarray(values, dtype="<f8").ravel()
    return _HEADER.pack(body.size) + body.tobytes()


def frame_body_size(frame: bytes) -> int:
    """Payload bytes of a frame (header excluded); raises ContractError on malformed frames."""
    if len(frame) < FRAME_HEADER_BYTES:
        raise ContractError(f"frame of {len(frame)} bytes is shorter than its header")
    (count,) = _HEADER.unpack_from(frame)
    body = len(frame) - FRAME_HEADER_BYTES
    if count * FLOAT_BYTES != body:
        raise ContractError(f"frame header announces {count} values but carries {body} bytes")
    return body


def decode_vector(frame: bytes) -> np.ndarray:
    frame_body_size(frame)
    return np.frombuffer(frame, dtype="<f8", offset=FRAME_HEADER_BYTES).astype(np.float64)
