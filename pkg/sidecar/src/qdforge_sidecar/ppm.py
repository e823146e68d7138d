"""Binary PPM (P6) wire format: the image encoding used by the protocol."""

from __future__ import annotations

import numpy as np


def ppm_bytes(img: np.ndarray) -> bytes:
    h, w, _ = img.shape
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    return header + np.rint(img * 255.0).astype(np.uint8).tobytes()


def ppm_from_bytes(raw: bytes) -> np.ndarray:
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise ValueError("truncated PPM header")
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic != b"P6":
        raise ValueError("not a P6 PPM")
    if maxval != 255:
        raise ValueError("only maxval 255 supported")
    need = w * h * 3
    if len(raw) - pos < need:
        raise ValueError("truncated PPM payload")
    data = np.frombuffer(raw, dtype=np.uint8, count=need, offset=pos)
    return data.reshape(h, w, 3).astype(np.float64) / 255.0
