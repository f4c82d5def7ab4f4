"""Dataset persistence: append-only labeled frames plus provenance.

File layout (all integers little-endian):
  magic "MS3L" | u16 version | u32 header length | UTF-8 config document |
  sections until EOF. Section = tag byte; tag 0x01 carries u32 count then
  that many sample records. Unknown tags are a hard error so stale readers
  never silently skip data.

Sample record:
  u16 h, u16 w, u16 c, h*w*c f32 intensities in [0, 1] |
  f32 left, mid, right, rejected_frac | f32 us_l, us_r |
  f32 sensor v, w | presence u8 [+ f32 human v, w] | f32 p_r |
  u32 iteration | u8 branch tag
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .episode import Frame
from .sensor_policy import Branch, DepthSummary
from .world import Action

MAGIC = b"MS3L"
VERSION = 1
SECTION_SAMPLES = 0x01
VAL_FRACTION = 0.10


class DatasetFormatError(ValueError):
    pass


@dataclass
class Dataset:
    """Labeled frames in collection order with their config provenance."""

    header: str = ""
    samples: list[Frame] = field(default_factory=list)

    def append(self, frames) -> None:
        for f in frames:
            if self.samples and f.iteration < self.samples[-1].iteration:
                raise ValueError("iteration indices must be non-decreasing")
            self.samples.append(f)

    def __len__(self) -> int:
        return len(self.samples)

    def counts_by_iteration(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for f in self.samples:
            counts[f.iteration] = counts.get(f.iteration, 0) + 1
        return counts

    def train_val_split(self) -> tuple[list[Frame], list[Frame]]:
        """Hold out the last tenth of each iteration's frames, by collection
        order, as the validation set."""
        groups: dict[int, list[Frame]] = {}
        for f in self.samples:
            groups.setdefault(f.iteration, []).append(f)
        train: list[Frame] = []
        val: list[Frame] = []
        for it in sorted(groups):
            g = groups[it]
            n_val = int(len(g) * VAL_FRACTION)
            cut = len(g) - n_val
            train.extend(g[:cut])
            val.extend(g[cut:])
        return train, val

    def digest(self) -> str:
        return hashlib.sha256(to_bytes(self)).hexdigest()


def _pack_frame(f: Frame, out: bytearray) -> None:
    img = np.ascontiguousarray(f.image)
    if img.ndim != 3:
        raise ValueError("frame image must be HxWxC")
    h, w, c = img.shape
    out += struct.pack("<HHH", h, w, c)
    out += (img.astype(np.float32) / np.float32(255.0)).tobytes()
    s = f.depth_summary
    out += struct.pack("<ffff", s.left, s.mid, s.right, s.rejected_frac)
    out += struct.pack("<ff", f.us[0], f.us[1])
    out += struct.pack("<ff", f.sensor_label.v_norm, f.sensor_label.w_norm)
    if f.human_label is None:
        out += b"\x00"
    else:
        out += b"\x01"
        out += struct.pack("<ff", f.human_label.v_norm, f.human_label.w_norm)
    out += struct.pack("<f", f.p_r)
    out += struct.pack("<I", f.iteration)
    out += struct.pack("<B", int(f.branch))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise DatasetFormatError(f"unexpected end of file in {what}")
        b = self.buf[self.pos:self.pos + n]
        self.pos += n
        return b

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    @property
    def done(self) -> bool:
        return self.pos >= len(self.buf)


def _unpack_frame(r: _Reader) -> Frame:
    h, w, c = r.unpack("<HHH", "image dims")
    flat = np.frombuffer(r.take(4 * h * w * c, "image data"), dtype="<f4")
    img = np.round(flat.reshape(h, w, c) * 255.0).astype(np.uint8)
    left, mid, right, rej = r.unpack("<ffff", "depth summary")
    us = r.unpack("<ff", "ultrasonic pair")
    sv, sw = r.unpack("<ff", "sensor label")
    (presence,) = r.unpack("<B", "human label presence")
    if presence not in (0, 1):
        raise DatasetFormatError(f"bad human-label presence byte {presence}")
    human = None
    if presence:
        hv, hw = r.unpack("<ff", "human label")
        human = Action(hv, hw)
    (p_r,) = r.unpack("<f", "recording probability")
    (iteration,) = r.unpack("<I", "iteration index")
    (branch,) = r.unpack("<B", "branch tag")
    try:
        tag = Branch(branch)
    except ValueError:
        raise DatasetFormatError(f"bad branch tag {branch}") from None
    return Frame(image=img,
                 depth_summary=DepthSummary(left, mid, right, rej),
                 us=(us[0], us[1]), sensor_label=Action(sv, sw), branch=tag,
                 human_label=human, p_r=p_r, iteration=iteration)


def to_bytes(ds: Dataset) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", VERSION)
    header = ds.header.encode("utf-8")
    out += struct.pack("<I", len(header))
    out += header
    out += struct.pack("<B", SECTION_SAMPLES)
    out += struct.pack("<I", len(ds.samples))
    for f in ds.samples:
        _pack_frame(f, out)
    return bytes(out)


def from_bytes(buf: bytes) -> Dataset:
    r = _Reader(buf)
    magic = r.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}")
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}")
    (hlen,) = r.unpack("<I", "header length")
    header = r.take(hlen, "config header").decode("utf-8")
    ds = Dataset(header=header)
    while not r.done:
        (tag,) = r.unpack("<B", "section tag")
        if tag == SECTION_SAMPLES:
            (count,) = r.unpack("<I", "sample count")
            frames = [_unpack_frame(r) for _ in range(count)]
            ds.append(frames)
        else:
            raise DatasetFormatError(f"unknown section tag 0x{tag:02x}")
    return ds


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(ds))


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
