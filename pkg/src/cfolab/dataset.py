"""Labeled frame datasets: seeded generation, binary container, batching.

Records are generated cell-major over (modulation, SNR) with one
independent random stream per record, derived from ``(master_seed,
cell_index, record_index)``.  Parallel generation therefore produces the
same bytes as serial generation.

File layout (little-endian throughout)::

    magic  b"CFOD"
    u16    format version (1)
    u32    record count
    u32    frame length L
    u8     channel kind id
    u16    oversampling
    f64    master-seed digest
    then per record:
        f32[L] I, f32[L] Q, f32 cfo, f32 snr_db,
        u8 modulation id, u8 channel id, f32 rolloff, u16 oversampling

A JSON sidecar with the same basename records the generating
:class:`DatasetSpec`.
"""

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .waveform import Channel, Modulation, SynthesisParams, synthesize

__all__ = [
    "DatasetSpec",
    "FrameRecord",
    "snr_grid",
    "generate",
    "write_dataset",
    "read_dataset",
    "batch_iter",
    "filter_split",
    "seed_digest",
]

MAGIC = b"CFOD"
VERSION = 1
_HEADER = struct.Struct("<4sHIIBHd")
_REC_TAIL = struct.Struct("<ffBBfH")


def snr_grid(lo: float = -20.0, hi: float = 30.0, step: float = 2.0) -> tuple[float, ...]:
    """Arithmetic SNR grid including both endpoints."""
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(round((hi - lo) / step))
    if abs(lo + n * step - hi) > 1e-9:
        raise ValueError(f"grid [{lo}, {hi}] not an integer number of {step} dB steps")
    return tuple(lo + i * step for i in range(n + 1))


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for one dataset; total count is
    ``len(modulations) * len(snr_grid_db) * frames_per_cell``."""

    modulations: tuple[Modulation, ...]
    snr_grid_db: tuple[float, ...]
    frames_per_cell: int
    length: int
    oversampling: int
    channel: Channel
    master_seed: int
    cfo_range: tuple[float, float] = (-0.2, 0.2)
    rolloff_range: tuple[float, float] = (0.2, 0.7)

    def __post_init__(self):
        # Canonical cell order: modulations sorted by id, SNRs as given.
        object.__setattr__(
            self, "modulations", tuple(sorted(set(self.modulations)))
        )
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))

    def validate(self) -> None:
        problems = []
        if not self.modulations:
            problems.append("modulations: empty set")
        if not self.snr_grid_db:
            problems.append("snr_grid_db: empty grid")
        if self.frames_per_cell < 1:
            problems.append(f"frames_per_cell: {self.frames_per_cell} < 1")
        if self.length < 2 or self.length % 4:
            problems.append(f"length: {self.length} not >= 2 and divisible by 4")
        if self.oversampling not in (4, 8, 16):
            problems.append(f"oversampling: {self.oversampling} not in (4, 8, 16)")
        lo, hi = self.cfo_range
        if not -0.2 <= lo < hi <= 0.2:
            problems.append(f"cfo_range: {self.cfo_range} not within [-0.2, 0.2]")
        rlo, rhi = self.rolloff_range
        if not 0.2 <= rlo <= rhi <= 0.7:
            problems.append(f"rolloff_range: {self.rolloff_range} not within [0.2, 0.7]")
        if problems:
            raise ValueError("invalid DatasetSpec: " + "; ".join(problems))

    @property
    def total(self) -> int:
        return len(self.modulations) * len(self.snr_grid_db) * self.frames_per_cell

    def to_json(self) -> str:
        return json.dumps(
            {
                "modulations": [m.name for m in self.modulations],
                "snr_grid_db": list(self.snr_grid_db),
                "frames_per_cell": self.frames_per_cell,
                "length": self.length,
                "oversampling": self.oversampling,
                "channel": self.channel.name,
                "master_seed": self.master_seed,
                "cfo_range": list(self.cfo_range),
                "rolloff_range": list(self.rolloff_range),
            },
            indent=2,
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "DatasetSpec":
        raw = json.loads(text)
        return DatasetSpec(
            modulations=tuple(Modulation[m] for m in raw["modulations"]),
            snr_grid_db=tuple(raw["snr_grid_db"]),
            frames_per_cell=raw["frames_per_cell"],
            length=raw["length"],
            oversampling=raw["oversampling"],
            channel=Channel[raw["channel"]],
            master_seed=raw["master_seed"],
            cfo_range=tuple(raw["cfo_range"]),
            rolloff_range=tuple(raw["rolloff_range"]),
        )


@dataclass(frozen=True)
class FrameRecord:
    """One labeled frame.

    All label fields are quantized to their 32-bit storage precision at
    creation, so a write -> read round trip is bitwise exact.
    """

    frame: np.ndarray  # complex64, length L
    cfo_norm: float
    snr_db: float
    modulation: Modulation
    channel: Channel
    rolloff: float
    oversampling: int

    def __eq__(self, other):
        if not isinstance(other, FrameRecord):
            return NotImplemented
        return (
            np.array_equal(self.frame, other.frame)
            and self.cfo_norm == other.cfo_norm
            and self.snr_db == other.snr_db
            and self.modulation == other.modulation
            and self.channel == other.channel
            and self.rolloff == other.rolloff
            and self.oversampling == other.oversampling
        )


def seed_digest(master_seed: int) -> float:
    """Deterministic 53-bit scramble of the master seed, as a float."""
    x = (master_seed & 0xFFFFFFFFFFFFFFFF) ^ 0x9E3779B97F4A7C15
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & 0xFFFFFFFFFFFFFFFF
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & 0xFFFFFFFFFFFFFFFF
    x ^= x >> 31
    return float(x & ((1 << 53) - 1))


def _record_rng(master_seed: int, cell_index: int, k: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=(cell_index, k))
    return np.random.default_rng(ss)


def _make_record(spec: DatasetSpec, cell_index: int, modulation: Modulation, snr: float, k: int) -> FrameRecord:
    rng = _record_rng(spec.master_seed, cell_index, k)
    # Fixed draw order: cfo, phase, rolloff, then synthesize's own draws.
    cfo = rng.uniform(*spec.cfo_range)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    rolloff = rng.uniform(*spec.rolloff_range)
    params = SynthesisParams(
        modulation=modulation,
        rolloff=rolloff,
        oversampling=spec.oversampling,
        cfo_norm=cfo,
        phase=phase,
        snr_db=snr,
        channel=spec.channel,
        length=spec.length,
    )
    frame, _label = synthesize(params, rng)
    return FrameRecord(
        frame=frame.astype(np.complex64),
        cfo_norm=float(np.float32(cfo)),
        snr_db=float(np.float32(snr)),
        modulation=modulation,
        channel=spec.channel,
        rolloff=float(np.float32(rolloff)),
        oversampling=spec.oversampling,
    )


def generate(spec: DatasetSpec, workers: int = 1) -> list[FrameRecord]:
    """Generate all records of ``spec`` in deterministic cell-major order.

    ``workers > 1`` fans record synthesis out across threads; the output
    is bit-identical to the serial result because every record owns an
    independent pre-seeded stream.
    """
    spec.validate()
    cells = [
        (ci, m, snr)
        for ci, (m, snr) in enumerate(
            (m, snr) for m in spec.modulations for snr in spec.snr_grid_db
        )
    ]
    jobs = [
        (ci, m, snr, k) for ci, m, snr in cells for k in range(spec.frames_per_cell)
    ]
    if workers <= 1:
        return [_make_record(spec, ci, m, snr, k) for ci, m, snr, k in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(lambda job: _make_record(spec, job[0], job[1], job[2], job[3]), jobs)
        )


def write_dataset(records, path, spec: DatasetSpec | None = None) -> None:
    """Write records to ``path``; with ``spec`` also writes a JSON sidecar."""
    records = list(records)
    if not records:
        raise ValueError("refusing to write an empty dataset")
    length = records[0].frame.size
    for i, rec in enumerate(records):
        if rec.frame.size != length:
            raise ValueError(
                f"record {i} has length {rec.frame.size}, expected {length}"
            )
    digest = seed_digest(spec.master_seed) if spec is not None else 0.0
    channel = spec.channel if spec is not None else records[0].channel
    oversampling = spec.oversampling if spec is not None else records[0].oversampling
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                MAGIC, VERSION, len(records), length, int(channel), oversampling, digest
            )
        )
        for rec in records:
            frame = np.ascontiguousarray(rec.frame, dtype=np.complex64)
            fh.write(frame.real.astype("<f4").tobytes())
            fh.write(frame.imag.astype("<f4").tobytes())
            fh.write(
                _REC_TAIL.pack(
                    rec.cfo_norm,
                    rec.snr_db,
                    int(rec.modulation),
                    int(rec.channel),
                    rec.rolloff,
                    rec.oversampling,
                )
            )
    if spec is not None:
        path.with_suffix(".json").write_text(spec.to_json() + "\n")


def read_dataset(path) -> list[FrameRecord]:
    """Read a dataset file, validating structure before returning records."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(
            f"{path}: file of {len(blob)} bytes is shorter than the "
            f"{_HEADER.size}-byte header"
        )
    magic, version, count, length, channel_id, oversampling, _digest = _HEADER.unpack_from(
        blob, 0
    )
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}, expected {VERSION}")
    try:
        Channel(channel_id)
    except ValueError:
        raise FormatError(f"{path}: unknown channel id {channel_id} at offset 10") from None
    rec_size = 2 * 4 * length + _REC_TAIL.size
    expected = _HEADER.size + count * rec_size
    if len(blob) != expected:
        raise FormatError(
            f"{path}: header declares {count} records of length {length} "
            f"({expected} bytes), file has {len(blob)} bytes"
        )
    records = []
    off = _HEADER.size
    for _ in range(count):
        i_part = np.frombuffer(blob, dtype="<f4", count=length, offset=off)
        off += 4 * length
        q_part = np.frombuffer(blob, dtype="<f4", count=length, offset=off)
        off += 4 * length
        cfo, snr, mod_id, chan_id, rolloff, rec_os = _REC_TAIL.unpack_from(blob, off)
        off += _REC_TAIL.size
        try:
            modulation = Modulation(mod_id)
            channel = Channel(chan_id)
        except ValueError:
            raise FormatError(
                f"{path}: unknown modulation/channel id at offset {off - _REC_TAIL.size}"
            ) from None
        frame = (i_part + 1j * q_part).astype(np.complex64)
        records.append(
            FrameRecord(
                frame=frame,
                cfo_norm=cfo,
                snr_db=snr,
                modulation=modulation,
                channel=channel,
                rolloff=rolloff,
                oversampling=rec_os,
            )
        )
    return records


def read_sidecar(path) -> DatasetSpec:
    """Load the JSON sidecar written next to a dataset file."""
    return DatasetSpec.from_json(Path(path).with_suffix(".json").read_text())


def records_to_tensors(records) -> tuple[np.ndarray, np.ndarray]:
    """Stack records into ``(B, 2, L)`` inputs and ``(B, 1)`` targets."""
    x = np.empty((len(records), 2, records[0].frame.size), dtype=np.float32)
    y = np.empty((len(records), 1), dtype=np.float32)
    for i, rec in enumerate(records):
        x[i, 0] = rec.frame.real
        x[i, 1] = rec.frame.imag
        y[i, 0] = rec.cfo_norm
    return x, y


def batch_iter(records, batch_size: int, shuffle_seed: int | None = None, epoch: int = 0, *, train: bool = False):
    """Yield ``(inputs (B,2,L), targets (B,1))`` batches.

    The permutation is a pure function of ``(shuffle_seed, epoch)``;
    ``shuffle_seed=None`` preserves record order.  The final partial
    batch is yielded.  In train mode a trailing single-record batch is
    folded into the previous batch (batch normalization needs at least
    two rows), and a dataset of fewer than 2 records is rejected.
    """
    records = list(records)
    if batch_size < 1:
        raise ValueError(f"batch_size {batch_size} must be >= 1")
    n = len(records)
    if n == 0:
        raise ValueError("empty dataset")
    if train and n < 2:
        raise ValueError("degenerate dataset: train mode needs at least 2 records")
    if shuffle_seed is None:
        order = np.arange(n)
    else:
        rng = np.random.default_rng(
            np.random.SeedSequence(shuffle_seed, spawn_key=(epoch,))
        )
        order = rng.permutation(n)
    bounds = list(range(0, n, batch_size)) + [n]
    spans = [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]
    if train and len(spans) > 1 and spans[-1][1] - spans[-1][0] == 1:
        last = spans.pop()
        prev = spans.pop()
        spans.append((prev[0], last[1]))
    for lo, hi in spans:
        chunk = [records[j] for j in order[lo:hi]]
        yield records_to_tensors(chunk)


def filter_split(records, predicate) -> list[FrameRecord]:
    """Stable-order view of the records for which ``predicate(rec)`` holds."""
    return [rec for rec in records if predicate(rec)]
