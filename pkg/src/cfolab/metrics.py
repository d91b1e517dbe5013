"""Per-SNR mean-squared-error reports and their CSV form.

The CSV schema is ``snr_db,method,mse,count``, sorted ascending by SNR
(then method).  Numeric fields are written with shortest round-trip
decimal formatting and LF line endings, so identical reports produce
byte-identical files.
"""

import io
from dataclasses import dataclass, field

from .errors import FormatError

__all__ = ["MetricsRow", "MetricsReport", "read_csv"]

CSV_HEADER = "snr_db,method,mse,count"


@dataclass(frozen=True)
class MetricsRow:
    snr_db: float
    method: str
    mse: float
    count: int


@dataclass
class MetricsReport:
    """Rows of per-(SNR, method) MSE plus free-form provenance metadata.

    Metadata (dataset/model digests and the like) never enters the CSV
    payload; it is carried for manifests only.
    """

    rows: list[MetricsRow]
    metadata: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        seen = set()
        for row in self.rows:
            if row.mse < 0:
                raise ValueError(f"negative mse in row {row}")
            if row.count < 1:
                raise ValueError(f"count < 1 in row {row}")
            key = (row.snr_db, row.method)
            if key in seen:
                raise ValueError(f"duplicate (snr_db, method) row {key}")
            seen.add(key)

    def sorted_rows(self) -> list[MetricsRow]:
        return sorted(self.rows, key=lambda r: (r.snr_db, r.method))

    def to_csv(self) -> str:
        self.validate()
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for row in self.sorted_rows():
            buf.write(f"{row.snr_db!r},{row.method},{row.mse!r},{row.count}\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())

    def merged_with(self, other: "MetricsReport") -> "MetricsReport":
        merged = MetricsReport(rows=self.rows + other.rows)
        merged.validate()
        return merged


def read_csv(path) -> MetricsReport:
    """Parse a metrics CSV, validating the schema."""
    with open(path, "r", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise FormatError(f"{path}: expected header {CSV_HEADER!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
        try:
            rows.append(
                MetricsRow(
                    snr_db=float(parts[0]),
                    method=parts[1],
                    mse=float(parts[2]),
                    count=int(parts[3]),
                )
            )
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    report = MetricsReport(rows=rows)
    report.validate()
    return report
