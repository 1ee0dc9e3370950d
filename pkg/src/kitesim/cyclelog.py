"""Per-interval run log with a fixed CSV layout.

One record per control interval. Floats are written with six significant
digits except the timestamp, which uses three decimals so the 50 ms
cadence stays exact in text form.
"""

from dataclasses import dataclass, fields

import numpy as np

from .errors import InsufficientDataError


@dataclass(frozen=True)
class LogRecord:
    """State, control and power snapshot at the end of one interval."""

    t: float
    x: float
    y: float
    z: float
    elevation_deg: float
    azimuth_deg: float
    heading_rad: float
    v_a: float
    force: float
    l_t: float
    v_t_o: float
    u_s: float
    u_d: float
    v_s_set: float
    phase: str
    power: float


COLUMNS = tuple(f.name for f in fields(LogRecord))
_FLOAT_COLUMNS = tuple(c for c in COLUMNS if c != "phase")


def _format(name: str, value) -> str:
    if name == "phase":
        return str(value)
    if name == "t":
        return f"{value:.3f}"
    return f"{value:.6g}"


class CycleLog:
    """Append-only sequence of LogRecords with CSV round-tripping."""

    def __init__(self, records=None):
        self.records: list[LogRecord] = list(records) if records else []

    def append(self, record: LogRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    def column(self, name: str) -> np.ndarray:
        """A numeric column as an array (phase is not numeric)."""
        if name == "phase":
            raise KeyError("phase column is categorical; use phases()")
        if name not in COLUMNS:
            raise KeyError(name)
        return np.array([getattr(r, name) for r in self.records])

    def phases(self) -> list[str]:
        return [r.phase for r in self.records]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(COLUMNS) + "\n")
            for r in self.records:
                fh.write(",".join(_format(c, getattr(r, c))
                                  for c in COLUMNS) + "\n")

    @classmethod
    def from_csv(cls, path) -> "CycleLog":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header.split(",") != list(COLUMNS):
                raise InsufficientDataError("unrecognized log header",
                                            header=header)
            records = []
            for line in fh:
                parts = line.strip().split(",")
                if len(parts) != len(COLUMNS):
                    raise InsufficientDataError("malformed log row",
                                                row=line.strip())
                kwargs = {}
                for name, raw in zip(COLUMNS, parts):
                    kwargs[name] = raw if name == "phase" else float(raw)
                records.append(LogRecord(**kwargs))
        return cls(records)
