"""Column-oriented result tables with units in the header, written as CSV."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple


def format_value(v: Any) -> str:
    """Shortest round-trip text for floats; NaN and infinities spelled for gnuplot."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float) or hasattr(v, "dtype"):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


@dataclass
class ResultTable:
    columns: Tuple[Tuple[str, str], ...]  # (name, unit)
    rows: List[tuple] = field(default_factory=list)

    def __post_init__(self):
        self.columns = tuple(tuple(c) for c in self.columns)
        names = [c[0] for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names")

    @property
    def names(self) -> List[str]:
        return [c[0] for c in self.columns]

    @property
    def header(self) -> List[str]:
        return [f"{name} [{unit}]" for name, unit in self.columns]

    def append(self, row: Dict[str, Any]) -> None:
        missing = set(self.names) - set(row)
        extra = set(row) - set(self.names)
        if missing or extra:
            raise ValueError(f"row mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        self.rows.append(tuple(row[n] for n in self.names))

    def extend(self, rows: Sequence[Dict[str, Any]]) -> None:
        for r in rows:
            self.append(r)

    def column(self, name: str) -> list:
        i = self.names.index(name)
        return [r[i] for r in self.rows]

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for r in self.rows:
                w.writerow([format_value(v) for v in r])
        return path


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "dtype"):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def write_sidecar(path, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
