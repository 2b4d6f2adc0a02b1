"""Security vs. performance model in operation counts.

For ``n`` lines at ``k`` operations per line and unit operation cost ``O``::

    base ops            = n k O
    baseline            Perf = n k O,                       Sec = 1 - 1/(n k O)
    overhead, property i        n k O / l_i
    secured             Perf = (1 + sum 1/l_i) n k O,       Sec = 1 - (1 + sum l_i)/(n k O)

The four ``l_i`` correspond to Invulnerable, Integrity, Verification and
Trustworthy. Formulas are evaluated exactly as written. Note that the
secured Sec comes out *below* the baseline Sec for every positive ``l``,
and that a larger ``l_i`` means less overhead (it behaves like original
lines per added line). Both raw and [0, 1]-clamped Sec are reported.

All functions accept scalars or numpy arrays for ``n``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DomainError

PROPERTIES = ("invulnerable", "integrity", "verification", "trustworthy")
CSV_HEADER = "n,perf_base,sec_base,perf_secured,sec_secured_raw,sec_clamped"
PROVENANCE_NOTE = (
    "note: Sec is evaluated exactly as printed; with positive l_i the secured "
    "Sec is lower than the baseline Sec, contrary to the trade-off narrative."
)

ArrayLike = Union[float, np.ndarray]


def _require_positive(**values) -> None:
    for name, value in values.items():
        arr = np.asarray(value, dtype=float)
        if arr.size == 0:
            raise DomainError(f"{name} is empty")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise DomainError(f"{name} must be positive and finite, got {value!r}")


def base_operations(n: ArrayLike, k: float, O: float = 1.0) -> ArrayLike:
    _require_positive(n=n, k=k, O=O)
    return n * k * O


def baseline_metrics(n: ArrayLike, k: float, O: float = 1.0) -> tuple[ArrayLike, ArrayLike]:
    ops = base_operations(n, k, O)
    if np.any(np.asarray(ops) < 1):
        raise DomainError("n*k*O must be at least one operation")
    return ops, 1 - 1 / ops


def property_overhead(n: ArrayLike, k: float, O: float, l_i: float) -> ArrayLike:
    _require_positive(l_i=l_i)
    return base_operations(n, k, O) / l_i


def _secured(ops: ArrayLike, l: Sequence[float]) -> tuple[ArrayLike, ArrayLike]:
    l1, l2, l3, l4 = l
    perf = (1 + 1 / l1 + 1 / l2 + 1 / l3 + 1 / l4) * ops
    sec = 1 - (1 / ops) * (1 + l1 + l2 + l3 + l4)
    return perf, sec


def clamp_unit(x: ArrayLike) -> ArrayLike:
    return np.clip(x, 0.0, 1.0) if isinstance(x, np.ndarray) else min(1.0, max(0.0, x))


@dataclass(frozen=True)
class AnalysisInput:
    n: int
    k: float
    l: tuple[float, float, float, float]
    O: float = 1.0

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if len(self.l) != 4:
            raise DomainError(f"expected four l values, got {len(self.l)}")
        _require_positive(k=self.k, O=self.O, l=list(self.l))
        object.__setattr__(self, "l", tuple(float(x) for x in self.l))


@dataclass(frozen=True)
class AnalysisResult:
    base_ops: float
    perf_base: float
    sec_base: float
    perf_secured: float
    sec_secured: float
    sec_clamped: float
    overhead_ops: tuple[float, float, float, float]

    def as_dict(self) -> dict:
        d = {
            "base_ops": self.base_ops,
            "perf_base": self.perf_base,
            "sec_base": self.sec_base,
            "perf_secured": self.perf_secured,
            "sec_secured_raw": self.sec_secured,
            "sec_clamped": self.sec_clamped,
        }
        for name, value in zip(PROPERTIES, self.overhead_ops):
            d[f"overhead_{name}"] = value
        return d


def secured_metrics(inp: AnalysisInput) -> AnalysisResult:
    ops = base_operations(inp.n, inp.k, inp.O)
    perf_base, sec_base = baseline_metrics(inp.n, inp.k, inp.O)
    perf, sec = _secured(ops, inp.l)
    overhead = tuple(float(property_overhead(inp.n, inp.k, inp.O, li)) for li in inp.l)
    return AnalysisResult(float(ops), float(perf_base), float(sec_base), float(perf), float(sec),
                          float(clamp_unit(sec)), overhead)


def parse_range(spec: str) -> np.ndarray:
    """``start:stop:step`` with an inclusive stop, e.g. ``10:1000:10``."""
    try:
        start, stop, step = (int(part) for part in spec.split(":"))
    except ValueError:
        raise DomainError(f"range must be start:stop:step integers, got {spec!r}") from None
    if step < 1 or start < 1 or stop < start:
        raise DomainError(f"empty or invalid range {spec!r}")
    return np.arange(start, stop + 1, step, dtype=np.int64)


def sweep(n_values: Union[str, Sequence[int], np.ndarray], k: float, l: Sequence[float],
          O: float = 1.0) -> np.ndarray:
    """Trade-off table, one row per n.

    Columns follow ``CSV_HEADER``. Returns a float array of shape (len(n), 6).
    """
    n = parse_range(n_values) if isinstance(n_values, str) else np.asarray(n_values, dtype=np.int64)
    if n.size == 0:
        raise DomainError("empty n range")
    AnalysisInput(int(n.min()), k, tuple(l), O)  # validates k, O, l
    ops = base_operations(n.astype(float), k, O)
    perf_base, sec_base = baseline_metrics(n.astype(float), k, O)
    perf, sec = _secured(ops, tuple(float(x) for x in l))
    return np.column_stack([n.astype(float), perf_base, sec_base, perf, sec, clamp_unit(sec)])


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def sweep_csv(table: np.ndarray) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for row in table:
        out.write(",".join([str(int(row[0]))] + [_fmt(v) for v in row[1:]]) + "\n")
    return out.getvalue()


def format_result(result: AnalysisResult) -> str:
    return " ".join(f"{key}={_fmt(value)}" for key, value in result.as_dict().items())
