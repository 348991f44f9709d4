"""Column files for plotting and series-to-series deviation reports."""

from __future__ import annotations

import io
import math
from collections.abc import Sequence
from dataclasses import dataclass

from .observables import TimeSeries

GRID_TOL = 1e-12


class GridMismatchError(ValueError):
    pass


def _check_grids(series: Sequence[TimeSeries]):
    ref = series[0].times
    for i, s in enumerate(series[1:], 1):
        if len(s.times) != len(ref) or any(abs(a - b) > GRID_TOL for a, b in zip(ref, s.times)):
            raise GridMismatchError(f"series {i} does not share the time grid of series 0")


def plotdata(series: Sequence[TimeSeries], labels: Sequence[str] | None = None) -> str:
    """Whitespace-separated columns ``t v_1 e_1 v_2 e_2 ...`` with a ``#`` header.

    Readable directly by gnuplot (``plot 'f.dat' u 1:2:3 w yerr``) and numpy.
    """
    if not series:
        raise ValueError("no series given")
    _check_grids(series)
    labels = list(labels) if labels is not None else [f"s{i}" for i in range(len(series))]
    if len(labels) != len(series):
        raise ValueError("one label per series required")
    buf = io.StringIO()
    buf.write("# columns: " + " ".join(["t"] + [f"{lab}:value {lab}:std_error" for lab in labels]) + "\n")
    buf.write("# " + " ".join(["t"] + [f"{lab} {lab}_err" for lab in labels]) + "\n")
    for k, t in enumerate(series[0].times):
        cols = [repr(t)]
        for s in series:
            cols += [repr(s.values[k]), repr(s.std_errors[k])]
        buf.write(" ".join(cols) + "\n")
    return buf.getvalue()


@dataclass
class DeviationReport:
    times: list[float]
    absolute: list[float]
    relative: list[float]  # |other - reference| / |reference|; nan where reference is 0

    @property
    def max_absolute(self) -> float:
        return max(self.absolute, default=0.0)

    @property
    def max_relative(self) -> float:
        finite = [r for r in self.relative if not math.isnan(r)]
        return max(finite, default=0.0)

    @property
    def final_absolute(self) -> float:
        return self.absolute[-1] if self.absolute else 0.0

    @property
    def final_relative(self) -> float:
        return self.relative[-1] if self.relative else 0.0

    def to_dict(self) -> dict:
        return {
            "max_absolute": self.max_absolute,
            "max_relative": self.max_relative,
            "final_absolute": self.final_absolute,
            "final_relative": self.final_relative,
            "points": [
                {"t": t, "absolute": a, "relative": r}
                for t, a, r in zip(self.times, self.absolute, self.relative)
            ],
        }

    def to_text(self) -> str:
        lines = ["t,absolute,relative"]
        lines += [f"{t!r},{a!r},{r!r}" for t, a, r in zip(self.times, self.absolute, self.relative)]
        lines += [
            f"# max_absolute: {self.max_absolute!r}",
            f"# max_relative: {self.max_relative!r}",
            f"# final_absolute: {self.final_absolute!r}",
            f"# final_relative: {self.final_relative!r}",
        ]
        return "\n".join(lines) + "\n"


def compare(reference: TimeSeries, other: TimeSeries) -> DeviationReport:
    """Pointwise deviation of ``other`` from ``reference``."""
    _check_grids([reference, other])
    absolute = [abs(b - a) for a, b in zip(reference.values, other.values)]
    relative = [d / abs(a) if a != 0 else math.nan for d, a in zip(absolute, reference.values)]
    return DeviationReport(list(reference.times), absolute, relative)
