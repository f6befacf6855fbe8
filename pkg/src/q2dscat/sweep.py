"""
Parameter sweeps, figure presets and CSV/JSON output.

Grid points are grouped by the parameters that require a fresh propagation
(a_d, a_h, q, m).  Groups are distributed over worker processes; inside a
group every (s, y) point reuses the cached propagator.  Results are written
back by grid index, so the table is identical for any worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .params import ModelParams, NumericsParams, validate
from .qdt import s_from_phase

logger = logging.getLogger(__name__)

AXIS_NAMES = ("s", "y", "a_d", "a_h", "q", "E_coll", "a_d_over_a_h")
SPACINGS = ("linear", "log", "phase", "list")
WORKERS_ENV = "Q2DSCAT_WORKERS"


@dataclass(frozen=True)
class Axis:
    """One sweep axis.

    ``spacing`` is ``linear`` or ``log`` between ``min`` and ``max``,
    ``list`` for explicit ``values``, or ``phase`` (s only): ``count``
    values of s equally spaced in the short-range phase over one period,
    excluding the pole at s = +-inf.
    """

    name: str
    min: float = 0.0
    max: float = 0.0
    count: int = 2
    spacing: str = "linear"
    values: tuple = ()

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown axis {self.name!r}; expected one of {AXIS_NAMES}")
        if self.spacing not in SPACINGS:
            raise ValueError(f"unknown spacing {self.spacing!r}")
        if self.spacing == "list":
            if len(self.values) < 1:
                raise ValueError("list axis needs values")
            if not all(math.isfinite(v) for v in self.values):
                raise ValueError("axis values must be finite")
            return
        if self.count < 2:
            raise ValueError("axis count must be >= 2")
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError("axis range must be finite")
        if self.spacing == "log" and (self.min <= 0 or self.max <= 0):
            raise ValueError("log spacing requires positive endpoints")
        if self.spacing == "phase" and self.name != "s":
            raise ValueError("phase spacing applies to the s axis only")

    def grid(self) -> np.ndarray:
        if self.spacing == "list":
            return np.asarray(self.values, dtype=float)
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.count)
        if self.spacing == "phase":
            phi = -math.pi / 8 + math.pi * (np.arange(self.count) + 0.5) / self.count
            return s_from_phase(phi)
        return np.linspace(self.min, self.max, self.count)

    @classmethod
    def parse(cls, text: str) -> "Axis":
        """``"s linear -6 6 241"``, ``"q log 0.01 0.1 8"``, ``"s phase 120"`` or ``"a_d list 0 0.32"``."""
        parts = text.split()
        if len(parts) < 2:
            raise ValueError(f"bad axis specification {text!r}")
        name, spacing, rest = parts[0], parts[1], parts[2:]
        try:
            if spacing == "list":
                return cls(name, spacing="list", values=tuple(float(v) for v in rest))
            if spacing == "phase":
                return cls(name, spacing="phase", count=int(rest[0]))
            lo, hi, n = rest
            return cls(name, float(lo), float(hi), int(n), spacing)
        except (ValueError, IndexError) as exc:
            raise ValueError(f"bad axis specification {text!r}: {exc}") from None

    def describe(self) -> str:
        if self.spacing == "list":
            return f"{self.name} list " + " ".join(repr(v) for v in self.values)
        if self.spacing == "phase":
            return f"{self.name} phase {self.count}"
        return f"{self.name} {self.spacing} {self.min!r} {self.max!r} {self.count}"


@dataclass(frozen=True)
class SweepSpec:
    base: ModelParams = field(default_factory=ModelParams)
    numerics: NumericsParams = field(default_factory=NumericsParams)
    axes: tuple = ()
    output: Optional[str] = None
    json_output: Optional[str] = None
    workers: Optional[int] = None
    name: str = "sweep"

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a sweep needs one or two axes")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError("axes must be distinct")
        if "q" in names and "E_coll" in names:
            raise ValueError("q and E_coll cannot both be swept")
        if self.workers is not None and self.workers < 1:
            raise ValueError("workers must be >= 1")

    def points(self) -> list[ModelParams]:
        """Grid points in row-major order (last axis fastest)."""
        grids = [a.grid() for a in self.axes]
        out = []
        for idx in np.ndindex(*[len(g) for g in grids]):
            changes = {}
            for a, g, i in zip(self.axes, grids, idx):
                changes[a.name] = float(g[i])
            out.append(_apply(self.base, changes))
        return out


def _apply(base: ModelParams, changes: dict) -> ModelParams:
    ch = dict(changes)
    if "E_coll" in ch:
        ch["q"] = math.sqrt(ch.pop("E_coll"))
    ratio = ch.pop("a_d_over_a_h", None)
    p = base.replace(**ch)
    if ratio is not None:
        p = p.replace(a_d=ratio * p.a_h)
    return p


# --- records -----------------------------------------------------------------

COLUMNS = (
    "index",
    "s",
    "y",
    "a_d",
    "a_h",
    "q",
    "m",
    "statistics",
    "E_coll",
    "alpha",
    "beta",
    "re_S00",
    "im_S00",
    "f",
    "K_el",
    "K_re",
    "loss",
    "residual",
    "l_max",
    "n_open",
    "converged",
    "pole",
    "beta_eff",
    "error",
)


@dataclass
class SweepRecord:
    index: int
    s: float
    y: float
    a_d: float
    a_h: float
    q: float
    m: int
    statistics: str
    E_coll: float
    alpha: float = math.nan
    beta: float = math.nan
    re_S00: float = math.nan
    im_S00: float = math.nan
    f: float = math.nan
    K_el: float = math.nan
    K_re: float = math.nan
    loss: float = math.nan
    residual: float = math.nan
    l_max: int = -1
    n_open: int = 0
    converged: bool = False
    pole: bool = False
    beta_eff: float = math.nan
    error: str = ""

    def row(self) -> list[str]:
        return [_fmt(getattr(self, c)) for c in COLUMNS]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def beta_3d_equivalent(beta: float, q: float, a_h: float, m: int) -> float:
    """Reactive parameter expressed per equivalent 3D density.

    The quasi-2D loss rate summed over +-m is g (hbar/mu) d_m 4 q beta for
    small q (d_m = 2 for m != 0, else 1); multiplying by a_h and writing the
    result as 4 pi g (hbar/mu) beta_eff gives beta_eff = d_m q a_h beta / pi.
    """
    d_m = 2 if m != 0 else 1
    return d_m * q * a_h * beta / math.pi


def _record(i: int, p: ModelParams) -> SweepRecord:
    return SweepRecord(i, p.s, p.y, p.a_d, p.a_h, p.q, int(p.m), p.statistics.value, p.q**2)


def _fill(rec: SweepRecord, obs) -> None:
    rec.alpha, rec.beta = obs.alpha, obs.beta
    rec.re_S00, rec.im_S00 = obs.S00.real, obs.S00.imag
    rec.f, rec.K_el, rec.K_re = obs.f, obs.K_el, obs.K_re
    rec.loss, rec.residual = obs.loss, obs.residual
    rec.l_max, rec.n_open = obs.l_max, obs.n_open
    rec.converged, rec.pole = obs.converged and not obs.pole, obs.pole
    rec.beta_eff = beta_3d_equivalent(obs.beta, rec.q, rec.a_h, rec.m)


def _run_group(args) -> list[tuple[int, SweepRecord]]:
    """Evaluate every point of one propagation group (runs in a worker)."""
    import warnings

    from .solver import QuasiTwoD

    items, numerics = args
    out = []
    try:
        _limit_threads()
        solver = QuasiTwoD(items[0][1], numerics)
    except Exception as exc:  # recorded per row, never dropped
        for i, p in items:
            rec = _record(i, p)
            rec.error = f"{type(exc).__name__}: {exc}"
            out.append((i, rec))
        return out
    for i, p in items:
        rec = _record(i, p)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                _fill(rec, solver.solve(p.s, p.y))
        except Exception as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
        out.append((i, rec))
    return out


def _limit_threads():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return
    threadpool_limits(1)


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return 1


def run_sweep(spec: SweepSpec, workers: Optional[int] = None) -> list[SweepRecord]:
    """Evaluate every grid point; rows come back in grid order."""
    points = spec.points()
    records: list[Optional[SweepRecord]] = [None] * len(points)
    groups: dict = {}
    for i, p in enumerate(points):
        bad = validate(p, spec.numerics)
        if bad:
            rec = _record(i, p)
            rec.error = "; ".join(str(v) for v in bad)
            records[i] = rec
            continue
        key = (p.a_d, p.a_h, p.q, p.m, p.statistics.value)
        groups.setdefault(key, []).append((i, p))
    jobs = [(items, spec.numerics) for items in groups.values()]
    n_workers = min(resolve_workers(workers if workers is not None else spec.workers), max(1, len(jobs)))
    if n_workers == 1:
        results = map(_run_group, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=n_workers)
        results = pool.map(_run_group, jobs)
    try:
        for chunk in results:
            for i, rec in chunk:
                records[i] = rec
    finally:
        if n_workers > 1:
            pool.shutdown()
    return records  # type: ignore[return-value]


def to_csv(records: Sequence[SweepRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def write_csv(records: Sequence[SweepRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(to_csv(records))


def write_json(records: Sequence[SweepRecord], spec: SweepSpec, path: str, elapsed: float, abar1: Optional[float] = None) -> None:
    meta = {
        "version": __version__,
        "name": spec.name,
        "model": spec.base.to_dict(),
        "numerics": spec.numerics.to_dict(),
        "axes": [a.describe() for a in spec.axes],
        "abar1": abar1,
        "elapsed_s": elapsed,
        "columns": list(COLUMNS),
        "rows": [[getattr(r, c) for c in COLUMNS] for r in records],
    }
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=1, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


# --- presets -------------------------------------------------------------------

FIG8_AD = (0.0, 0.32, 0.73, 2.02)


def figure_preset(name: str) -> SweepSpec:
    """Fully populated sweep for one of the standard figure families.

    Presets whose figure does not state every parameter use the documented
    assumptions listed in the README (a_d = 0.73 for the alpha/beta-vs-s
    figures, a_h = 1.7 where no trap is given).
    """
    s_axis = Axis("s", -6.0, 6.0, 241)
    if name == "beta-vs-s-tight":
        base = ModelParams(y=0.7, a_h=1.7, q=0.05)
        axes = (Axis("a_d", spacing="list", values=FIG8_AD), s_axis)
    elif name == "beta-vs-s-loose":
        base = ModelParams(y=0.7, a_h=5.2, q=0.05)
        axes = (Axis("a_d", spacing="list", values=FIG8_AD), s_axis)
    elif name == "alpha-vs-s":
        base = ModelParams(a_d=0.73, a_h=1.7, q=0.05)
        axes = (Axis("y", spacing="list", values=(0.1, 0.3, 0.5, 0.7, 1.0)), s_axis)
    elif name == "circles":
        base = ModelParams(a_d=0.3, a_h=1.7, q=0.05)
        axes = (Axis("y", spacing="list", values=(0.2, 0.5, 0.8, 1.0)), Axis("s", spacing="phase", count=120))
    elif name == "rates-vs-ad":
        base = ModelParams(y=0.7, a_h=1.7, q=0.05)
        axes = (Axis("s", spacing="list", values=(-2.0, 0.0, 1.0, 2.0, 3.0)), Axis("a_d_over_a_h", 0.0, 1.5, 31))
    elif name == "crossover":
        base = ModelParams(s=0.0, y=0.7, q=0.05)
        axes = (Axis("a_h", spacing="list", values=(50.0, 5.0)), Axis("a_d_over_a_h", 0.0, 0.4, 21))
    elif name == "rates-vs-energy":
        base = ModelParams(s=0.0, y=1.0, a_h=1.7)
        axes = (Axis("a_d", spacing="list", values=(0.73, 2.02)), Axis("E_coll", 1e-4, 1e-2, 21, "log"))
    else:
        raise KeyError(f"unknown figure preset {name!r}; choose from {', '.join(PRESETS)}")
    return SweepSpec(base=base, axes=axes, name=name)


PRESETS = ("beta-vs-s-tight", "beta-vs-s-loose", "alpha-vs-s", "circles", "rates-vs-ad", "crossover", "rates-vs-energy")
