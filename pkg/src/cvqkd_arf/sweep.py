"""Threshold sweeps, (beam radius, threshold) surfaces and optimum search."""

from __future__ import annotations

import dataclasses
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .averaging import MIN_MC_SAMPLES, AveragedPoint, MCEstimate, mc_profile
from .channel import LinkGeometry
from .config import ScenarioConfig
from .errors import ModelError, SampleSizeError, ValidationError

__all__ = [
    "SweepSpec",
    "SweepResult",
    "SurfaceCell",
    "SurfaceResult",
    "Optimum",
    "FlatSurfaceWarning",
    "default_rth_grid",
    "default_waist_grid",
    "geometry_for_waist",
    "sweep_threshold",
    "sweep_surface",
    "find_optimum",
]

WAIST_MODES = ("receiver", "waist")
# Argmax ties over more than this fraction of cells trigger a warning.
_FLAT_FRACTION = 0.10
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class FlatSurfaceWarning(UserWarning):
    """The grid maximum is shared by many cells, so the optimum is ill-defined."""


def default_rth_grid() -> np.ndarray:
    """60 log-spaced thresholds over [1e-3, 1] m."""
    return np.logspace(-3.0, 0.0, 60)


def default_waist_grid() -> np.ndarray:
    """40 beam radii over [0.01, 0.3] m."""
    return np.linspace(0.01, 0.3, 40)


def _check_grid(name: str, grid) -> Tuple[float, ...]:
    values = tuple(float(v) for v in grid)
    if not values:
        raise ValidationError(f"{name} must be nonempty")
    if not all(math.isfinite(v) and v > 0 for v in values):
        raise ValidationError(f"{name} values must be finite and > 0")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValidationError(f"{name} must be strictly increasing")
    return values


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep.

    Attributes:
        rth_grid: acceptance thresholds r_th (m).
        scenario: link, turbulence, protocol and numerics.
        waist_grid: beam radii for a surface; interpreted per ``waist_mode``.
        waist_mode: ``"receiver"`` imposes each value as w(Z_L);
            ``"waist"`` treats it as the transmitter waist w0.
        mc_check: Monte Carlo sample count for a cross-check of a threshold
            sweep (None disables it).
    """

    rth_grid: Sequence[float]
    scenario: ScenarioConfig = dataclasses.field(default_factory=ScenarioConfig)
    waist_grid: Optional[Sequence[float]] = None
    waist_mode: str = "receiver"
    mc_check: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "rth_grid", _check_grid("rth_grid", self.rth_grid))
        if self.waist_grid is not None:
            object.__setattr__(self, "waist_grid", _check_grid("waist_grid", self.waist_grid))
        if self.waist_mode not in WAIST_MODES:
            raise ValidationError(f"waist_mode must be one of {WAIST_MODES}, got {self.waist_mode!r}")
        if self.mc_check is not None:
            if self.mc_check < MIN_MC_SAMPLES:
                raise SampleSizeError(
                    f"mc_check needs at least {MIN_MC_SAMPLES} samples, got {self.mc_check}"
                )


@dataclass(frozen=True)
class SweepResult:
    points: List[AveragedPoint]
    mc: Optional[List[MCEstimate]] = None

    @property
    def peak(self) -> AveragedPoint:
        """Grid point with the largest signed K̄ (first one on ties)."""
        k = np.array([p.k_bar for p in self.points])
        return self.points[int(np.argmax(k))]


@dataclass(frozen=True)
class SurfaceCell:
    w: float
    r_th: float
    i_bar: float
    k_bar: float
    accept_prob: float
    err_est: float
    error: Optional[str] = None


@dataclass(frozen=True)
class Optimum:
    w: float
    r_th: float
    k_bar: float
    refined: bool = False


@dataclass(frozen=True)
class SurfaceResult:
    """Cells in row-major order: waist outer, threshold inner."""

    waist_grid: Tuple[float, ...]
    rth_grid: Tuple[float, ...]
    cells: List[SurfaceCell]
    optimum: Optional[Optimum]
    secure_region_fraction: float
    scenario: ScenarioConfig
    waist_mode: str = "receiver"

    @property
    def k_bar(self) -> np.ndarray:
        """K̄ as a (len(waist_grid), len(rth_grid)) array; failed cells are NaN."""
        return np.array([c.k_bar for c in self.cells]).reshape(
            len(self.waist_grid), len(self.rth_grid)
        )

    @property
    def failures(self) -> List[SurfaceCell]:
        return [c for c in self.cells if c.error is not None]


def geometry_for_waist(geom: LinkGeometry, w: float, mode: str) -> LinkGeometry:
    if mode == "receiver":
        return geom.with_beam_radius(w)
    return dataclasses.replace(geom, waist=w, rx_beam_radius=None)


def _tag(exc: ModelError, where: str) -> ModelError:
    tagged = type(exc).__new__(type(exc))
    Exception.__init__(tagged, f"{where}: {exc}")
    tagged.__dict__.update(exc.__dict__)
    return tagged


def sweep_threshold(spec: SweepSpec) -> SweepResult:
    """K̄ and Ī at every threshold of ``spec.rth_grid``.

    Errors are re-raised with the offending threshold in the message.
    """
    if spec.waist_grid is not None:
        raise ValidationError("sweep_threshold takes no waist_grid; use sweep_surface")
    sc = spec.scenario
    avg = sc.averager()
    points = []
    for r_th in spec.rth_grid:
        try:
            points.append(avg.point(r_th))
        except ModelError as exc:
            raise _tag(exc, f"r_th={r_th!r}") from exc
    mc = None
    if spec.mc_check is not None:
        mc = mc_profile(spec.rth_grid, sc.geometry, sc.turbulence, sc.protocol,
                        spec.mc_check, sc.seed, sc.mc_strands, sc.clamped_k)
    return SweepResult(points, mc)


def _surface_column(args) -> List[SurfaceCell]:
    scenario, w, rth_grid, mode = args
    nan = float("nan")
    try:
        avg = scenario.averager(geometry_for_waist(scenario.geometry, w, mode))
    except ModelError as exc:
        return [SurfaceCell(w, r, nan, nan, nan, nan, f"{type(exc).__name__}: {exc}")
                for r in rth_grid]
    cells = []
    for r_th in rth_grid:
        try:
            p = avg.point(r_th)
            cells.append(SurfaceCell(w, r_th, p.i_bar, p.k_bar, p.accept_prob, p.err_est))
        except ModelError as exc:
            cells.append(SurfaceCell(w, r_th, nan, nan, nan, nan,
                                     f"{type(exc).__name__}: {exc}"))
    return cells


def _grid_optimum(cells: List[SurfaceCell]) -> Optional[Optimum]:
    k = np.array([c.k_bar for c in cells])
    ok = ~np.isnan(k)
    if not np.any(ok):
        return None
    idx = int(np.argmax(np.where(ok, k, -np.inf)))
    best = cells[idx]
    return Optimum(best.w, best.r_th, best.k_bar)


def sweep_surface(spec: SweepSpec, workers: int = 1) -> SurfaceResult:
    """Evaluate K̄ on the (waist_grid x rth_grid) surface.

    A failing cell is recorded with its error message instead of aborting the
    surface. ``workers > 1`` evaluates waist columns in separate processes;
    the result is identical to the sequential one.
    """
    if spec.waist_grid is None:
        raise ValidationError("sweep_surface needs a waist_grid")
    if spec.mc_check is not None:
        raise ValidationError("mc_check is only supported for threshold sweeps")
    jobs = [(spec.scenario, w, spec.rth_grid, spec.waist_mode) for w in spec.waist_grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(_surface_column, jobs))
    else:
        columns = [_surface_column(job) for job in jobs]
    cells = [cell for col in columns for cell in col]
    secure = sum(1 for c in cells if c.error is None and c.k_bar > 0) / len(cells)
    return SurfaceResult(
        waist_grid=spec.waist_grid,
        rth_grid=spec.rth_grid,
        cells=cells,
        optimum=_grid_optimum(cells),
        secure_region_fraction=secure,
        scenario=spec.scenario,
        waist_mode=spec.waist_mode,
    )


def _golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float):
    """Golden-section search for a maximum on [lo, hi]; returns (x, f(x))."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _bracket(grid: Sequence[float], i: int) -> Tuple[float, float, float]:
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    spacing = min(
        (grid[j + 1] - grid[j] for j in range(max(i - 1, 0), min(i + 1, len(grid) - 1))),
        default=0.0,
    )
    return lo, hi, spacing / 100.0


def find_optimum(
    surface: SurfaceResult,
    refine: bool = False,
    evaluate: Optional[Callable[[float, float], float]] = None,
) -> Optimum:
    """Locate the K̄ maximum of a surface.

    Without ``refine`` this is exactly the grid argmax cell. With ``refine``
    one golden-section pass runs along the threshold axis and then along the
    waist axis, each within the neighbouring grid nodes and to a tolerance of
    1/100 of the local grid spacing. The refined result never falls below the
    grid maximum.

    ``evaluate(w, r_th)`` overrides the default re-evaluation of K̄, which
    otherwise uses the surface's scenario.
    """
    best = surface.optimum
    if best is None:
        raise ModelError("surface has no successfully evaluated cells")
    k = surface.k_bar
    n_ties = int(np.sum(k == best.k_bar))
    if n_ties > 1 and n_ties > _FLAT_FRACTION * k.size:
        warnings.warn(
            f"K̄ maximum is shared by {n_ties} of {k.size} cells; the optimum is not unique",
            FlatSurfaceWarning,
            stacklevel=2,
        )
    if not refine:
        return best

    sc = surface.scenario
    if evaluate is None:
        averagers = {}

        def evaluate(w, r_th):
            avg = averagers.get(w)
            if avg is None:
                avg = sc.averager(geometry_for_waist(sc.geometry, w, surface.waist_mode))
                averagers[w] = avg
            return avg.point(r_th).k_bar

    w_star, r_star, k_star = best.w, best.r_th, best.k_bar
    i_w = surface.waist_grid.index(w_star)
    i_r = surface.rth_grid.index(r_star)

    lo, hi, tol = _bracket(surface.rth_grid, i_r)
    if hi > lo:
        r_new, k_new = _golden_max(lambda r: evaluate(w_star, r), lo, hi, tol)
        if k_new > k_star:
            r_star, k_star = r_new, k_new
    lo, hi, tol = _bracket(surface.waist_grid, i_w)
    if hi > lo:
        w_new, k_new = _golden_max(lambda w: evaluate(w, r_star), lo, hi, tol)
        if k_new > k_star:
            w_star, k_star = w_new, k_new
    return Optimum(w_star, r_star, k_star, refined=True)
