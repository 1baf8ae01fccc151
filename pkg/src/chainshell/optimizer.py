"""Temporary-shelter form optimization.

Enumerates anchor configurations, generates seeded surface candidates under
a 3 m amplitude cap, gates them by the 2% drainage rule, grades survivors
1-100 on chainmail area (CMS), usable area (UA), and column volumes
(LC, FC), ranks by weighted score, and reduces formwork columns on the
winner while the supported shape stays within perimeter/area tolerances.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RBFInterpolator

from . import fem
from .errors import ParameterError
from .fem import SupportKind
from .filtering import measure
from .loads import StructureSpec, combine, deflection_limit
from .shell3d import (ControlGrid, ShellSurface, TriangleMesh, _iteration_rng,
                      interpolate_surface)

MIN_DRAINAGE_SLOPE = 0.02
SLOPE_GRID_POINTS = 10       # 10x10 grid of sample points
USABLE_AREA_RASTER = 100     # 100x100 plan raster
HEADROOM_M = 1.5
AMPLITUDE_CAP_M = 3.0
COLUMN_GRID_POSITIONS_M = (0.25, 0.75, 1.25, 1.75)
DEFAULT_COLUMN_SIDE_M = 0.05

WEIGHT_CMS = 0.4
WEIGHT_UA = 0.4
WEIGHT_LC = 0.1
WEIGHT_FC = 0.1


class AnchorKind(enum.Enum):
    ONE = "one"
    TWO_SIDE = "two-side"
    TWO_DIAGONAL = "two-diagonal"
    THREE = "three"
    FOUR = "four"


# base-square corners in plan fractions (x, y)
_CORNERS = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))
_ANCHOR_CORNERS = {
    AnchorKind.ONE: (0,),
    AnchorKind.TWO_SIDE: (0, 1),
    AnchorKind.TWO_DIAGONAL: (0, 2),
    AnchorKind.THREE: (0, 1, 2),
    AnchorKind.FOUR: (0, 1, 2, 3),
}


@dataclass(frozen=True)
class AnchorConfig:
    kind: AnchorKind
    span_m: float = 2.0

    @property
    def points(self) -> Tuple[Tuple[float, float], ...]:
        """Ground-pin plan coordinates (m) on the base-square corners."""
        return tuple((fx * self.span_m, fy * self.span_m)
                     for i in _ANCHOR_CORNERS[self.kind]
                     for fx, fy in (_CORNERS[i],))


@dataclass(frozen=True)
class Column:
    position: Tuple[float, float]  # plan, m
    height: float                  # m
    section_area: float            # m2

    @property
    def volume(self) -> float:
        return self.section_area * self.height


@dataclass(frozen=True)
class ColumnSet:
    load_bearing: Tuple[Column, ...]
    formwork: Tuple[Column, ...]

    @property
    def lc_volume(self) -> float:
        return sum(c.volume for c in self.load_bearing)

    @property
    def fc_volume(self) -> float:
        return sum(c.volume for c in self.formwork)

    def all_columns(self) -> Tuple[Column, ...]:
        return self.load_bearing + self.formwork


def initial_columns(surface: ShellSurface,
                    section_side: float = DEFAULT_COLUMN_SIDE_M) -> ColumnSet:
    """16 columns on the 4x4 grid at 0.5 m spacing.

    The four corner-most columns are permanent load-bearing supports; the
    twelve others are removable formwork.  Column height equals the surface
    height at its plan position (never below ground).
    """
    area = section_side * section_side
    lb, fw = [], []
    ends = (COLUMN_GRID_POSITIONS_M[0], COLUMN_GRID_POSITIONS_M[-1])
    for x in COLUMN_GRID_POSITIONS_M:
        for y in COLUMN_GRID_POSITIONS_M:
            h = float(surface.evaluate(x * 1000.0, y * 1000.0)[0, 0]) / 1000.0
            col = Column(position=(x, y), height=max(h, 0.0), section_area=area)
            if x in ends and y in ends:
                lb.append(col)
            else:
                fw.append(col)
    return ColumnSet(load_bearing=tuple(lb), formwork=tuple(fw))


@dataclass(frozen=True)
class SlopeReport:
    """Max-neighbour slope per grid point plus the drainage verdict."""

    slopes: np.ndarray                 # (10, 10) max neighbour slope
    passed: bool
    failing_points: Tuple[Tuple[float, float], ...]  # plan coords, m

    @property
    def min_slope_S(self) -> float:
        return float(self.slopes.min())

    def __eq__(self, other):  # ndarray field, compare by content
        return (isinstance(other, SlopeReport)
                and np.array_equal(self.slopes, other.slopes)
                and self.passed == other.passed
                and self.failing_points == other.failing_points)


def slope_grid(surface: ShellSurface, min_slope: float = MIN_DRAINAGE_SLOPE,
               rule: str = "ponding") -> SlopeReport:
    """Drainage check on a 10x10 grid of surface points.

    Slope between 4-neighbours is |dh| / horizontal distance.  Under the
    default ponding rule a point fails iff all its neighbour slopes are
    below the threshold (no direction drains); the strict rule fails a
    point when any neighbour slope is below it.
    """
    n = SLOPE_GRID_POINTS
    coords_mm = np.linspace(0.0, surface.span_mm, n)
    z_m = np.asarray(surface.evaluate(coords_mm, coords_mm)) / 1000.0
    step_m = (coords_mm[1] - coords_mm[0]) / 1000.0
    sx = np.abs(np.diff(z_m, axis=0)) / step_m  # (n-1, n) slopes between x-neighbours
    sy = np.abs(np.diff(z_m, axis=1)) / step_m  # (n, n-1)

    big = np.inf
    neigh = np.full((n, n, 4), -1.0)
    neigh[1:, :, 0] = sx       # toward -x
    neigh[:-1, :, 1] = sx      # toward +x
    neigh[:, 1:, 2] = sy       # toward -y
    neigh[:, :-1, 3] = sy      # toward +y

    has = neigh >= 0
    if rule == "ponding":
        # fails iff every existing neighbour slope is under the threshold
        drains = (neigh >= min_slope) & has
        fail = ~drains.any(axis=2)
        slopes = np.where(has, neigh, -big).max(axis=2)
    elif rule == "strict":
        under = (neigh < min_slope) & has
        fail = under.any(axis=2)
        slopes = np.where(has, neigh, big).min(axis=2)
    else:
        raise ParameterError(f"unknown drainage rule {rule!r}")

    pts = []
    coords_m = coords_mm / 1000.0
    for i, j in zip(*np.nonzero(fail)):
        pts.append((float(coords_m[i]), float(coords_m[j])))
    return SlopeReport(slopes=slopes, passed=not fail.any(),
                       failing_points=tuple(pts))


def usable_area(surface: ShellSurface, columns: Optional[ColumnSet] = None,
                headroom: float = HEADROOM_M,
                raster: int = USABLE_AREA_RASTER) -> float:
    """UA = A_T - A_O on a plan raster of cell centres.

    Obstructed cells have clear height below the headroom or sit inside a
    column footprint.
    """
    span_m = surface.span_mm / 1000.0
    cell = span_m / raster
    centres_m = (np.arange(raster) + 0.5) * cell
    z_m = np.asarray(surface.evaluate(centres_m * 1000.0, centres_m * 1000.0)) / 1000.0
    obstructed = z_m < headroom
    if columns is not None:
        X, Y = np.meshgrid(centres_m, centres_m, indexing="ij")
        for col in columns.all_columns():
            half = math.sqrt(col.section_area) / 2.0
            cx, cy = col.position
            inside = ((np.abs(X - cx) <= half) & (np.abs(Y - cy) <= half))
            obstructed |= inside
    free = int((~obstructed).sum())
    return free * cell * cell


class Orientation(enum.Enum):
    MINIMIZE_BEST = "minimize"
    MAXIMIZE_BEST = "maximize"


def grade(values: Sequence[float],
          orientation: Orientation = Orientation.MINIMIZE_BEST) -> List[float]:
    """Affine 1-100 rescale within a cohort: best 100, worst 1.

    An all-equal cohort grades 100 across the board.
    """
    if len(values) == 0:
        raise ParameterError("cannot grade an empty cohort")
    arr = np.asarray(values, dtype=float)
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        return [100.0] * len(arr)
    if orientation is Orientation.MINIMIZE_BEST:
        t = (hi - arr) / (hi - lo)
    else:
        t = (arr - lo) / (hi - lo)
    return list(1.0 + 99.0 * t)


@dataclass(frozen=True)
class DesignMetrics:
    cms_m2: float
    ua_m2: float
    lc_volume_m3: float
    lc_count: int
    fc_volume_m3: float
    fc_count: int
    min_slope_S: float
    drainage_pass: bool


@dataclass(frozen=True, eq=False)
class CandidateDesign:
    candidate_id: str
    anchors: AnchorConfig
    columns: ColumnSet
    surface: ShellSurface
    metrics: DesignMetrics
    slope_report: SlopeReport
    grades: Optional[Dict[str, float]] = None
    weighted_score: Optional[float] = None
    rank: Optional[int] = None


def evaluate_candidate(candidate_id: str, surface: ShellSurface,
                       anchors: AnchorConfig,
                       section_side: float = DEFAULT_COLUMN_SIDE_M,
                       min_slope: float = MIN_DRAINAGE_SLOPE,
                       slope_rule: str = "ponding",
                       headroom: float = HEADROOM_M) -> CandidateDesign:
    columns = initial_columns(surface, section_side)
    report = slope_grid(surface, min_slope, slope_rule)
    mets = measure(surface)
    metrics = DesignMetrics(
        cms_m2=mets.area_a,
        ua_m2=usable_area(surface, columns, headroom),
        lc_volume_m3=columns.lc_volume,
        lc_count=len(columns.load_bearing),
        fc_volume_m3=columns.fc_volume,
        fc_count=len(columns.formwork),
        min_slope_S=report.min_slope_S,
        drainage_pass=report.passed,
    )
    return CandidateDesign(candidate_id=candidate_id, anchors=anchors,
                           columns=columns, surface=surface, metrics=metrics,
                           slope_report=report)


@dataclass(frozen=True)
class RankingReport:
    ranked: Tuple[CandidateDesign, ...]
    rejected: Tuple[CandidateDesign, ...]
    all_rejected: bool

    @property
    def winner(self) -> Optional[CandidateDesign]:
        return self.ranked[0] if self.ranked else None


DEFAULT_WEIGHTS = (WEIGHT_CMS, WEIGHT_UA, WEIGHT_LC, WEIGHT_FC)


def rank_designs(candidates: Sequence[CandidateDesign],
                 weights: Tuple[float, float, float, float] = DEFAULT_WEIGHTS,
                 ) -> RankingReport:
    """Drainage-gate, grade survivors per criterion, sort by weighted score.

    Rejected candidates never enter any grading cohort.  Ties break on
    lower CMS, then higher UA, then input order.
    """
    if not candidates:
        raise ParameterError("no candidates to rank")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ParameterError("criterion weights must sum to 1.0")
    survivors = [c for c in candidates if c.metrics.drainage_pass]
    rejected = tuple(c for c in candidates if not c.metrics.drainage_pass)
    if not survivors:
        return RankingReport(ranked=(), rejected=rejected, all_rejected=True)

    def column_scalar(volumes: List[float], counts: List[int]) -> List[float]:
        # minimize by volume, by count only when every volume ties
        if max(volumes) > min(volumes):
            return volumes
        return [float(c) for c in counts]

    g_cms = grade([c.metrics.cms_m2 for c in survivors], Orientation.MINIMIZE_BEST)
    g_ua = grade([c.metrics.ua_m2 for c in survivors], Orientation.MAXIMIZE_BEST)
    g_lc = grade(column_scalar([c.metrics.lc_volume_m3 for c in survivors],
                               [c.metrics.lc_count for c in survivors]),
                 Orientation.MINIMIZE_BEST)
    g_fc = grade(column_scalar([c.metrics.fc_volume_m3 for c in survivors],
                               [c.metrics.fc_count for c in survivors]),
                 Orientation.MINIMIZE_BEST)

    w_cms, w_ua, w_lc, w_fc = weights
    scored = []
    for i, c in enumerate(survivors):
        grades = {"CMS": g_cms[i], "UA": g_ua[i], "LC": g_lc[i], "FC": g_fc[i]}
        score = (w_cms * g_cms[i] + w_ua * g_ua[i]
                 + w_lc * g_lc[i] + w_fc * g_fc[i])
        scored.append(replace(c, grades=grades, weighted_score=score))

    order = sorted(range(len(scored)),
                   key=lambda i: (-scored[i].weighted_score,
                                  scored[i].metrics.cms_m2,
                                  -scored[i].metrics.ua_m2,
                                  i))
    ranked = tuple(replace(scored[i], rank=pos + 1)
                   for pos, i in enumerate(order))
    return RankingReport(ranked=ranked, rejected=rejected, all_rejected=False)


def _support_nodes(surface: ShellSurface, grid: int,
                   anchors: AnchorConfig,
                   columns: ColumnSet) -> Dict[int, SupportKind]:
    """Map anchors and column tops to nearest lattice nodes.

    Anchors pin the shell edge; load-bearing columns (fixed base, pinned
    top) restrain translation; formwork columns (sliding base) restrain
    only the vertical direction.  Stronger kinds win collisions.
    """
    span_m = surface.span_mm / 1000.0
    step = span_m / grid
    n = grid + 1

    def node_at(x: float, y: float) -> int:
        i = int(round(x / step))
        j = int(round(y / step))
        return min(max(i, 0), grid) * n + min(max(j, 0), grid)

    strength = {SupportKind.FIXED: 3, SupportKind.PINNED: 2,
                SupportKind.SLIDING_BASE: 1}
    supports: Dict[int, SupportKind] = {}

    def put(node: int, kind: SupportKind):
        have = supports.get(node)
        if have is None or strength[kind] > strength[have]:
            supports[node] = kind

    for (x, y) in anchors.points:
        put(node_at(x, y), SupportKind.PINNED)
    for col in columns.load_bearing:
        put(node_at(*col.position), SupportKind.PINNED)
    for col in columns.formwork:
        put(node_at(*col.position), SupportKind.SLIDING_BASE)
    return supports


def formwork_reactions(design: CandidateDesign, grid: int = 10,
                       structure: Optional[StructureSpec] = None) -> Dict[Column, float]:
    """Vertical FEM reaction magnitude (kN) carried by each formwork column."""
    structure = structure or StructureSpec()
    supports = _support_nodes(design.surface, grid, design.anchors, design.columns)
    lc = combine(structure, design.metrics.cms_m2)
    analysis = fem.analyze_shell(design.surface, lc, supports=supports, grid=grid)
    span_m = design.surface.span_mm / 1000.0
    step = span_m / grid
    n = grid + 1
    out = {}
    for col in design.columns.formwork:
        node = (int(round(col.position[0] / step)) * n
                + int(round(col.position[1] / step)))
        reaction = analysis.result.reactions.get(node)
        out[col] = abs(float(reaction[2])) if reaction is not None else 0.0
    return out


def _fit_supported_surface(anchors: AnchorConfig, columns: Sequence[Column],
                           span_m: float, resolution: int = 33):
    """Thin-plate fit through anchor pins and column tops; (P, a) of the fit."""
    pts = [(x, y, 0.0) for (x, y) in anchors.points]
    pts += [(c.position[0], c.position[1], c.height) for c in columns]
    xy = np.array([(p[0], p[1]) for p in pts])
    z = np.array([p[2] for p in pts])
    rbf = RBFInterpolator(xy, z, kernel="thin_plate_spline")
    coords = np.linspace(0.0, span_m, resolution)
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    Z = rbf(np.column_stack([X.ravel(), Y.ravel()])).reshape(resolution, resolution)
    # mesh the fit directly for perimeter/area comparison
    verts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    idx = np.arange(resolution * resolution).reshape(resolution, resolution)
    v00 = idx[:-1, :-1].ravel(); v10 = idx[1:, :-1].ravel()
    v01 = idx[:-1, 1:].ravel(); v11 = idx[1:, 1:].ravel()
    faces = np.concatenate([np.column_stack([v00, v10, v11]),
                            np.column_stack([v00, v11, v01])])
    mesh = TriangleMesh(vertices=verts, faces=faces)
    return mesh.boundary_length(), mesh.area()


def reduce_formwork(design: CandidateDesign, reference: ShellSurface,
                    dP: float, da: float, grid: int = 10,
                    structure: Optional[StructureSpec] = None) -> ColumnSet:
    """Remove formwork columns while the supported shape holds its metrics.

    Candidates are tried in ascending order of FEM vertical reaction; a
    removal sticks iff the thin-plate fit through the anchors and the
    remaining column tops stays within (dP, da) of the full 16-column
    reference fit.  Load-bearing columns are never touched.
    """
    if dP < 0 or da < 0:
        raise ParameterError("tolerances must be non-negative")
    span_m = reference.span_mm / 1000.0
    all_fw = list(design.columns.formwork)
    p_ref, a_ref = _fit_supported_surface(
        design.anchors, list(design.columns.load_bearing) + all_fw, span_m)

    reactions = formwork_reactions(design, grid, structure)
    order = sorted(all_fw, key=lambda c: (reactions.get(c, 0.0), c.position))

    remaining = list(all_fw)
    removed_any = True
    while removed_any:
        removed_any = False
        for col in list(order):
            if col not in remaining:
                continue
            trial = [c for c in remaining if c is not col]
            p, a = _fit_supported_surface(
                design.anchors, list(design.columns.load_bearing) + trial, span_m)
            if abs(p - p_ref) <= dP and abs(a - a_ref) <= da:
                remaining = trial
                removed_any = True
        # one full sweep with no acceptable removal terminates the loop
    return ColumnSet(load_bearing=design.columns.load_bearing,
                     formwork=tuple(remaining))


@dataclass(frozen=True)
class OptimizeSettings:
    seed: int = 7
    iterations_per_anchor: int = 20
    span_mm: float = 2000.0
    control_F: int = 4
    amplitude_cap_m: float = AMPLITUDE_CAP_M
    amplitude_min_fraction: float = 0.5
    surface_resolution: int = 64
    column_section_side: float = DEFAULT_COLUMN_SIDE_M
    min_slope: float = MIN_DRAINAGE_SLOPE
    slope_rule: str = "ponding"
    headroom_m: float = HEADROOM_M
    fem_grid: int = 10
    reduction_tolerance: float = 0.02
    weights: Tuple[float, float, float, float] = DEFAULT_WEIGHTS
    threads: int = 1

    def __post_init__(self):
        if self.iterations_per_anchor < 1:
            raise ParameterError("need at least one iteration per anchor kind")
        if not 0 < self.amplitude_cap_m <= AMPLITUDE_CAP_M:
            raise ParameterError("amplitude cap must be in (0, 3] m")
        if not 0 <= self.amplitude_min_fraction < 1:
            raise ParameterError("amplitude_min_fraction must be in [0, 1)")
        if self.control_F < 2:
            raise ParameterError("control grid F must be >= 2")


def shelter_control_grid(settings: OptimizeSettings, kind: AnchorKind,
                         anchor_index: int, iteration: int) -> ControlGrid:
    """Seeded shelter control grid: random dome heights, anchors at zero.

    Heights are drawn uniformly in [0, A_i] metres where the iteration's
    amplitude A_i is itself drawn within the cap; control points over
    anchor corners are clamped to the ground.
    """
    rng = _iteration_rng(settings.seed * 5 + anchor_index, iteration)
    lo = settings.amplitude_min_fraction * settings.amplitude_cap_m
    amp_m = float(rng.uniform(lo, settings.amplitude_cap_m))
    m = settings.control_F + 1
    z_mm = rng.uniform(0.0, amp_m * 1000.0, size=(m, m))
    corner_ij = {(0, 0): 0, (m - 1, 0): 1, (m - 1, m - 1): 2, (0, m - 1): 3}
    wanted = set(_ANCHOR_CORNERS[kind])
    for (i, j), corner in corner_ij.items():
        if corner in wanted:
            z_mm[i, j] = 0.0
    return ControlGrid(F=settings.control_F, amplitude_A=amp_m * 1000.0,
                       span_L=settings.span_mm, z_values=z_mm,
                       seed=settings.seed, iteration=iteration)


@dataclass(frozen=True)
class OptimizeResult:
    report: RankingReport
    winner: Optional[CandidateDesign]
    reduced_columns: Optional[ColumnSet]
    winner_analysis: Optional[fem.ShellAnalysis]
    limit_mm: float


def optimize(settings: OptimizeSettings = OptimizeSettings(),
             structure: Optional[StructureSpec] = None) -> OptimizeResult:
    """Full shelter study: 5 anchor kinds x N iterations, ranked globally.

    The winner gets formwork reduction and a frame solve; results are
    deterministic for a given (settings, structure) at any thread count.
    """
    structure = structure or StructureSpec()
    kinds = list(AnchorKind)
    jobs = []
    for ai, kind in enumerate(kinds):
        anchors = AnchorConfig(kind=kind, span_m=settings.span_mm / 1000.0)
        for it in range(settings.iterations_per_anchor):
            jobs.append((ai, kind, anchors, it))

    def build(job):
        ai, kind, anchors, it = job
        grid = shelter_control_grid(settings, kind, ai, it)
        surface = interpolate_surface(grid, settings.surface_resolution)
        return evaluate_candidate(f"{kind.value}-{it:02d}", surface, anchors,
                                  settings.column_section_side,
                                  settings.min_slope, settings.slope_rule,
                                  settings.headroom_m)

    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            candidates = list(pool.map(build, jobs))
    else:
        candidates = [build(j) for j in jobs]

    report = rank_designs(candidates, settings.weights)
    limit = deflection_limit(settings.span_mm / 1000.0)
    if report.all_rejected:
        return OptimizeResult(report=report, winner=None, reduced_columns=None,
                              winner_analysis=None, limit_mm=limit)

    winner = report.winner
    # tolerances relative to the 16-column reference fit's own metrics
    span_m = settings.span_mm / 1000.0
    p_ref, a_ref = _fit_supported_surface(
        winner.anchors, list(winner.columns.all_columns()), span_m)
    dP = settings.reduction_tolerance * p_ref
    da = settings.reduction_tolerance * a_ref
    reduced = reduce_formwork(winner, winner.surface, dP, da,
                              settings.fem_grid, structure)
    final_columns = ColumnSet(load_bearing=winner.columns.load_bearing,
                              formwork=reduced.formwork)
    supports = _support_nodes(winner.surface, settings.fem_grid,
                              winner.anchors, final_columns)
    lc = combine(structure, winner.metrics.cms_m2)
    analysis = fem.analyze_shell(winner.surface, lc, supports=supports,
                                 grid=settings.fem_grid)
    return OptimizeResult(report=report, winner=winner,
                          reduced_columns=final_columns,
                          winner_analysis=analysis, limit_mm=limit)
