"""Shared fixtures-in-code: independent oracles and cheap model builders."""
from __future__ import annotations

import functools
import math

import numpy as np

from chainshell.fem import BeamSection, FrameElement, FrameModel, SupportKind
from chainshell.optimizer import (AnchorConfig, AnchorKind, CandidateDesign,
                                  ColumnSet, DesignMetrics, SlopeReport)
from chainshell.shell3d import ControlGrid, ShellSurface, generate_iterations, interpolate_surface
from chainshell.units import Shape, UnitCell

BEAM_E = 2.1e9  # default material modulus, Pa
BEAM_SECTION = BeamSection(area=1e-3, inertia_y=2e-6, inertia_z=3e-6,
                           torsion_J=5e-6)


def raster_solid_fraction(cell: UnitCell, resolution: int = 2048) -> float:
    """Pixel-count the ring band inside one tiling cell.

    Independent of the closed-form area model: a pixel is solid when its
    centre lies within d/2 of the ring centreline.  Centrelines use mitred
    (sharp) corners, so the band area is exactly centreline_length * d and
    the two estimates must agree up to pixelation error.
    """
    pitch = cell.cell_pitch
    assert pitch is not None and pitch > 0
    L, d = cell.member_length_L, cell.rod_diameter_d
    centres = (np.arange(resolution) + 0.5) / resolution * pitch
    X, Y = np.meshgrid(centres, centres, indexing="ij")
    px = X - pitch / 2.0
    py = Y - pitch / 2.0

    if cell.shape is Shape.RECTANGULAR:
        # square outline: Chebyshev distance from centre equals L/2 on it
        dist = np.abs(np.maximum(np.abs(px), np.abs(py)) - L / 2.0)
    elif cell.shape is Shape.CIRCULAR:
        radius = L / (2.0 * math.pi)
        dist = np.abs(np.hypot(px, py) - radius)
    else:
        # equilateral triangle, side L, centroid at the cell centre; the
        # signed distance to the boundary is the smallest inward distance
        # over the three edge half-planes (inradius L / (2 sqrt(3)))
        inradius = L / (2.0 * math.sqrt(3.0))
        inward = []
        for k in range(3):
            angle = math.pi / 2.0 + 2.0 * math.pi * k / 3.0
            inward.append(inradius - (px * math.cos(angle) + py * math.sin(angle)))
        dist = np.abs(np.minimum(np.minimum(inward[0], inward[1]), inward[2]))

    solid = dist <= d / 2.0
    return float(solid.sum()) / float(resolution * resolution)


def grid_from_z(z_mm: np.ndarray, span_mm: float = 2000.0,
                amplitude: float = 0.0) -> ControlGrid:
    z = np.asarray(z_mm, dtype=float)
    return ControlGrid(F=z.shape[0] - 1, amplitude_A=amplitude, span_L=span_mm,
                       z_values=z, seed=0, iteration=0)


def flat_surface(height_mm: float = 0.0, span_mm: float = 2000.0,
                 F: int = 4, resolution: int = 33) -> ShellSurface:
    z = np.full((F + 1, F + 1), float(height_mm))
    return interpolate_surface(grid_from_z(z, span_mm), resolution)


def pool_surfaces(amplitude: float, frequency: int, n: int = 20, seed: int = 42,
                  resolution: int = 64) -> list:
    grids = generate_iterations(amplitude, frequency, n=n, seed=seed)
    return [interpolate_surface(g, resolution) for g in grids]


def cantilever_model(n_elems: int = 6, length: float = 1.5) -> FrameModel:
    """Horizontal beam along x, fully fixed at node 0."""
    xs = np.linspace(0.0, length, n_elems + 1)
    nodes = np.column_stack([xs, np.zeros_like(xs), np.zeros_like(xs)])
    elements = [FrameElement(i, i + 1, BEAM_SECTION) for i in range(n_elems)]
    return FrameModel(nodes=nodes, elements=elements,
                      supports={0: SupportKind.FIXED})


def simply_supported_model(n_elems: int = 16, span: float = 2.0) -> FrameModel:
    """Pin-pin beam with a short transverse stub at each end.

    A bare chain of collinear elements can spin freely about its own axis;
    the stubs (pinned at their far ends) restrain that twist while leaving
    the bending plane untouched.
    """
    xs = np.linspace(0.0, span, n_elems + 1)
    nodes = np.column_stack([xs, np.zeros_like(xs), np.zeros_like(xs)])
    nodes = np.vstack([nodes, [0.0, 0.25, 0.0], [span, 0.25, 0.0]])
    elements = [FrameElement(i, i + 1, BEAM_SECTION) for i in range(n_elems)]
    elements.append(FrameElement(0, n_elems + 1, BEAM_SECTION))
    elements.append(FrameElement(n_elems, n_elems + 2, BEAM_SECTION))
    supports = {0: SupportKind.PINNED, n_elems: SupportKind.PINNED,
                n_elems + 1: SupportKind.PINNED, n_elems + 2: SupportKind.PINNED}
    return FrameModel(nodes=nodes, elements=elements, supports=supports)


def uniform_beam_loads(n_elems: int, span: float, w: float) -> dict:
    """Distributed w N/m lumped at the nodes of a simply supported span."""
    h = span / n_elems
    loads = {i: (0.0, 0.0, -w * h) for i in range(1, n_elems)}
    loads[0] = (0.0, 0.0, -w * h / 2.0)
    loads[n_elems] = (0.0, 0.0, -w * h / 2.0)
    return loads


@functools.lru_cache(maxsize=1)
def _shared_flat_surface() -> ShellSurface:
    return flat_surface(height_mm=1600.0, resolution=17)


def synthetic_candidate(cid: str, cms: float, ua: float, lc_vol: float = 0.012,
                        fc_vol: float = 0.036, lc_count: int = 4,
                        fc_count: int = 12, drainage: bool = True) -> CandidateDesign:
    """Hand-built design for exercising the ranking rules in isolation."""
    metrics = DesignMetrics(cms_m2=cms, ua_m2=ua, lc_volume_m3=lc_vol,
                            lc_count=lc_count, fc_volume_m3=fc_vol,
                            fc_count=fc_count, min_slope_S=0.05,
                            drainage_pass=drainage)
    report = SlopeReport(slopes=np.full((10, 10), 0.05), passed=drainage,
                         failing_points=())
    return CandidateDesign(candidate_id=cid,
                           anchors=AnchorConfig(AnchorKind.FOUR),
                           columns=ColumnSet((), ()),
                           surface=_shared_flat_surface(),
                           metrics=metrics, slope_report=report)


def dome_surface(height_m: float = 3.0, radius_m: float = 0.95,
                 span_mm: float = 2000.0, F: int = 16,
                 resolution: int = 64) -> ShellSurface:
    """Clipped paraboloid dome centred on the plan; closed-form clear area.

    z(r) = H (1 - r^2 / R^2) above the rim, 0 outside, so the plan region
    with clear height >= h is the disc r <= R sqrt(1 - h / H) of area
    pi R^2 (1 - h / H).
    """
    coords_m = np.linspace(0.0, span_mm / 1000.0, F + 1)
    X, Y = np.meshgrid(coords_m, coords_m, indexing="ij")
    cx = cy = span_mm / 2000.0
    r2 = (X - cx) ** 2 + (Y - cy) ** 2
    z_m = np.maximum(height_m * (1.0 - r2 / radius_m ** 2), 0.0)
    grid = grid_from_z(z_m * 1000.0, span_mm, amplitude=height_m * 1000.0)
    return interpolate_surface(grid, resolution)
