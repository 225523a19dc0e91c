"""Electrostatics of a coplanar electrode pair on a dielectric crystal.

The two bias electrodes are thin metal strips on the crystal surface,
separated by a gap; the emitter sits near the gap. The potential obeys
``div(eps * grad V) = 0`` in the 2-D cross-section through the gap
(x = inter-electrode axis, y = surface normal, vacuum above, crystal
below). The solver is a red-black successive over-relaxation sweep on a
node-centred grid; electrodes and the outer box are Dirichlet data.

Units: lengths in micrometres, potentials in volts, fields in V/cm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "BoundaryCondition",
    "ConvergenceError",
    "DielectricMap",
    "ElectrodeLayout",
    "FieldVector",
    "GeometryError",
    "PotentialGrid",
    "field_at",
    "optimal_relaxation_factor",
    "solve_parallel_plates",
    "solve_potential",
    "uniform_field_oracle",
    "write_grid_csv",
]

V_PER_UM_TO_V_PER_CM = 1.0e4


class GeometryError(ValueError):
    """Layout or solver inputs violate a geometric precondition."""


class ConvergenceError(RuntimeError):
    """Relaxation did not reach tolerance within the iteration budget."""

    def __init__(self, iterations: int, last_update_v: float, tolerance_v: float):
        self.iterations = iterations
        self.last_update_v = last_update_v
        self.tolerance_v = tolerance_v
        super().__init__(
            f"no convergence after {iterations} sweeps: "
            f"last update {last_update_v:.3e} V > tolerance {tolerance_v:.3e} V"
        )


class BoundaryCondition(Enum):
    DIRICHLET_ZERO = "dirichlet_zero"
    NEUMANN_ZERO = "neumann_zero"


@dataclass(frozen=True)
class ElectrodeLayout:
    """Coplanar electrode pair, symmetric about the gap centre.

    The coordinate origin is the gap centre on the surface. The left
    electrode occupies ``[-gap/2 - width, -gap/2]`` at ``y = 0`` and is
    held at ``electrode_potentials_v[0]``; the right one mirrors it.
    ``probe_point_um`` is where the cavity centre sits relative to the
    gap centre.
    """

    electrode_width_um: float
    gap_um: float
    electrode_potentials_v: tuple[float, float]
    domain_extent_um: tuple[float, float]
    probe_point_um: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.gap_um <= 0.0:
            raise GeometryError(f"gap must be positive, got {self.gap_um}")
        if self.electrode_width_um <= 0.0:
            raise GeometryError(f"electrode width must be positive, got {self.electrode_width_um}")
        width, height = self.domain_extent_um
        half_span = self.gap_um / 2.0 + self.electrode_width_um
        margin = 2.0 * self.gap_um
        if width / 2.0 < half_span + margin:
            raise GeometryError(
                f"domain width {width} um leaves less than 2x gap margin around the electrodes"
            )
        if height / 2.0 < margin:
            raise GeometryError(
                f"domain height {height} um leaves less than 2x gap margin around the surface"
            )
        px, py = self.probe_point_um
        if abs(px) >= width / 2.0 or abs(py) >= height / 2.0:
            raise GeometryError(f"probe point {self.probe_point_um} lies outside the domain")

    @property
    def bias_v(self) -> float:
        """Potential difference across the pair (left minus right)."""
        return self.electrode_potentials_v[0] - self.electrode_potentials_v[1]

    def with_bias(self, voltage_v: float) -> "ElectrodeLayout":
        """Same geometry with potentials ``(+V/2, -V/2)``."""
        return ElectrodeLayout(
            electrode_width_um=self.electrode_width_um,
            gap_um=self.gap_um,
            electrode_potentials_v=(voltage_v / 2.0, -voltage_v / 2.0),
            domain_extent_um=self.domain_extent_um,
            probe_point_um=self.probe_point_um,
        )


@dataclass(frozen=True)
class DielectricMap:
    """Relative permittivities of the half-spaces meeting at y = 0."""

    relative_permittivity_above: float = 1.0
    relative_permittivity_below: float = 9.0

    def __post_init__(self) -> None:
        if self.relative_permittivity_above < 1.0 or self.relative_permittivity_below < 1.0:
            raise GeometryError("relative permittivities must be >= 1")


@dataclass(frozen=True)
class FieldVector:
    """Electric field at a point, in V/cm.

    ``e_parallel`` points along the inter-electrode axis (the crystal
    axis the bias field is aligned with); ``e_perpendicular`` is the
    surface-normal component.
    """

    e_parallel_v_per_cm: float
    e_perpendicular_v_per_cm: float

    @property
    def magnitude_v_per_cm(self) -> float:
        return math.hypot(self.e_parallel_v_per_cm, self.e_perpendicular_v_per_cm)

    def scaled(self, factor: float) -> "FieldVector":
        return FieldVector(self.e_parallel_v_per_cm * factor, self.e_perpendicular_v_per_cm * factor)


@dataclass(frozen=True)
class PotentialGrid:
    """Converged potential on a uniform node-centred grid.

    ``values[i, j]`` is the potential at ``(x0 + j*h, y0 + i*h)``;
    ``fixed`` marks Dirichlet nodes (electrodes and, for
    ``DIRICHLET_ZERO``, the outer box).
    """

    spacing_um: float
    values: np.ndarray
    boundary_condition: BoundaryCondition
    x0_um: float
    y0_um: float
    fixed: np.ndarray = field(repr=False)
    iterations: int = 0
    last_update_v: float = 0.0

    @property
    def x_coords_um(self) -> np.ndarray:
        return self.x0_um + self.spacing_um * np.arange(self.values.shape[1])

    @property
    def y_coords_um(self) -> np.ndarray:
        return self.y0_um + self.spacing_um * np.arange(self.values.shape[0])


def uniform_field_oracle(voltage_v: float, gap_um: float) -> float:
    """Parallel-plate field ``V / gap`` in V/cm; analytic solver oracle."""
    if gap_um <= 0.0:
        raise GeometryError(f"gap must be positive, got {gap_um}")
    return voltage_v / gap_um * V_PER_UM_TO_V_PER_CM


def optimal_relaxation_factor(nx: int, ny: int) -> float:
    """Near-optimal SOR factor ``2 / (1 + sin(pi/N))`` for an nx-by-ny grid."""
    n = max(nx, ny)
    return 2.0 / (1.0 + math.sin(math.pi / n))


def _axis_nodes(extent_um: float, spacing_um: float) -> np.ndarray:
    """Symmetric node coordinates covering [-extent/2, extent/2]."""
    half_cells = max(int(round(extent_um / 2.0 / spacing_um)), 2)
    return spacing_um * np.arange(-half_cells, half_cells + 1)


def _sor_relax(
    values: np.ndarray,
    fixed: np.ndarray,
    weights: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    boundary: BoundaryCondition,
    omega: float,
    tolerance_v: float,
    max_iterations: int,
) -> tuple[int, float]:
    """Red-black SOR sweeps in place; returns (iterations, last max update).

    Each colour decomposes into two strided sub-lattices so the whole
    sweep runs on array views, with fixed nodes masked out of the update.
    """
    ny, nx = values.shape
    w_south, w_north, w_west, w_east = weights
    denom = w_south + w_north + w_west + w_east
    free = (~fixed[1:-1, 1:-1]).astype(float)

    blocks = []
    for parity in (0, 1):  # red sweep first, then black
        for a0 in (0, 1):
            b0 = (parity + a0) % 2
            centre = values[1 + a0 : ny - 1 : 2, 1 + b0 : nx - 1 : 2]
            if centre.size == 0:
                continue
            south = values[a0 : ny - 2 : 2, 1 + b0 : nx - 1 : 2]
            north = values[2 + a0 : ny : 2, 1 + b0 : nx - 1 : 2]
            west = values[1 + a0 : ny - 1 : 2, b0 : nx - 2 : 2]
            east = values[1 + a0 : ny - 1 : 2, 2 + b0 : nx : 2]
            sub = np.s_[a0::2, b0::2]
            den = denom[sub]
            blocks.append(
                (
                    centre,
                    south,
                    north,
                    west,
                    east,
                    w_south[sub] / den,
                    w_north[sub] / den,
                    w_west[sub] / den,
                    w_east[sub] / den,
                    omega * free[sub],
                )
            )

    last_update = math.inf
    for sweep in range(1, max_iterations + 1):
        last_update = 0.0
        for centre, south, north, west, east, ws, wn, ww, we, gain in blocks:
            delta = gain * (ws * south + wn * north + ww * west + we * east - centre)
            centre += delta
            last_update = max(last_update, float(delta.max()), -float(delta.min()))
        if boundary is BoundaryCondition.NEUMANN_ZERO:
            _mirror_open_edges(values, fixed)
        if last_update < tolerance_v:
            return sweep, last_update
    raise ConvergenceError(max_iterations, last_update, tolerance_v)


def _mirror_open_edges(values: np.ndarray, fixed: np.ndarray) -> None:
    """Zero-gradient closure: copy the adjacent interior line onto free edges."""
    for edge, inner in (
        (np.s_[0, :], np.s_[1, :]),
        (np.s_[-1, :], np.s_[-2, :]),
        (np.s_[:, 0], np.s_[:, 1]),
        (np.s_[:, -1], np.s_[:, -2]),
    ):
        free = ~fixed[edge]
        values[edge][free] = values[inner][free]


def _interface_weights(y_nodes: np.ndarray, x_count: int, dielectric: DielectricMap) -> tuple:
    """Per-node neighbour weights for div(eps grad V) = 0.

    Permittivity is constant on each grid cell (eps_above for cells whose
    centre has y > 0, eps_below otherwise); the stencil weight toward a
    neighbour is the mean of the two cell permittivities flanking that
    face. Shapes match the interior block ``values[1:-1, 1:-1]``.
    """
    eps_above = dielectric.relative_permittivity_above
    eps_below = dielectric.relative_permittivity_below
    cell_centres_y = (y_nodes[:-1] + y_nodes[1:]) / 2.0
    eps_column = np.where(cell_centres_y > 0.0, eps_above, eps_below)
    n_inner_y = len(y_nodes) - 2
    n_inner_x = x_count - 2
    eps_south = np.repeat(eps_column[:-1, None], n_inner_x, axis=1)
    eps_north = np.repeat(eps_column[1:, None], n_inner_x, axis=1)
    w_south = eps_south
    w_north = eps_north
    w_side = (eps_south + eps_north) / 2.0
    assert w_south.shape == (n_inner_y, n_inner_x)
    return w_south, w_north, w_side, w_side.copy()


def solve_potential(
    layout: ElectrodeLayout,
    dielectric: DielectricMap,
    spacing_um: float,
    tolerance_v: float,
    *,
    omega: float = 1.9,
    max_iterations: int = 200_000,
    initial: PotentialGrid | None = None,
) -> PotentialGrid:
    """Relax the electrode layout to a converged potential grid.

    Convergence means the largest node update in one full red-black sweep
    fell below ``tolerance_v``. The outer box is held at zero (the far
    boundary); electrode nodes are pinned to their potentials throughout.
    ``initial`` warm-starts from a previously converged (typically
    coarser) grid.

    Raises
    ------
    GeometryError
        If ``spacing_um > gap/20`` or the layout is invalid.
    ConvergenceError
        If ``max_iterations`` sweeps do not reach tolerance.
    """
    if spacing_um <= 0.0:
        raise GeometryError(f"spacing must be positive, got {spacing_um}")
    if spacing_um > layout.gap_um / 20.0:
        raise GeometryError(
            f"spacing {spacing_um} um too coarse: need <= gap/20 = {layout.gap_um / 20.0} um"
        )
    if tolerance_v <= 0.0:
        raise GeometryError(f"tolerance must be positive, got {tolerance_v}")

    x = _axis_nodes(layout.domain_extent_um[0], spacing_um)
    y = _axis_nodes(layout.domain_extent_um[1], spacing_um)
    values = np.zeros((len(y), len(x)))
    fixed = np.zeros_like(values, dtype=bool)

    fixed[0, :] = fixed[-1, :] = True
    fixed[:, 0] = fixed[:, -1] = True

    surface_row = int(np.argmin(np.abs(y)))
    half_gap = layout.gap_um / 2.0
    outer = half_gap + layout.electrode_width_um
    snap = spacing_um / 4.0
    left = (x >= -outer - snap) & (x <= -half_gap + snap)
    right = (x >= half_gap - snap) & (x <= outer + snap)
    values[surface_row, left] = layout.electrode_potentials_v[0]
    values[surface_row, right] = layout.electrode_potentials_v[1]
    fixed[surface_row, left | right] = True

    if initial is not None:
        values = np.where(fixed, values, _resample(initial, x, y))

    weights = _interface_weights(y, len(x), dielectric)
    iterations, last_update = _sor_relax(
        values, fixed, weights, BoundaryCondition.DIRICHLET_ZERO, omega, tolerance_v, max_iterations
    )
    return PotentialGrid(
        spacing_um=spacing_um,
        values=values,
        boundary_condition=BoundaryCondition.DIRICHLET_ZERO,
        x0_um=float(x[0]),
        y0_um=float(y[0]),
        fixed=fixed,
        iterations=iterations,
        last_update_v=last_update,
    )


def solve_parallel_plates(
    voltage_v: float,
    gap_um: float,
    spacing_um: float,
    tolerance_v: float = 1e-9,
    *,
    height_um: float | None = None,
    omega: float = 1.9,
    max_iterations: int = 200_000,
) -> PotentialGrid:
    """Plate electrodes on the full left/right walls, insulating top/bottom.

    The converged interior matches the analytic parallel-plate ramp; this
    is the geometric limit used to validate the relaxation core against
    :func:`uniform_field_oracle`.
    """
    if gap_um <= 0.0 or spacing_um <= 0.0:
        raise GeometryError("gap and spacing must be positive")
    nx = max(int(round(gap_um / spacing_um)) + 1, 3)
    ny = max(int(round((height_um or gap_um / 2.0) / spacing_um)) + 1, 3)
    values = np.zeros((ny, nx))
    fixed = np.zeros_like(values, dtype=bool)
    values[:, 0] = voltage_v / 2.0
    values[:, -1] = -voltage_v / 2.0
    fixed[:, 0] = fixed[:, -1] = True

    shape = (ny - 2, nx - 2)
    weights = tuple(np.ones(shape) for _ in range(4))
    iterations, last_update = _sor_relax(
        values, fixed, weights, BoundaryCondition.NEUMANN_ZERO, omega, tolerance_v, max_iterations
    )
    return PotentialGrid(
        spacing_um=spacing_um,
        values=values,
        boundary_condition=BoundaryCondition.NEUMANN_ZERO,
        x0_um=-gap_um / 2.0,
        y0_um=0.0,
        fixed=fixed,
        iterations=iterations,
        last_update_v=last_update,
    )


def _resample(grid: PotentialGrid, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear resample of a grid's potential onto new node coordinates."""
    gx = grid.x_coords_um
    gy = grid.y_coords_um
    xi = np.clip((x - gx[0]) / grid.spacing_um, 0.0, len(gx) - 1.0)
    yi = np.clip((y - gy[0]) / grid.spacing_um, 0.0, len(gy) - 1.0)
    jx = np.minimum(xi.astype(int), len(gx) - 2)
    iy = np.minimum(yi.astype(int), len(gy) - 2)
    fx = xi - jx
    fy = yi - iy
    v = grid.values
    top = v[np.ix_(iy, jx)] * (1 - fx) + v[np.ix_(iy, jx + 1)] * fx
    bottom = v[np.ix_(iy + 1, jx)] * (1 - fx) + v[np.ix_(iy + 1, jx + 1)] * fx
    return top * (1 - fy[:, None]) + bottom * fy[:, None]


def field_at(grid: PotentialGrid, point_um: tuple[float, float]) -> FieldVector:
    """Negated central-difference gradient at a point, in V/cm.

    The two gradient components are evaluated at the four nodes
    surrounding the point and blended bilinearly, which is exact for
    linear potentials. The point must stay at least one cell away from
    the grid edge so the stencil fits.
    """
    x, y = point_um
    h = grid.spacing_um
    ny, nx = grid.values.shape
    xi = (x - grid.x0_um) / h
    yi = (y - grid.y0_um) / h
    if not (1.0 <= xi <= nx - 2.0 and 1.0 <= yi <= ny - 2.0):
        raise GeometryError(f"probe point {point_um} um is outside the interior of the grid")

    j0 = min(int(xi), nx - 2)
    i0 = min(int(yi), ny - 2)
    fx = xi - j0
    fy = yi - i0

    v = grid.values
    ex = np.empty((2, 2))
    ey = np.empty((2, 2))
    for di in (0, 1):
        for dj in (0, 1):
            i, j = i0 + di, j0 + dj
            ex[di, dj] = -(v[i, j + 1] - v[i, j - 1]) / (2.0 * h)
            ey[di, dj] = -(v[i + 1, j] - v[i - 1, j]) / (2.0 * h)

    def blend(corner: np.ndarray) -> float:
        top = corner[0, 0] * (1 - fx) + corner[0, 1] * fx
        bottom = corner[1, 0] * (1 - fx) + corner[1, 1] * fx
        return float(top * (1 - fy) + bottom * fy)

    return FieldVector(
        e_parallel_v_per_cm=blend(ex) * V_PER_UM_TO_V_PER_CM,
        e_perpendicular_v_per_cm=blend(ey) * V_PER_UM_TO_V_PER_CM,
    )


def write_grid_csv(grid: PotentialGrid, path: str | Path) -> None:
    """Dump the potential as ``x_um,y_um,potential_v`` rows."""
    xs = grid.x_coords_um
    ys = grid.y_coords_um
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("x_um,y_um,potential_v\n")
        for i, y in enumerate(ys):
            for j, x in enumerate(xs):
                handle.write(f"{x:.17g},{y:.17g},{grid.values[i, j]:.17g}\n")
