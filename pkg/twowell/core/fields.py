"""
TwoWell Core - Grid Fields
Phase indicator and deformation on a uniform grid, energies and inverse maps
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy import interpolate, signal
from scipy.spatial import cKDTree
from skimage import measure

from .base import (
    AdmissibilityError,
    ConvergenceError,
    DomainError,
    GridIndexError,
    ShapeError,
)
from .logger import logger
from .matrixcore import (
    Mat2,
    WellPair,
    det2,
    dist_right_well,
    dist_so2,
    dist_well,
)

NEWTON_MAX_ITERS = 50
INDETERMINATE_LIMIT = 1e-3
NODES_PER_CELL = 4


@dataclass(frozen=True)
class GridSpec:
    """Square window [-L, L]^2 split into n x n cells of side h = 2L/n"""
    n: int
    L: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise DomainError(f"grid needs an even cell count >= 8, got n={self.n}")
        if not (math.isfinite(self.L) and self.L > 0):
            raise DomainError(f"grid halfwidth must be positive, got L={self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    def vertex_coords(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n + 1)

    def cell_centers(self) -> np.ndarray:
        return -self.L + self.h * (np.arange(self.n) + 0.5)

    def vertex_points(self) -> np.ndarray:
        """(n+1, n+1, 2) vertex coordinates, first index along x1"""
        x = self.vertex_coords()
        X1, X2 = np.meshgrid(x, x, indexing='ij')
        return np.stack([X1, X2], axis=-1)

    def center_points(self) -> np.ndarray:
        """(n, n, 2) cell-center coordinates"""
        c = self.cell_centers()
        C1, C2 = np.meshgrid(c, c, indexing='ij')
        return np.stack([C1, C2], axis=-1)

    def cell_of(self, points) -> np.ndarray:
        """Integer cell indices (..., 2) of points, clipped to the grid"""
        points = np.asarray(points, dtype=float)
        idx = np.floor((points + self.L) / self.h).astype(int)
        return np.clip(idx, 0, self.n - 1)

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.all(np.abs(points) <= self.L * (1.0 + 1e-12), axis=-1)


@dataclass
class ScalarField:
    """Cell values of the phase indicator chi (or a relaxed diagnostic)"""
    grid: GridSpec
    values: np.ndarray
    exact_perimeter: Optional[float] = None
    indicator: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = self.grid.n
        if self.values.shape != (n, n):
            raise ShapeError(f"scalar field needs shape ({n}, {n}), got {self.values.shape}")
        if self.indicator and not np.all((self.values == 0.0) | (self.values == 1.0)):
            raise DomainError("indicator field must take values in {0, 1}")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros((grid.n, grid.n)), exact_perimeter=0.0)

    @classmethod
    def ones(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.ones((grid.n, grid.n)))

    @property
    def mass(self) -> float:
        """Volume h^2 * sum(chi)"""
        return float(self.grid.h ** 2 * np.sum(self.values))

    def at(self, points) -> np.ndarray:
        """Nearest-cell value at points"""
        idx = self.grid.cell_of(points)
        return self.values[idx[..., 0], idx[..., 1]]


@dataclass
class VectorField:
    """Vertex samples of a deformation v"""
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = self.grid.n
        if self.values.shape != (n + 1, n + 1, 2):
            raise ShapeError(
                f"vector field needs shape ({n + 1}, {n + 1}, 2), got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DomainError("vector field has non-finite samples")

    @classmethod
    def identity(cls, grid: GridSpec) -> "VectorField":
        return cls(grid, grid.vertex_points())

    @classmethod
    def affine(cls, grid: GridSpec, A, p=(0.0, 0.0)) -> "VectorField":
        """v(x) = A x + p"""
        X = grid.vertex_points()
        return cls(grid, X @ np.asarray(A, dtype=float).T + np.asarray(p, dtype=float))

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> "VectorField":
        """Sample func on (..., 2) point arrays"""
        return cls(grid, func(grid.vertex_points()))

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.values.copy())

    def evaluate(self, points) -> np.ndarray:
        """Bilinear interpolation of v at points (..., 2)"""
        value, _ = _bilinear(self, np.asarray(points, dtype=float))
        return value


@dataclass
class EnergyBreakdown:
    """Interface term, elastic term and their sum for a configuration of volume mu"""
    interface: float
    elastic: float
    mu: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.interface + self.elastic


def _check_same_grid(chi: ScalarField, v: VectorField):
    if chi.grid != v.grid:
        raise ShapeError(f"grid mismatch: chi on {chi.grid}, v on {v.grid}")


def gradient_field(v: VectorField) -> np.ndarray:
    """
    Cell-centered gradients, shape (n, n, 2, 2).

    G[i, j][k, l] = d v_k / d x_l from the four corner vertices; exact for
    affine maps.
    """
    V = v.values
    h = v.grid.h
    v00, v10 = V[:-1, :-1], V[1:, :-1]
    v01, v11 = V[:-1, 1:], V[1:, 1:]
    d1 = ((v10 - v00) + (v11 - v01)) / (2.0 * h)
    d2 = ((v01 - v00) + (v11 - v10)) / (2.0 * h)
    return np.stack([d1, d2], axis=-1)


def gradient(v: VectorField, cell: Tuple[int, int]) -> Mat2:
    """Gradient of v on one cell"""
    i, j = cell
    n = v.grid.n
    if not (0 <= i < n and 0 <= j < n):
        raise GridIndexError(f"cell {cell} outside the {n}x{n} grid")
    V = v.values
    h = v.grid.h
    d1 = ((V[i + 1, j] - V[i, j]) + (V[i + 1, j + 1] - V[i, j + 1])) / (2.0 * h)
    d2 = ((V[i, j + 1] - V[i, j]) + (V[i + 1, j + 1] - V[i + 1, j])) / (2.0 * h)
    return np.stack([d1, d2], axis=-1)


def elastic_density(chi_val, G, W: WellPair):
    """(1 - chi) dist^2(G, SO(2)) + chi dist^2(G, SO(2)F); broadcasts over cells"""
    chi_val = np.asarray(chi_val, dtype=float)
    parent = dist_so2(G) ** 2
    inclusion = dist_well(G, W.F) ** 2
    return (1.0 - chi_val) * parent + chi_val * inclusion


def inverse_elastic_density(chi_val, G, W: WellPair):
    """
    Density of the inverse map: distances of G^-1 to SO(2) and F^-1 SO(2).

    F^-1 SO(2) is the inverse of the orbit SO(2)F; since
    dist(G^-1, F^-1 SO(2)) = dist(G^-T, SO(2) F^-T), this is the left-orbit
    form SO(2)F^-1 read on transposes, as in inverse_distance_ratio.
    """
    chi_val = np.asarray(chi_val, dtype=float)
    dets = det2(G)
    if np.any(dets <= 0.0):
        raise AdmissibilityError("inverse density needs det G > 0")
    Ginv = np.linalg.inv(G)
    parent = dist_so2(Ginv) ** 2
    inclusion = dist_right_well(Ginv, W.Finv) ** 2
    return (1.0 - chi_val) * parent + chi_val * inclusion


def elastic_density_field(chi: ScalarField, v: VectorField, W: WellPair) -> np.ndarray:
    """Per-cell elastic density, shape (n, n)"""
    _check_same_grid(chi, v)
    return elastic_density(chi.values, gradient_field(v), W)


def interface_length(chi: ScalarField, ball: Optional[Tuple[np.ndarray, float]] = None) -> float:
    """
    Perimeter of {chi = 1}.

    Geometric fields carry their analytic perimeter; other masks use the
    marching-squares contour at level 1/2. With ball=(center, radius) only
    contour pieces whose midpoints lie in the ball are counted.
    """
    if ball is None and chi.exact_perimeter is not None:
        return float(chi.exact_perimeter)
    if not np.any(chi.values > 0.5):
        return 0.0

    grid = chi.grid
    padded = np.pad(chi.values, 1, mode='constant', constant_values=0.0)
    total = 0.0
    for contour in measure.find_contours(padded, 0.5):
        # contour rows are (i, j) in padded index space
        points = -grid.L + grid.h * (contour - 1.0 + 0.5)
        steps = np.diff(points, axis=0)
        lengths = np.hypot(steps[:, 0], steps[:, 1])
        if ball is not None:
            center, radius = ball
            mids = 0.5 * (points[1:] + points[:-1])
            inside = np.hypot(*(mids - np.asarray(center, dtype=float)).T) <= radius
            lengths = lengths[inside]
        total += float(np.sum(lengths))
    return total


def total_energy(chi: ScalarField, v: VectorField, W: WellPair) -> EnergyBreakdown:
    """Interface length plus integrated elastic density, with the volume of chi"""
    _check_same_grid(chi, v)
    density = elastic_density_field(chi, v, W)
    elastic = float(chi.grid.h ** 2 * np.sum(density))
    return EnergyBreakdown(
        interface=interface_length(chi),
        elastic=elastic,
        mu=chi.mass,
    )


def ball_mask(grid: GridSpec, center, radius: float) -> np.ndarray:
    """Cells whose centers lie in the closed ball"""
    P = grid.center_points() - np.asarray(center, dtype=float)
    return np.hypot(P[..., 0], P[..., 1]) <= radius


def elastic_energy_ball(chi: ScalarField, v: VectorField, W: WellPair,
                        center, radius: float) -> float:
    """Elastic energy over cells centered in B_radius(center)"""
    density = elastic_density_field(chi, v, W)
    mask = ball_mask(chi.grid, center, radius)
    return float(chi.grid.h ** 2 * np.sum(density[mask]))


def _gradient_interpolator(v: VectorField) -> interpolate.RegularGridInterpolator:
    c = v.grid.cell_centers()
    return interpolate.RegularGridInterpolator(
        (c, c), gradient_field(v), method='linear', bounds_error=False, fill_value=None
    )


def segment_nodes(grid: GridSpec, x, y,
                  per_cell: int = NODES_PER_CELL) -> Tuple[np.ndarray, float]:
    """Composite-midpoint nodes on [x, y] (>= per_cell per cell width) and the weight"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (grid.contains(x) and grid.contains(y)):
        raise DomainError(f"segment {x.tolist()} -> {y.tolist()} leaves the window")
    length = float(np.hypot(*(y - x)))
    count = max(per_cell, int(math.ceil(per_cell * length / grid.h)))
    t = (np.arange(count) + 0.5) / count
    return x + t[:, None] * (y - x), length / count


def segment_energy(chi: ScalarField, v: VectorField, W: WellPair, x, y,
                   interpolator=None, per_cell: int = NODES_PER_CELL) -> float:
    """
    Elastic energy along the segment [x, y] (1D Hausdorff measure).

    Gradients are bilinearly interpolated between cell centers, chi is taken
    from the nearest cell.
    """
    _check_same_grid(chi, v)
    nodes, weight = segment_nodes(chi.grid, x, y, per_cell)
    if weight == 0.0:
        return 0.0
    interpolator = interpolator or _gradient_interpolator(v)
    G = interpolator(nodes)
    return float(weight * np.sum(elastic_density(chi.at(nodes), G, W)))


def bilip_constant(v: VectorField) -> float:
    """
    max over cells of max(|grad v|_op, |grad v^-1|_op).

    A lower bound on the bi-Lipschitz constant of v.
    """
    G = gradient_field(v)
    dets = det2(G)
    bad = np.argwhere(dets <= 0.0)
    if len(bad):
        cell = (int(bad[0][0]), int(bad[0][1]))
        raise AdmissibilityError(
            f"det grad v <= 0 on {len(bad)} cells, first at {cell}", cell=cell
        )
    sv = np.linalg.svd(G, compute_uv=False)
    return float(max(np.max(sv[..., 0]), np.max(1.0 / sv[..., 1])))


def _bilinear(v: VectorField, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # value and Jacobian of the bilinear interpolant at points (..., 2)
    grid = v.grid
    idx = grid.cell_of(points)
    i, j = idx[..., 0], idx[..., 1]
    local = (points + grid.L) / grid.h - idx
    s, t = local[..., 0:1], local[..., 1:2]
    V = v.values
    v00, v10 = V[i, j], V[i + 1, j]
    v01, v11 = V[i, j + 1], V[i + 1, j + 1]
    value = (1 - s) * (1 - t) * v00 + s * (1 - t) * v10 + (1 - s) * t * v01 + s * t * v11
    d1 = ((1 - t) * (v10 - v00) + t * (v11 - v01)) / grid.h
    d2 = ((1 - s) * (v01 - v00) + s * (v11 - v10)) / grid.h
    return value, np.stack([d1, d2], axis=-1)


def invert_points(v: VectorField, ys, tol: float = 1e-10,
                  max_iters: int = NEWTON_MAX_ITERS) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Solve v(x) = y for each y by Newton iteration on the bilinear interpolant.

    Seeds come from the nearest deformed vertex. Returns (xs, converged,
    outside); `outside` marks targets whose iterate is pinned to the window
    boundary, i.e. points outside the image of the window.
    """
    grid = v.grid
    ys = np.asarray(ys, dtype=float)
    shape = ys.shape[:-1]
    ys = ys.reshape(-1, 2)

    tree = cKDTree(v.values.reshape(-1, 2))
    _, nearest = tree.query(ys)
    xs = grid.vertex_points().reshape(-1, 2)[nearest]

    converged = np.zeros(len(ys), dtype=bool)
    for _ in range(max_iters):
        active = ~converged
        if not np.any(active):
            break
        value, J = _bilinear(v, xs[active])
        residual = value - ys[active]
        done = np.hypot(residual[:, 0], residual[:, 1]) <= tol * grid.h
        dets = det2(J)
        step = np.zeros_like(residual)
        ok = np.abs(dets) > 0.0
        step[ok] = np.linalg.solve(J[ok], residual[ok][..., None])[..., 0]
        new_x = np.clip(xs[active] - step, -grid.L, grid.L)
        new_x[done] = xs[active][done]
        xs[active] = new_x
        converged[np.flatnonzero(active)[done]] = True

    outside = ~converged & np.any(np.abs(xs) >= grid.L * (1.0 - 1e-12), axis=-1)
    return xs.reshape(shape + (2,)), converged.reshape(shape), outside.reshape(shape)


def pushforward_chi(chi: ScalarField, v: VectorField) -> ScalarField:
    """
    Rasterize chi o v^-1 on the same grid by inverting v at every cell center.

    Targets outside the image of the window get 0; more than 0.1 % of cells
    failing Newton raises ConvergenceError.
    """
    _check_same_grid(chi, v)
    grid = chi.grid
    xs, converged, outside = invert_points(v, grid.center_points())
    values = chi.at(xs)
    values[~converged] = 0.0

    indeterminate = ~converged & ~outside
    count = int(np.sum(indeterminate))
    if count > INDETERMINATE_LIMIT * grid.n * grid.n:
        raise ConvergenceError(
            f"Newton inversion failed on {count} of {grid.n * grid.n} cells"
        )
    if count:
        logger.warning(f"pushforward: {count} boundary-indeterminate cells set to 0")
    return ScalarField(grid, values)


def disc_field(grid: GridSpec, radius: float, center=(0.0, 0.0)) -> ScalarField:
    """Indicator of a disc with its analytic perimeter"""
    mask = ball_mask(grid, center, radius)
    inside = bool(np.all(np.abs(np.asarray(center)) + radius <= grid.L))
    return ScalarField(
        grid,
        mask.astype(float),
        exact_perimeter=2.0 * math.pi * radius if inside else None,
    )


def singular_weight_kernel(grid: GridSpec, extent: int) -> np.ndarray:
    """
    Cell-integrated 1/|z| on a (2*extent+1)^2 stencil.

    The center cell uses the exact integral 4 h asinh(1) over a square of
    side h, divided by the cell area.
    """
    h = grid.h
    offsets = h * np.arange(-extent, extent + 1)
    Z1, Z2 = np.meshgrid(offsets, offsets, indexing='ij')
    r = np.hypot(Z1, Z2)
    kernel = np.divide(1.0, r, out=np.zeros_like(r), where=r > 0)
    kernel[extent, extent] = 4.0 * math.asinh(1.0) / h
    return kernel


def weighted_potential(density: np.ndarray, grid: GridSpec, mask: np.ndarray) -> np.ndarray:
    """x0 -> integral over mask of density(z) / |z - x0| dz, for every cell x0"""
    kernel = singular_weight_kernel(grid, grid.n)
    source = np.where(mask, density, 0.0) * grid.h ** 2
    full = signal.fftconvolve(source, kernel, mode='full')
    n = grid.n
    return full[n:2 * n, n:2 * n]


def nonsingular_points(density: np.ndarray, grid: GridSpec, center, radius: float,
                       theta: float) -> Tuple[np.ndarray, float]:
    """
    Cells of the ball where the singular-weighted energy is not exceptional.

    Keeps every cell of B_radius(center) whose potential is at most the ball
    average divided by theta, so at most a theta-fraction of the ball's cells
    is dropped; returns (mask, threshold).
    """
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    mask = ball_mask(grid, center, radius)
    if not np.any(mask):
        raise DomainError("ball contains no cell centers")
    potential = weighted_potential(density, grid, mask)
    threshold = float(np.mean(potential[mask])) / theta
    return mask & (potential <= threshold), threshold


def write_field(path, fld) -> None:
    """
    Dump a field as 'field <scalar|vector> n=<n> L=<L>' followed by
    row-major values at 15 significant digits (vector rows hold x1, x2 pairs).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(fld, ScalarField):
        kind, table = "scalar", fld.values
    elif isinstance(fld, VectorField):
        kind, table = "vector", fld.values.reshape(fld.grid.n + 1, -1)
    else:
        raise ShapeError(f"cannot dump {type(fld).__name__}")
    header = f"field {kind} n={fld.grid.n} L={fld.grid.L:.15g}"
    np.savetxt(path, table, fmt="%.15g", header=header, comments="")


def read_field(path):
    """Read a dump written by write_field"""
    path = Path(path)
    with open(path, encoding='utf-8') as f:
        header = f.readline().split()
    if len(header) != 4 or header[0] != "field" or header[1] not in ("scalar", "vector"):
        raise ShapeError(f"{path}: not a field dump")
    try:
        n = int(header[2].split("=", 1)[1])
        L = float(header[3].split("=", 1)[1])
    except (IndexError, ValueError) as e:
        raise ShapeError(f"{path}: malformed header ({e})")

    grid = GridSpec(n, L)
    table = np.loadtxt(path, skiprows=1, ndmin=2)
    if header[1] == "scalar":
        indicator = bool(np.all((table == 0.0) | (table == 1.0)))
        return ScalarField(grid, table, indicator=indicator)
    return VectorField(grid, table.reshape(n + 1, n + 1, 2))
