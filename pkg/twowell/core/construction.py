"""
TwoWell Core - Lens Construction
Explicit upper-bound configuration: thin lens inclusion, normal-fan
displacement and radial cutoff
"""

import math
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, stats

from .base import (
    AdmissibilityError,
    BaseReport,
    DomainError,
    LensError,
    ResolutionError,
)
from .fields import (
    GridSpec,
    ScalarField,
    VectorField,
    bilip_constant,
    disc_field,
    gradient_field,
)
from .logger import logger
from .matrixcore import WellPair, frobenius_norm

AREA_RTOL = 1e-8
MIN_CELLS_ACROSS_T = 8
DIAMETER_FLOOR = 1.25


def lens_area(Rlen: float, T: float) -> float:
    """Area of the lens of diameter Rlen and thickness T (two circular segments)"""
    rho = (Rlen ** 2 + T ** 2) / (4.0 * T)
    theta = math.atan2(Rlen / 2.0, rho - T / 2.0)
    return 2.0 * rho ** 2 * (theta - math.sin(theta) * math.cos(theta))


def lens_diameter(mu: float, rlen_factor: float = 1.0) -> float:
    """
    Rlen = rlen_factor * mu^(2/3), floored at 1.25 times the diameter of the
    disc of area mu so the volume constraint stays solvable near mu = 1.
    """
    floor = DIAMETER_FLOOR * 2.0 * math.sqrt(mu / math.pi)
    return max(rlen_factor * mu ** (2.0 / 3.0), floor)


@dataclass
class CutoffProfile:
    """omega = 1 on |x| <= R, 0 on |x| >= 2R, C^1 smoothstep in between"""
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise DomainError(f"cutoff radius must be positive, got {self.R}")

    def _s(self, r):
        return np.clip((np.asarray(r, dtype=float) - self.R) / self.R, 0.0, 1.0)

    def value(self, r):
        s = self._s(r)
        return 1.0 - (3.0 * s ** 2 - 2.0 * s ** 3)

    def derivative(self, r):
        s = self._s(r)
        return -(6.0 * s - 6.0 * s ** 2) / self.R

    @property
    def max_slope(self) -> float:
        """sup |omega'| = 1.5 / R"""
        return 1.5 / self.R


@dataclass
class LensConstruction:
    """Lens B_rho(x1) & B_rho(x2) of diameter Rlen and thickness T, centers on the x2-axis"""
    Rlen: float
    T: float
    rho: float
    centers: np.ndarray
    W: WellPair
    cutoff_R: float
    mu_target: float

    @property
    def d(self) -> float:
        """Distance of each arc center from the origin"""
        return self.rho - self.T / 2.0

    @property
    def half_angle(self) -> float:
        return math.atan2(self.Rlen / 2.0, self.d)

    @property
    def area(self) -> float:
        return lens_area(self.Rlen, self.T)

    @property
    def perimeter(self) -> float:
        return 4.0 * self.half_angle * self.rho

    @property
    def nu1(self) -> float:
        return float(self.W.F[0, 1])

    @property
    def cutoff(self) -> CutoffProfile:
        return CutoffProfile(self.cutoff_R)

    def contains(self, points) -> np.ndarray:
        """Closed lens membership for points (..., 2)"""
        P = np.asarray(points, dtype=float)
        lower = np.hypot(P[..., 0], P[..., 1] + self.d) <= self.rho
        upper = np.hypot(P[..., 0], P[..., 1] - self.d) <= self.rho
        return lower & upper


def solve_lens(mu: float, Rlen: float, W: Optional[WellPair] = None,
               cutoff_R: Optional[float] = None) -> LensConstruction:
    """Thickness T in (0, Rlen) with lens area exactly mu"""
    if not (mu > 0 and Rlen > 0):
        raise DomainError(f"need mu > 0 and Rlen > 0, got mu={mu}, Rlen={Rlen}")
    max_area = math.pi * Rlen ** 2 / 4.0
    if mu >= max_area:
        raise LensError(
            f"mu={mu:.6g} needs T >= Rlen at Rlen={Rlen:.6g}; "
            f"use Rlen > {2.0 * math.sqrt(mu / math.pi):.6g}"
        )

    T = optimize.brentq(
        lambda t: lens_area(Rlen, t) - mu,
        1e-9 * Rlen, Rlen * (1.0 - 1e-12),
        xtol=1e-15 * Rlen, rtol=4.0 * np.finfo(float).eps, maxiter=500,
    )
    if abs(lens_area(Rlen, T) - mu) > AREA_RTOL * mu:
        raise LensError(f"lens area solve did not reach rtol {AREA_RTOL}")

    rho = (Rlen ** 2 + T ** 2) / (4.0 * T)
    d = rho - T / 2.0
    W = (W or WellPair.from_lambda(0.8)).normal_form()
    return LensConstruction(
        Rlen=Rlen,
        T=T,
        rho=rho,
        centers=np.array([[0.0, -d], [0.0, d]]),
        W=W,
        cutoff_R=Rlen if cutoff_R is None else cutoff_R,
        mu_target=mu,
    )


def u0(x, lens: LensConstruction) -> np.ndarray:
    """
    Displacement of the construction: nu1 * x2 e1 inside the lens, the value at
    the foot point on each arc's normal fan, 0 in the lateral wedges.
    """
    X = np.asarray(x, dtype=float)
    x1, x2 = X[..., 0], X[..., 1]
    d, rho, theta = lens.d, lens.rho, lens.half_angle
    nu1 = lens.nu1

    out = np.zeros(X.shape)
    inside = lens.contains(X)
    out[..., 0] = np.where(inside, nu1 * x2, 0.0)

    # upper arc belongs to the circle around (0, -d)
    r_up = np.hypot(x1, x2 + d)
    fan_up = (~inside) & (r_up >= rho) & (np.abs(np.arctan2(x1, x2 + d)) <= theta)
    foot_up = -d + rho * (x2 + d) / np.where(r_up > 0, r_up, 1.0)
    out[..., 0] = np.where(fan_up, nu1 * foot_up, out[..., 0])

    r_lo = np.hypot(x1, x2 - d)
    fan_lo = (~inside) & (~fan_up) & (r_lo >= rho) & (np.abs(np.arctan2(x1, d - x2)) <= theta)
    foot_lo = d + rho * (x2 - d) / np.where(r_lo > 0, r_lo, 1.0)
    out[..., 0] = np.where(fan_lo, nu1 * foot_lo, out[..., 0])
    return out


def deformation(x, lens: LensConstruction) -> np.ndarray:
    """v(x) = x + omega_R(|x|) u0(x)"""
    X = np.asarray(x, dtype=float)
    omega = lens.cutoff.value(np.hypot(X[..., 0], X[..., 1]))
    return X + omega[..., None] * u0(X, lens)


class Configuration(NamedTuple):
    """Rasterized chi and v, the lens (None for discs) and the normal-form well of v"""
    chi: ScalarField
    v: VectorField
    lens: Optional[LensConstruction]
    well: WellPair


def build_configuration(mu: float, W: WellPair, grid: GridSpec,
                        rlen_factor: float = 1.0) -> Configuration:
    """
    Rasterize the upper-bound configuration of volume mu.

    mu <= 1 gives the disc of area mu with v = id; larger volumes get the lens
    of diameter lens_diameter(mu) with cutoff radius equal to that diameter.
    """
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")

    if mu <= 1.0:
        radius = math.sqrt(mu / math.pi)
        if grid.L < 2.0 * radius:
            raise ResolutionError(f"window L={grid.L:.6g} smaller than disc diameter {2 * radius:.6g}")
        if 2.0 * radius < MIN_CELLS_ACROSS_T * grid.h:
            raise ResolutionError(
                f"disc of radius {radius:.6g} spans fewer than {MIN_CELLS_ACROSS_T} cells (h={grid.h:.6g})"
            )
        logger.info(f"construction: mu={mu:.6g} ball branch, radius={radius:.6g}")
        return Configuration(disc_field(grid, radius), VectorField.identity(grid), None,
                             W.normal_form())

    lens = solve_lens(mu, lens_diameter(mu, rlen_factor), W)
    if grid.L < 2.0 * lens.cutoff_R:
        raise ResolutionError(
            f"window L={grid.L:.6g} must be >= 2*cutoff_R={2 * lens.cutoff_R:.6g}"
        )
    if lens.T < MIN_CELLS_ACROSS_T * grid.h:
        raise ResolutionError(
            f"lens thickness T={lens.T:.6g} spans {lens.T / grid.h:.2f} cells, need {MIN_CELLS_ACROSS_T}"
        )

    inside = lens.contains(grid.center_points())
    chi = ScalarField(grid, inside.astype(float), exact_perimeter=lens.perimeter)
    v = VectorField.from_function(grid, lambda X: deformation(X, lens))
    logger.info(
        f"construction: mu={mu:.6g} Rlen={lens.Rlen:.6g} T={lens.T:.6g} rho={lens.rho:.6g}"
    )
    return Configuration(chi, v, lens, lens.W)


def outside_lens_cells(grid: GridSpec, lens: Optional[LensConstruction]) -> np.ndarray:
    """Cells whose four vertices all lie outside the lens"""
    if lens is None:
        return np.ones((grid.n, grid.n), dtype=bool)
    out = ~lens.contains(grid.vertex_points())
    return out[:-1, :-1] & out[1:, :-1] & out[:-1, 1:] & out[1:, 1:]


@dataclass
class AdmissibilityReport(BaseReport):
    """Gradient, bi-Lipschitz and injectivity checks of a constructed field"""
    max_outside_deviation: float
    deviation_constant: float
    bilip: float
    u0_gradient_constant: float
    injectivity_pairs: int
    min_stretch: float
    collisions: int
    admissible: bool
    offending_cell: Optional[Tuple[int, int]] = None

    def as_dict(self) -> Dict[str, object]:
        cell = self.offending_cell
        return {
            "max_outside_deviation": self.max_outside_deviation,
            "deviation_constant": self.deviation_constant,
            "bilip": self.bilip,
            "u0_gradient_constant": self.u0_gradient_constant,
            "injectivity_pairs": self.injectivity_pairs,
            "min_stretch": self.min_stretch,
            "collisions": self.collisions,
            "admissible": self.admissible,
            "offending_cell": "none" if cell is None else f"{cell[0]}:{cell[1]}",
        }


def _injectivity_check(v: VectorField, pairs: int, seed: int):
    """Sampled pairs with |x - y| > h: smallest stretch and the first collision point"""
    grid = v.grid
    rng = np.random.default_rng(seed)
    x = rng.uniform(-grid.L, grid.L, size=(pairs, 2))
    # half the pairs are global, half are within a few cells
    y = rng.uniform(-grid.L, grid.L, size=(pairs, 2))
    local = pairs // 2
    y[:local] = np.clip(x[:local] + rng.uniform(-3 * grid.h, 3 * grid.h, size=(local, 2)),
                        -grid.L, grid.L)
    dx = np.hypot(*(x - y).T)
    dv = np.hypot(*(v.evaluate(x) - v.evaluate(y)).T)
    keep = dx > grid.h
    if not np.any(keep):
        return 1.0, 0, None
    hits = np.flatnonzero(keep & (dv <= 1e-9 * grid.h))
    first = None if len(hits) == 0 else x[hits[0]]
    return float(np.min(dv[keep] / dx[keep])), len(hits), first


def admissibility_report(v: VectorField, lens: Optional[LensConstruction], W: WellPair,
                         pairs: int = 10_000, seed: int = 0) -> AdmissibilityReport:
    """
    Certify a constructed field: max |grad v - Id| outside the lens against
    |F| mu^(-1/3), the bi-Lipschitz constant, a sampled injectivity check and
    the outside gradient against T / Rlen.
    """
    grid = v.grid
    G = gradient_field(v)
    outside = outside_lens_cells(grid, lens)
    max_dev = float(np.max(np.where(outside, frobenius_norm(G - np.eye(2)), 0.0)))

    offending = None
    admissible = True
    try:
        m = bilip_constant(v)
    except AdmissibilityError as e:
        m = float('inf')
        admissible = False
        offending = e.cell
        logger.warning(f"admissibility: {e}")

    min_stretch, collisions, first = _injectivity_check(v, pairs, seed)
    if collisions:
        admissible = False
        if offending is None:
            cell = grid.cell_of(first)
            offending = (int(cell[0]), int(cell[1]))
        logger.warning(f"admissibility: {collisions} sampled pairs collide")

    dev_const = u0_const = 0.0
    if lens is not None:
        scale = float(frobenius_norm(W.F)) * lens.mu_target ** (-1.0 / 3.0)
        dev_const = max_dev / scale
        u0_const = max_dev * lens.Rlen / lens.T

    return AdmissibilityReport(
        max_outside_deviation=max_dev,
        deviation_constant=dev_const,
        bilip=m,
        u0_gradient_constant=u0_const,
        injectivity_pairs=pairs,
        min_stretch=min_stretch,
        collisions=collisions,
        admissible=admissible,
        offending_cell=offending,
    )


@dataclass
class DecompositionFit:
    """interface ~ a + b * Rlen and elastic ~ c * T^2 with worst relative residuals"""
    a: float
    b: float
    c: float
    interface_residual: float
    elastic_residual: float


def fit_energy_decomposition(Rlens: Sequence[float], Ts: Sequence[float],
                             interfaces: Sequence[float],
                             elastics: Sequence[float]) -> DecompositionFit:
    """Fit the interface term linearly in Rlen and the elastic term by c T^2"""
    R = np.asarray(Rlens, dtype=float)
    T = np.asarray(Ts, dtype=float)
    E_int = np.asarray(interfaces, dtype=float)
    E_el = np.asarray(elastics, dtype=float)
    if len(R) < 2:
        raise DomainError("decomposition fit needs at least two diameters")

    line = stats.linregress(R, E_int)
    c = float(np.sum(E_el * T ** 2) / np.sum(T ** 4))
    pred_int = line.intercept + line.slope * R
    pred_el = c * T ** 2
    return DecompositionFit(
        a=float(line.intercept),
        b=float(line.slope),
        c=c,
        interface_residual=float(np.max(np.abs(pred_int - E_int) / E_int)),
        elastic_residual=float(np.max(np.abs(pred_el - E_el) / E_el)),
    )
