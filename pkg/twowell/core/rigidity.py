"""
TwoWell Core - Rigidity Diagnostics
Good lines and rhombi, bad-set measure, local lower-bound ratio and the
covering-radius selection
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import ndimage

from .base import BaseReport, ConfigError, ConvergenceError, DomainError, HypothesisError
from .fields import (
    ScalarField,
    VectorField,
    _gradient_interpolator,
    ball_mask,
    elastic_density_field,
    elastic_energy_ball,
    gradient_field,
    interface_length,
    inverse_elastic_density,
    invert_points,
    nonsingular_points,
    pushforward_chi,
    segment_energy,
    segment_nodes,
)
from .logger import logger
from .matrixcore import WellPair, dist_so2, dist_well, rotation

RHO_SCAN = 64
MAX_BALLS = 100_000
DICHOTOMY_SLACK = 0.10


@dataclass
class RigidityConstants:
    """eta, eta0, delta, theta and alpha (defaults to delta / 4)"""
    eta: float = 0.01
    eta0: float = 0.01
    delta: float = 0.2
    theta: float = 0.1
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.alpha is None:
            self.alpha = self.delta / 4.0
        for name in ("eta", "eta0", "alpha"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.delta < 0.5:
            raise ConfigError(f"delta must lie in (0, 1/2), got {self.delta}")
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"theta must lie in (0, 1), got {self.theta}")
        if not self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")


class Ball(NamedTuple):
    center: np.ndarray
    radius: float

    def contains(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=float) - np.asarray(self.center, dtype=float)
        return np.hypot(P[..., 0], P[..., 1]) <= self.radius


@dataclass
class Rhombus:
    """Symmetric rhombus with center o and half-diagonals along e1 and e2"""
    center: np.ndarray
    half_long: float
    half_short: float

    @property
    def corners(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        o = np.asarray(self.center, dtype=float)
        a = o - np.array([self.half_long, 0.0])
        b = o + np.array([self.half_long, 0.0])
        c = o + np.array([0.0, self.half_short])
        d = o - np.array([0.0, self.half_short])
        return a, b, c, d

    def scaled(self, rho: float) -> "Rhombus":
        return Rhombus(self.center, rho * self.half_long, rho * self.half_short)

    def contains(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=float) - np.asarray(self.center, dtype=float)
        return np.abs(P[..., 0]) / self.half_long + np.abs(P[..., 1]) / self.half_short <= 1.0


def _pairs(corners):
    a, b, c, d = corners
    return [(a, b), (c, d), (a, c), (a, d), (b, c), (b, d)]


@dataclass
class LineSelection:
    """Scanned offsets, which of them avoid M and pass the energy quantile"""
    offsets: np.ndarray
    energies: np.ndarray
    avoids_M: np.ndarray
    threshold: float
    ball_energy: float

    @property
    def accepted(self) -> np.ndarray:
        return self.offsets[self.avoids_M & (self.energies <= self.threshold)]

    @property
    def fraction(self) -> float:
        return len(self.accepted) / len(self.offsets)


class _Probe:
    """Shared per-field data for the line and rhombus scans"""

    def __init__(self, chi: ScalarField, v: VectorField, W: WellPair, ball: Ball):
        self.chi, self.v, self.W, self.ball = chi, v, W, ball
        self.grid = chi.grid
        c = np.asarray(ball.center, dtype=float)
        if np.any(np.abs(c) + ball.radius > self.grid.L * (1.0 + 1e-12)):
            raise DomainError(f"probe ball {c.tolist()}, R={ball.radius:.6g} leaves the window")
        self.interp = _gradient_interpolator(v)
        self.blocked = ndimage.binary_dilation(chi.values > 0.5, structure=np.ones((3, 3), bool))
        self.ball_energy = elastic_energy_ball(chi, v, W, c, ball.radius)
        self._image = None

    def hits_M(self, x, y) -> bool:
        nodes, _ = segment_nodes(self.grid, x, y)
        idx = self.grid.cell_of(nodes)
        return bool(np.any(self.blocked[idx[:, 0], idx[:, 1]]))

    def energy(self, x, y) -> float:
        return segment_energy(self.chi, self.v, self.W, x, y, interpolator=self.interp)

    @property
    def image(self):
        """(chi_1 = chi o v^-1, its one-cell dilation), built on first use"""
        if self._image is None:
            chi1 = pushforward_chi(self.chi, self.v)
            blocked = ndimage.binary_dilation(chi1.values > 0.5, structure=np.ones((3, 3), bool))
            self._image = (chi1, blocked)
        return self._image

    def image_hits(self, vx, vy) -> bool:
        if not (self.grid.contains(vx) and self.grid.contains(vy)):
            return True
        _, blocked = self.image
        nodes, _ = segment_nodes(self.grid, vx, vy)
        idx = self.grid.cell_of(nodes)
        return bool(np.any(blocked[idx[:, 0], idx[:, 1]]))

    def inverse_energy_at(self, ys) -> np.ndarray:
        """Inverse density at image points ys"""
        chi1, _ = self.image
        xs, _, _ = invert_points(self.v, ys)
        G = self.interp(xs.reshape(-1, 2)).reshape(xs.shape[:-1] + (2, 2))
        return inverse_elastic_density(chi1.at(ys), G, self.W)

    def image_energy(self, vx, vy) -> float:
        if not (self.grid.contains(vx) and self.grid.contains(vy)):
            return float("inf")
        nodes, weight = segment_nodes(self.grid, vx, vy)
        if weight == 0.0:
            return 0.0
        return float(weight * np.sum(self.inverse_energy_at(nodes)))

    def inverse_ball_energy(self) -> float:
        center = self.v.evaluate(np.asarray(self.ball.center, dtype=float))
        mask = ball_mask(self.grid, center, self.ball.radius)
        ys = self.grid.center_points()[mask]
        if len(ys) == 0:
            return 0.0
        return float(self.grid.h ** 2 * np.sum(self.inverse_energy_at(ys)))


def _scan(probe: _Probe, starts: np.ndarray, ends: np.ndarray, offsets: np.ndarray,
          theta: float) -> LineSelection:
    energies = np.array([probe.energy(x, y) for x, y in zip(starts, ends)])
    avoids = np.array([not probe.hits_M(x, y) for x, y in zip(starts, ends)])
    threshold = float(np.quantile(energies, 1.0 - theta, method="lower"))
    return LineSelection(offsets, energies, avoids, threshold, probe.ball_energy)


def _offsets(half_range: float, h: float) -> np.ndarray:
    count = max(8, int(2.0 * half_range / h))
    return -half_range + (np.arange(count) + 0.5) * (2.0 * half_range / count)


def _probe_ball(chi: ScalarField, ball: Optional[Ball]) -> Ball:
    if ball is None:
        return Ball(np.zeros(2), 0.9 * chi.grid.L)
    return Ball(np.asarray(ball.center, dtype=float), float(ball.radius))


def good_horizontal_lines(chi: ScalarField, v: VectorField, W: WellPair, delta: float,
                          theta: float, ball: Optional[Ball] = None, m: float = 1.0,
                          probe: Optional[_Probe] = None) -> LineSelection:
    """
    Horizontal segments [(-l/2, r), (l/2, r)] around the ball center, l = R/m,
    r in (-delta l, delta l), that avoid M and lie in the best (1 - theta)
    energy fraction. An empty selection raises HypothesisError.
    """
    ball = _probe_ball(chi, ball)
    probe = probe or _Probe(chi, v, W, ball)
    ell = ball.radius / m
    c = np.asarray(ball.center, dtype=float)
    rs = _offsets(delta * ell, chi.grid.h)
    starts = c + np.stack([np.full_like(rs, -ell / 2.0), rs], axis=-1)
    ends = c + np.stack([np.full_like(rs, ell / 2.0), rs], axis=-1)
    selection = _scan(probe, starts, ends, rs, theta)
    if selection.fraction == 0.0:
        raise HypothesisError("no horizontal line avoids M with small energy; eta too large?")
    logger.debug(f"rigidity: horizontal acceptance {selection.fraction:.3f}")
    return selection


def good_vertical_lines(chi: ScalarField, v: VectorField, W: WellPair, delta: float,
                        theta: float, ball: Optional[Ball] = None, m: float = 1.0,
                        probe: Optional[_Probe] = None) -> LineSelection:
    """Vertical segments [(s, -delta l), (s, delta l)], s in (-l/2, l/2)"""
    ball = _probe_ball(chi, ball)
    probe = probe or _Probe(chi, v, W, ball)
    ell = ball.radius / m
    c = np.asarray(ball.center, dtype=float)
    ss = _offsets(ell / 2.0, chi.grid.h)
    starts = c + np.stack([ss, np.full_like(ss, -delta * ell)], axis=-1)
    ends = c + np.stack([ss, np.full_like(ss, delta * ell)], axis=-1)
    selection = _scan(probe, starts, ends, ss, theta)
    if selection.fraction == 0.0:
        raise HypothesisError("no vertical line avoids M with small energy; eta too large?")
    logger.debug(f"rigidity: vertical acceptance {selection.fraction:.3f}")
    return selection


def weighted_energy(chi: ScalarField, v: VectorField, W: WellPair, ball: Ball, x,
                    density: Optional[np.ndarray] = None) -> float:
    """
    integral over the ball of e_elast(z) / |z - x| dz.

    The cell containing x is replaced by its exact contribution
    e * 4 asinh(1) h for the singular weight.
    """
    grid = chi.grid
    if density is None:
        density = elastic_density_field(chi, v, W)
    x = np.asarray(x, dtype=float)
    mask = ball_mask(grid, ball.center, ball.radius)
    own = tuple(grid.cell_of(x))
    P = grid.center_points() - x
    dist = np.hypot(P[..., 0], P[..., 1])
    mask_far = mask.copy()
    mask_far[own] = False
    total = float(np.sum(density[mask_far] / dist[mask_far]) * grid.h ** 2)
    if mask[own]:
        total += float(density[own] * 4.0 * math.asinh(1.0) * grid.h)
    return total


def rigid_fit(points, images) -> Tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation Q and shift p with images ~ Q points + p"""
    X = np.asarray(points, dtype=float)
    Y = np.asarray(images, dtype=float)
    xbar, ybar = X.mean(axis=0), Y.mean(axis=0)
    H = (Y - ybar).T @ (X - xbar)
    Q = rotation(math.atan2(H[1, 0] - H[0, 1], H[0, 0] + H[1, 1]))
    return Q, ybar - Q @ xbar


@dataclass
class RhombusReport(BaseReport):
    """Corners, scan parameter and the item-by-item measurements of the chosen rhombus"""
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    rho: float
    rhombus: Rhombus
    segment_energies: List[float]
    intersects_M: List[bool]
    image_intersects: List[bool]
    image_energies: List[float]
    weighted_energy: float
    rigid_deviation: float
    distortions: List[float]
    max_length_distortion: float
    ball_energy: float
    inverse_ball_energy: float
    good_fraction: float
    radius: float
    eta: float

    def _ratio(self, value: float, scale: float) -> float:
        return value / scale if scale > 0 else 0.0

    @property
    def constants(self) -> Dict[str, float]:
        eps, R = self.ball_energy, self.radius
        return {
            "C_ii": self._ratio(max(self.segment_energies) * R, eps),
            "C_iii": self._ratio(self.weighted_energy * R, eps),
            "C_v": self._ratio(max(self.image_energies) * R, self.inverse_ball_energy),
            "C_vi": self._ratio(self.rigid_deviation, math.sqrt(eps) + math.sqrt(self.eta)),
            "C_vii": self._ratio(self.max_length_distortion * R, math.sqrt(eps)),
        }

    def as_dict(self) -> Dict[str, object]:
        entries = {
            "a": [float(t) for t in self.a],
            "b": [float(t) for t in self.b],
            "c": [float(t) for t in self.c],
            "d": [float(t) for t in self.d],
            "rho": self.rho,
            "segment_energies": [float(e) for e in self.segment_energies],
            "intersects_M": ["true" if f else "false" for f in self.intersects_M],
            "image_intersects": ["true" if f else "false" for f in self.image_intersects],
            "image_energies": [float(e) for e in self.image_energies],
            "weighted_energy": self.weighted_energy,
            "rigid_deviation": self.rigid_deviation,
            "distortions": [float(e) for e in self.distortions],
            "max_length_distortion": self.max_length_distortion,
            "ball_energy": self.ball_energy,
            "inverse_ball_energy": self.inverse_ball_energy,
            "good_fraction": self.good_fraction,
        }
        entries.update(self.constants)
        return entries


def small_set_hypothesis(chi: ScalarField, ball: Ball, eta: float) -> Tuple[float, float]:
    """
    Check |M & B_R| <= eta R^2 and Per(M; B_R) <= eta R.

    Returns (mass, perimeter); raises HypothesisError when either fails.
    """
    mask = ball_mask(chi.grid, ball.center, ball.radius)
    mass = float(chi.grid.h ** 2 * np.sum(chi.values[mask]))
    perimeter = interface_length(chi, ball=(ball.center, ball.radius))
    R = ball.radius
    if mass > eta * R ** 2:
        raise HypothesisError(f"|M & B_R| = {mass:.6g} exceeds eta R^2 = {eta * R ** 2:.6g}")
    if perimeter > eta * R:
        raise HypothesisError(f"Per(M; B_R) = {perimeter:.6g} exceeds eta R = {eta * R:.6g}")
    return mass, perimeter


def find_good_rhombus(chi: ScalarField, v: VectorField, W: WellPair, delta: float, m: float,
                      ball: Optional[Ball] = None, theta: float = 0.1, eta: float = 0.01,
                      rho_count: int = RHO_SCAN) -> RhombusReport:
    """
    Build the cross from accepted lines, scan homothetic rhombi rho in
    (1/4, 3/4) and return the fully good one with the smallest maximal
    segment energy, with all seven items measured.

    Items (ii) and (v) use the empirical (1 - theta) quantile over the scan;
    item (iii) needs every corner in a non-singular cell of the ball.
    """
    ball = _probe_ball(chi, ball)
    small_set_hypothesis(chi, ball, eta)
    probe = _Probe(chi, v, W, ball)
    ell = ball.radius / m

    horizontal = good_horizontal_lines(chi, v, W, delta, theta, ball, m, probe)
    vertical = good_vertical_lines(chi, v, W, delta, theta, ball, m, probe)
    r0 = float(horizontal.accepted[np.argmin(np.abs(horizontal.accepted))])
    s0 = float(vertical.accepted[np.argmin(np.abs(vertical.accepted))])
    cross = Rhombus(
        np.asarray(ball.center, dtype=float) + np.array([s0, r0]),
        ell / 2.0 - abs(s0),
        delta * ell - abs(r0),
    )

    density = elastic_density_field(chi, v, W)
    regular, _ = nonsingular_points(density, chi.grid, ball.center, ball.radius, theta)
    rhos = 0.25 + (np.arange(rho_count) + 0.5) * (0.5 / rho_count)
    rows = []
    for rho in rhos:
        T = cross.scaled(rho)
        pairs = _pairs(T.corners)
        images = [(v.evaluate(x), v.evaluate(y)) for x, y in pairs]
        a, b, c, d = T.corners
        cells = chi.grid.cell_of(np.array(T.corners))
        rows.append({
            "regular": bool(np.all(regular[cells[:, 0], cells[:, 1]])),
            "geometry": (np.hypot(*(a - b)) >= ell / 4.0
                         and np.hypot(*(c - d)) >= delta * ell / 4.0),
            "hits": [probe.hits_M(x, y) for x, y in pairs],
            "energies": [probe.energy(x, y) for x, y in pairs],
            "weighted": max(weighted_energy(chi, v, W, ball, x, density) for x in T.corners),
            "image_hits": [probe.image_hits(vx, vy) for vx, vy in images],
            "image_energies": [probe.image_energy(vx, vy) for vx, vy in images],
        })

    seg_max = np.array([max(r["energies"]) for r in rows])
    weighted = np.array([r["weighted"] for r in rows])
    image_max = np.array([max(r["image_energies"]) for r in rows])
    limits = {
        "ii": float(np.quantile(seg_max, 1.0 - theta, method="lower")),
        "v": float(np.quantile(image_max, 1.0 - theta, method="lower")),
    }

    failures = Counter()
    good = []
    for k, row in enumerate(rows):
        checks = {
            "geometry": row["geometry"],
            "i": not any(row["hits"]),
            "ii": seg_max[k] <= limits["ii"],
            "iii": row["regular"],
            "iv": not any(row["image_hits"]),
            "v": image_max[k] <= limits["v"],
        }
        failed = [name for name, ok in checks.items() if not ok]
        failures.update(failed)
        if not failed:
            good.append(k)

    if not good:
        worst, count = failures.most_common(1)[0]
        raise HypothesisError(
            f"no good rhombus among {rho_count} scales; item ({worst}) failed {count} times"
        )

    best = min(good, key=lambda k: (seg_max[k], k))
    rho = float(rhos[best])
    T = cross.scaled(rho)
    corners = T.corners
    pairs = _pairs(corners)

    distortions = []
    for x, y in pairs:
        length = float(np.hypot(*(y - x)))
        image_length = float(np.hypot(*(v.evaluate(y) - v.evaluate(x))))
        distortions.append(abs(1.0 - image_length / length))

    X = chi.grid.vertex_points()
    inside = T.contains(X)
    points = np.concatenate([X[inside], np.array(corners)])
    images = np.concatenate([v.values[inside], v.evaluate(np.array(corners))])
    Q, p = rigid_fit(points, images)
    deviation = max(float(np.hypot(*(v.evaluate(x) - Q @ x - p))) for x in corners)

    report = RhombusReport(
        a=corners[0], b=corners[1], c=corners[2], d=corners[3],
        rho=rho,
        rhombus=T,
        segment_energies=list(rows[best]["energies"]),
        intersects_M=list(rows[best]["hits"]),
        image_intersects=list(rows[best]["image_hits"]),
        image_energies=list(rows[best]["image_energies"]),
        weighted_energy=float(weighted[best]),
        rigid_deviation=deviation,
        distortions=distortions,
        max_length_distortion=max(distortions),
        ball_energy=probe.ball_energy,
        inverse_ball_energy=probe.inverse_ball_energy(),
        good_fraction=len(good) / rho_count,
        radius=ball.radius,
        eta=eta,
    )
    logger.info(
        f"rigidity: rho={rho:.4f} distortion={report.max_length_distortion:.3e} "
        f"good={report.good_fraction:.2f}"
    )
    return report


def bad_set_measure(chi: ScalarField, v: VectorField, W: WellPair, region) -> float:
    """Area of cells in region where grad v is strictly closer to SO(2)F than to SO(2)"""
    grid = chi.grid
    if isinstance(region, np.ndarray):
        mask = region.astype(bool)
        if mask.shape != (grid.n, grid.n):
            raise DomainError(f"region mask needs shape ({grid.n}, {grid.n})")
    else:
        mask = region.contains(grid.center_points())
    G = gradient_field(v)
    closer = dist_well(G, W.F) < dist_so2(G)
    return float(grid.h ** 2 * np.count_nonzero(closer & mask))


def lower_bound_ratio(chi: ScalarField, v: VectorField, W: WellPair, ball: Ball,
                      alpha: float, eta: float = 0.01) -> float:
    """
    E_elast[B_R] R^2 / |chi|_{L1(B_alpha R)}^2, refused with HypothesisError
    outside the small-set regime; inf when B_alpha R misses M.
    """
    small_set_hypothesis(chi, ball, eta)
    inner = ball_mask(chi.grid, ball.center, alpha * ball.radius)
    mass = float(chi.grid.h ** 2 * np.sum(chi.values[inner]))
    if mass == 0.0:
        return float('inf')
    energy = elastic_energy_ball(chi, v, W, ball.center, ball.radius)
    return energy * ball.radius ** 2 / mass ** 2


def _cap(mass: np.ndarray) -> np.ndarray:
    return np.minimum(1.0, np.power(np.maximum(mass, 1e-300), -1.0 / 3.0))


def _threshold_radius(mass: np.ndarray, eta0: float) -> np.ndarray:
    # smallest r with mass / r^2 <= eta0 * min(1, mass^(-1/3))
    return np.sqrt(mass / (eta0 * _cap(mass)))


@dataclass
class RadiusInfo:
    center: np.ndarray
    radius: float
    mass: float
    regime: str
    balance: float

    @property
    def dichotomy_ok(self) -> bool:
        return abs(self.balance - 1.0) <= DICHOTOMY_SLACK


def _support_points(chi: ScalarField) -> np.ndarray:
    return chi.grid.center_points()[chi.values > 0.5]


def _radius_from_distances(dist: np.ndarray, cell_area: float, eta0: float) -> Tuple[float, float]:
    d = np.sort(dist)
    mass = cell_area * np.arange(1, len(d) + 1)
    candidate = np.maximum(d, _threshold_radius(mass, eta0))
    upper = np.append(d[1:], np.inf)
    valid = candidate < upper
    # ties in distance: only the last of a run of equal distances is a real interval
    valid &= np.append(d[1:] > d[:-1], True)
    k = int(np.flatnonzero(valid)[np.argmin(candidate[valid])])
    return float(candidate[k]), float(mass[k])


def _radius_info(center: np.ndarray, radius: float, mass: float, eta0: float) -> RadiusInfo:
    regime = "area" if mass <= 1.0 else "volume"
    balance = mass / (eta0 * float(_cap(np.array(mass))) * radius ** 2)
    return RadiusInfo(center, radius, mass, regime, balance)


def covering_radius(chi: ScalarField, x, eta0: float) -> RadiusInfo:
    """
    Smallest r (cell resolution) with r^-2 |M & B_r(x)| <= eta0 min(1, |M & B_r(x)|^(-1/3)).

    x is snapped to the center of its cell. The regime is "area" when
    |M & B_R| <= 1 and "volume" otherwise; `balance` is the ratio of the two
    sides at R.
    """
    grid = chi.grid
    x = np.asarray(x, dtype=float)
    if not grid.contains(x) or chi.at(x) < 0.5:
        raise DomainError(f"covering radius needs x in M, got {x.tolist()}")
    if not eta0 > 0:
        raise DomainError(f"eta0 must be positive, got {eta0}")
    cell = grid.cell_of(x)
    center = -grid.L + grid.h * (cell + 0.5)
    support = _support_points(chi)
    dist = np.hypot(*(support - center).T)
    radius, mass = _radius_from_distances(dist, grid.h ** 2, eta0)
    return _radius_info(center, radius, mass, eta0)


def radius_bound(mu: float, eta0: float) -> float:
    """Uniform bound max(mu^(1/2), mu^(2/3)) / sqrt(eta0); mu^(2/3) once mu >= 1"""
    return max(math.sqrt(mu), mu ** (2.0 / 3.0)) / math.sqrt(eta0)


@dataclass
class CoveringReport(BaseReport):
    """Vitali selection: centers, radii, regimes and the checks on them"""
    centers: np.ndarray
    radii: np.ndarray
    regimes: List[str]
    balances: np.ndarray
    local_energies: np.ndarray
    disjoint: bool
    covers: bool
    mu: float
    eta0: float
    mass_sum_23: float = field(default=0.0)

    @property
    def chain_constant(self) -> float:
        """sum |M & B_Ri|^(2/3) / mu^(2/3)"""
        return self.mass_sum_23 / self.mu ** (2.0 / 3.0) if self.mu > 0 else 0.0

    @property
    def dichotomy_ok(self) -> bool:
        return bool(np.all(np.abs(self.balances - 1.0) <= DICHOTOMY_SLACK))

    @property
    def bound_ok(self) -> bool:
        return bool(np.all(self.radii <= radius_bound(self.mu, self.eta0) * (1.0 + 1e-12)))

    def rows(self) -> List[List[str]]:
        return [
            [str(i), f"{x[0]:.15g}", f"{x[1]:.15g}", f"{R:.15g}", regime, f"{E:.15g}"]
            for i, (x, R, regime, E) in enumerate(
                zip(self.centers, self.radii, self.regimes, self.local_energies)
            )
        ]

    def as_dict(self) -> Dict[str, object]:
        return {
            "balls": len(self.radii),
            "mu": self.mu,
            "eta0": self.eta0,
            "disjoint": self.disjoint,
            "covers": self.covers,
            "dichotomy_ok": self.dichotomy_ok,
            "radius_bound": radius_bound(self.mu, self.eta0),
            "max_radius": float(np.max(self.radii)) if len(self.radii) else 0.0,
            "bound_ok": self.bound_ok,
            "mass_sum_23": self.mass_sum_23,
            "chain_constant": self.chain_constant,
        }


def all_covering_radii(chi: ScalarField, eta0: float, chunk: int = 512) -> List[RadiusInfo]:
    """Covering radius at every cell of M"""
    grid = chi.grid
    support = _support_points(chi)
    infos = []
    for start in range(0, len(support), chunk):
        block = support[start:start + chunk]
        dists = np.hypot(block[:, None, 0] - support[None, :, 0],
                         block[:, None, 1] - support[None, :, 1])
        for x, dist in zip(block, dists):
            radius, mass = _radius_from_distances(dist, grid.h ** 2, eta0)
            infos.append(_radius_info(x, radius, mass, eta0))
    return infos


def vitali_cover(chi: ScalarField, eta0: float, v: Optional[VectorField] = None,
                 W: Optional[WellPair] = None, max_balls: int = MAX_BALLS) -> CoveringReport:
    """
    Greedy Vitali selection over the balls B_R(x), x in M.

    Candidates go by decreasing radius; a ball is kept when its 1/5-shrink is
    disjoint from every kept 1/5-shrink, and candidates already inside a kept
    B_R are skipped. Local energies are the interface length in B_R/5 plus the
    elastic energy there when v and W are given.
    """
    grid = chi.grid
    support = _support_points(chi)
    if len(support) == 0:
        raise DomainError("vitali cover needs a nonempty inclusion")

    infos = all_covering_radii(chi, eta0)
    order = sorted(range(len(infos)), key=lambda k: (-infos[k].radius, k))
    covered = np.zeros(len(support), dtype=bool)
    slack = grid.h * math.sqrt(2.0) / 2.0
    kept: List[RadiusInfo] = []

    for k in order:
        if np.all(covered):
            break
        info = infos[k]
        if covered[k]:
            continue
        ok = all(
            np.hypot(*(info.center - other.center)) >= (info.radius + other.radius) / 5.0
            for other in kept
        )
        if not ok:
            continue
        kept.append(info)
        if len(kept) > max_balls:
            raise ConvergenceError(f"vitali cover exceeded {max_balls} balls")
        covered |= np.hypot(*(support - info.center).T) <= info.radius + slack

    centers = np.array([info.center for info in kept])
    radii = np.array([info.radius for info in kept])
    disjoint = all(
        np.hypot(*(centers[i] - centers[j])) >= (radii[i] + radii[j]) / 5.0
        for i in range(len(kept)) for j in range(i)
    )

    local = []
    for info in kept:
        energy = interface_length(chi, ball=(info.center, info.radius / 5.0))
        if v is not None and W is not None:
            energy += elastic_energy_ball(chi, v, W, info.center, info.radius / 5.0)
        local.append(energy)

    mass_sum = sum(info.mass ** (2.0 / 3.0) for info in kept)
    report = CoveringReport(
        centers=centers,
        radii=radii,
        regimes=[info.regime for info in kept],
        balances=np.array([info.balance for info in kept]),
        local_energies=np.array(local),
        disjoint=disjoint,
        covers=bool(np.all(covered)),
        mu=chi.mass,
        eta0=eta0,
        mass_sum_23=float(mass_sum),
    )
    logger.info(f"cover: {len(kept)} balls, chain constant {report.chain_constant:.4f}")
    return report
