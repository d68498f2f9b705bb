"""
TwoWell Core - Elastic Relaxation and Scaling Sweeps
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
from scipy import stats

from .base import AdmissibilityError, ConfigError, FitError
from .construction import build_configuration, lens_diameter
from .fields import (
    EnergyBreakdown,
    GridSpec,
    ScalarField,
    VectorField,
    elastic_density,
    gradient_field,
    interface_length,
    total_energy,
)
from .logger import logger
from .matrixcore import WellPair, det2, nearest_rotation, well_projection
from ..utils.fileops import SweepCsv

STEP_RULES = ("bb", "armijo")


@dataclass
class RelaxConfig:
    """Gradient descent settings; the outermost vertex ring stays at v = id"""
    max_iters: int = 2000
    grad_tol: float = 1e-6
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    initial_step: float = 0.1
    max_failures: int = 60
    # "bb": Barzilai-Borwein trial steps; "armijo": last accepted step / shrink
    step_rule: str = "bb"

    def __post_init__(self):
        if self.step_rule not in STEP_RULES:
            raise ConfigError(
                f"step_rule must be one of {', '.join(STEP_RULES)}, got {self.step_rule!r}"
            )
        if not 0.0 < self.shrink < 1.0:
            raise ConfigError(f"shrink factor must lie in (0, 1), got {self.shrink}")
        if not 0.0 < self.sufficient_decrease <= 0.5:
            raise ConfigError(
                f"sufficient-decrease constant must lie in (0, 0.5], got {self.sufficient_decrease}"
            )
        if self.max_iters < 0 or self.max_failures < 1:
            raise ConfigError("max_iters must be >= 0 and max_failures >= 1")
        if not self.initial_step > 0:
            raise ConfigError("initial_step must be positive")


@dataclass
class RelaxResult:
    v_final: VectorField
    energy_trace: List[EnergyBreakdown]
    iterations: int
    converged: bool

    @property
    def final(self) -> EnergyBreakdown:
        return self.energy_trace[-1]


def _check_orientation(G: np.ndarray):
    bad = np.argwhere(det2(G) <= 0.0)
    if len(bad):
        cell = (int(bad[0][0]), int(bad[0][1]))
        raise AdmissibilityError(f"det grad v <= 0 on cell {cell}", cell=cell)


def _elastic_from_gradients(chi: ScalarField, G: np.ndarray, W: WellPair) -> float:
    return float(chi.grid.h ** 2 * np.sum(elastic_density(chi.values, G, W)))


def _vertex_gradient(chi: ScalarField, G: np.ndarray, W: WellPair) -> np.ndarray:
    # dE/dG = h^2 * 2 (G - Pi(G)) pulled back through the four-vertex stencil
    h = chi.grid.h
    inclusion = (chi.values > 0.5)[..., None, None]
    projection = np.where(inclusion, well_projection(G, W.F), nearest_rotation(G))
    P = 2.0 * h ** 2 * (G - projection)
    P0, P1 = P[..., 0], P[..., 1]

    n = chi.grid.n
    grad = np.zeros((n + 1, n + 1, 2))
    grad[:-1, :-1] += -(P0 + P1) / (2.0 * h)
    grad[1:, :-1] += (P0 - P1) / (2.0 * h)
    grad[:-1, 1:] += (-P0 + P1) / (2.0 * h)
    grad[1:, 1:] += (P0 + P1) / (2.0 * h)
    return grad


def elastic_gradient(chi: ScalarField, v: VectorField, W: WellPair) -> VectorField:
    """
    Per-vertex gradient of the discrete elastic energy.

    Uses d/dA dist^2(A, SO(2)W) = 2 (A - Pi(A)) with Pi the orbit projection.
    Raises AdmissibilityError naming the first cell with det grad v <= 0.
    """
    G = gradient_field(v)
    _check_orientation(G)
    return VectorField(v.grid, _vertex_gradient(chi, G, W))


def _breakdown(interface: float, elastic: float, mu: float) -> EnergyBreakdown:
    return EnergyBreakdown(interface=interface, elastic=elastic, mu=mu)


def relax(chi: ScalarField, v0: VectorField, W: WellPair,
          cfg: Optional[RelaxConfig] = None) -> RelaxResult:
    """
    Minimize the elastic energy over v at fixed chi.

    Gradient descent with Armijo backtracking; the trial step is the
    Barzilai-Borwein step (step_rule "bb") or the last accepted step grown by
    1/shrink (step_rule "armijo"). A trial step is rejected until det grad v > 0
    on every cell. Stops on grad_tol (sup of the vertex gradient per unit
    area), max_iters, or max_failures consecutive rejections (converged = False).
    """
    cfg = cfg or RelaxConfig()
    grid = v0.grid
    h2 = grid.h ** 2
    interface = interface_length(chi)
    mu = chi.mass

    free = np.zeros((grid.n + 1, grid.n + 1, 1))
    free[1:-1, 1:-1] = 1.0

    x = v0.values.copy()
    G = gradient_field(v0)
    _check_orientation(G)
    energy = _elastic_from_gradients(chi, G, W)
    grad = _vertex_gradient(chi, G, W) * free
    trace = [_breakdown(interface, energy, mu)]

    step = cfg.initial_step
    failures = 0
    iterations = 0
    converged = float(np.max(np.abs(grad))) / h2 <= cfg.grad_tol

    while not converged and iterations < cfg.max_iters:
        slope = float(np.sum(grad * grad))
        trial = x - step * grad
        trial_G = gradient_field(VectorField(grid, trial))
        if np.all(det2(trial_G) > 0.0):
            trial_energy = _elastic_from_gradients(chi, trial_G, W)
            accepted = trial_energy <= energy - cfg.sufficient_decrease * step * slope
        else:
            accepted = False

        if not accepted:
            failures += 1
            if failures >= cfg.max_failures:
                logger.warning(
                    f"relax: line search failed {failures} times in a row at iteration {iterations}"
                )
                break
            step *= cfg.shrink
            continue

        failures = 0
        iterations += 1
        new_grad = _vertex_gradient(chi, trial_G, W) * free
        if cfg.step_rule == "bb":
            s = trial - x
            y = new_grad - grad
            sy = float(np.sum(s * y))
            step = float(np.sum(s * s)) / sy if sy > 0 else cfg.initial_step
        else:
            step /= cfg.shrink

        x, G, energy, grad = trial, trial_G, trial_energy, new_grad
        trace.append(_breakdown(interface, energy, mu))
        converged = float(np.max(np.abs(grad))) / h2 <= cfg.grad_tol
        if iterations % 100 == 0:
            logger.debug(f"relax: iter={iterations} elastic={energy:.10g} step={step:.3g}")

    logger.info(
        f"relax: {iterations} iterations, elastic {trace[0].elastic:.6g} -> {energy:.6g}, "
        f"converged={converged}"
    )
    return RelaxResult(
        v_final=VectorField(grid, x),
        energy_trace=trace,
        iterations=iterations,
        converged=converged,
    )


@dataclass(frozen=True)
class GridPolicy:
    """
    Window per volume: L = 2.5 Rlen for lens volumes, 4 r for the disc of
    radius r below mu = 1, unless L is pinned.
    """
    n: int = 512
    L: Optional[float] = None
    rlen_factor: float = 1.0

    def grid_for(self, mu: float) -> GridSpec:
        if self.L is not None:
            return GridSpec(self.n, self.L)
        if mu <= 1.0:
            return GridSpec(self.n, 4.0 * math.sqrt(mu / math.pi))
        return GridSpec(self.n, 2.5 * lens_diameter(mu, self.rlen_factor))


@dataclass
class SweepRecord:
    """One CSV row: construction (relaxed=False) or relaxed energies at mu"""
    mu: float
    R: float
    T: float
    E_interface: float
    E_elastic: float
    E_total: float
    relaxed: bool
    converged: bool

    FIELDS = ("mu", "R", "T", "E_interface", "E_elastic", "E_total", "relaxed", "converged")

    def to_row(self) -> List[str]:
        return [
            f"{self.mu:.15g}", f"{self.R:.15g}", f"{self.T:.15g}",
            f"{self.E_interface:.15g}", f"{self.E_elastic:.15g}", f"{self.E_total:.15g}",
            "1" if self.relaxed else "0", "1" if self.converged else "0",
        ]

    @classmethod
    def from_row(cls, row: Sequence[str]) -> "SweepRecord":
        values = [float(x) for x in row[:6]]
        return cls(*values, relaxed=row[6] == "1", converged=row[7] == "1")


@dataclass
class RegimeFit:
    """Least-squares line log E = intercept + slope log mu"""
    slope: float
    intercept: float
    r2: float
    stderr: float
    ci_low: float
    ci_high: float
    count: int


@dataclass
class ScalingFit:
    small: Optional[RegimeFit]
    large: Optional[RegimeFit]
    records: List[SweepRecord] = field(default_factory=list)


def fit_power_law(mus: Sequence[float], energies: Sequence[float]) -> RegimeFit:
    """Fit E ~ mu^slope in log-log with a t-based 95 % interval on the slope"""
    mus = np.asarray(mus, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if len(mus) < 3:
        raise FitError(f"power-law fit needs >= 3 points, got {len(mus)}")
    if np.any(mus <= 0) or np.any(energies <= 0):
        raise FitError("power-law fit needs positive volumes and energies")

    result = stats.linregress(np.log(mus), np.log(energies))
    half = float(stats.t.ppf(0.975, len(mus) - 2) * result.stderr)
    return RegimeFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r2=float(result.rvalue ** 2),
        stderr=float(result.stderr),
        ci_low=float(result.slope - half),
        ci_high=float(result.slope + half),
        count=len(mus),
    )


def run_sweep_point(mu: float, W: WellPair, policy: GridPolicy, relax_fields: bool,
                    relax_cfg: Optional[RelaxConfig] = None) -> List[SweepRecord]:
    """Construction row at mu, plus the relaxed row when requested"""
    grid = policy.grid_for(mu)
    chi, v, lens, shear = build_configuration(mu, W, grid, policy.rlen_factor)
    energy = total_energy(chi, v, shear)
    if lens is None:
        R = T = 2.0 * math.sqrt(mu / math.pi)
    else:
        R, T = lens.Rlen, lens.T

    records = [SweepRecord(mu, R, T, energy.interface, energy.elastic, energy.total,
                           relaxed=False, converged=True)]
    if relax_fields:
        result = relax(chi, v, shear, relax_cfg)
        final = result.final
        records.append(SweepRecord(mu, R, T, final.interface, final.elastic, final.total,
                                   relaxed=True, converged=result.converged))
    return records


def _regime_fit(name: str, records: List[SweepRecord], inside: Callable[[float], bool],
                strict: Callable[[float], bool]) -> Optional[RegimeFit]:
    points = [r for r in records if inside(r.mu)]
    if not any(strict(r.mu) for r in points):
        return None
    if len(points) < 3:
        raise FitError(f"{name} regime has {len(points)} points, need >= 3")
    fit = fit_power_law([r.mu for r in points], [r.E_total for r in points])
    logger.info(f"sweep: {name} slope={fit.slope:.4f} r2={fit.r2:.5f} n={fit.count}")
    return fit


def fit_regimes(records: Iterable[SweepRecord], relaxed: bool = False) -> ScalingFit:
    """
    Fit mu <= 1 and mu >= 1 separately (mu = 1 belongs to both).

    A regime without points strictly inside it is skipped.
    """
    chosen = [r for r in records if r.relaxed == relaxed]
    chosen.sort(key=lambda r: r.mu)
    small = _regime_fit("small", chosen, lambda m: m <= 1.0, lambda m: m < 1.0)
    large = _regime_fit("large", chosen, lambda m: m >= 1.0, lambda m: m > 1.0)
    if small is None and large is None:
        raise FitError("sweep has no volumes on either side of mu = 1")
    return ScalingFit(small=small, large=large, records=chosen)


def scaling_sweep(mu_list: Sequence[float], W: WellPair, policy: Optional[GridPolicy] = None,
                  relax_fields: bool = False, relax_cfg: Optional[RelaxConfig] = None,
                  jobs: int = 1, csv_path: Optional[Path] = None,
                  provenance: Sequence[str] = ()) -> ScalingFit:
    """
    Build (and optionally relax) the configuration for every mu, then fit the
    two scaling regimes.

    Points run on up to `jobs` processes; rows are collected in submission
    order and flushed per point, so an interrupted sweep resumes by mu when the
    provenance header matches.
    """
    policy = policy or GridPolicy()
    mus = sorted(float(f"{m:.15g}") for m in mu_list)
    if not mus:
        raise FitError("empty volume list")

    sink = SweepCsv(csv_path, SweepRecord.FIELDS, provenance) if csv_path else None
    done = {}
    if sink is not None:
        for row in sink.resume():
            record = SweepRecord.from_row(row)
            done.setdefault(record.mu, []).append(record)
    todo = [mu for mu in mus if mu not in done]
    if done:
        logger.info(f"sweep: resuming, {len(done)} volumes already on disk")

    results = dict(done)
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_sweep_point, mu, W, policy, relax_fields, relax_cfg)
                       for mu in todo]
            for mu, future in zip(todo, futures):
                results[mu] = future.result()
                if sink is not None:
                    sink.append([r.to_row() for r in results[mu]])
                logger.info(f"sweep: mu={mu:.6g} done")
    else:
        for mu in todo:
            results[mu] = run_sweep_point(mu, W, policy, relax_fields, relax_cfg)
            if sink is not None:
                sink.append([r.to_row() for r in results[mu]])
            logger.info(f"sweep: mu={mu:.6g} done")

    records = [r for mu in mus for r in results[mu]]
    fit = fit_regimes(records, relaxed=relax_fields)
    fit.records = records
    return fit
