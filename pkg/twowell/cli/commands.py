"""
TwoWell CLI - Batch Commands
construct, relax, sweep, rigidity and cover runs with CSV and field artifacts
"""

import argparse
import logging
import math
import os
import sys
import traceback
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from ..core import (
    Ball,
    ConfigError,
    HypothesisError,
    LensError,
    ResolutionError,
    RunConfig,
    TOOL_VERSION,
    TwoWellError,
    admissibility_report,
    bad_set_measure,
    build_configuration,
    find_good_rhombus,
    load_config,
    logger,
    lower_bound_ratio,
    relax,
    scaling_sweep,
    set_console_level,
    total_energy,
    vitali_cover,
    write_field,
)
from ..utils import Colors, colored, tag, write_csv, write_report

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_RESOLUTION = 3
EXIT_HYPOTHESIS = 4

CONSTRUCT_FIELDS = ("mu", "n", "L", "h", "Rlen", "T", "rho", "nu1",
                    "E_interface", "E_elastic", "E_total",
                    "max_outside_deviation", "bilip", "admissible")
RELAX_FIELDS = ("iteration", "E_interface", "E_elastic", "E_total")
COVER_FIELDS = ("i", "x1", "x2", "R", "regime", "E_local")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.15g}"
    return str(value)


def _failing_module(error: BaseException) -> str:
    """Module where the exception was raised, e.g. 'construction'"""
    frames = traceback.extract_tb(error.__traceback__)
    if not frames:
        return "cli"
    return Path(frames[-1].filename).stem


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twowell",
        description="Two-well inclusion energies: constructions, relaxations, sweeps and probes",
    )
    parser.add_argument("command", choices=["construct", "relax", "sweep", "rigidity", "cover"])
    parser.add_argument("--version", action="version", version=f"twowell {TOOL_VERSION}")

    volume = parser.add_argument_group("volume")
    volume.add_argument("--mu", type=float, help="single inclusion volume")
    volume.add_argument("--mu-min", type=float, help="smallest volume of a geometric sweep")
    volume.add_argument("--mu-max", type=float, help="largest volume of a geometric sweep")
    volume.add_argument("--points", type=int, help="number of sweep volumes")

    well = parser.add_mutually_exclusive_group()
    well.add_argument("--lambda", dest="lam", type=float, help="diagonal well diag(lambda, 1/lambda)")
    well.add_argument("--nu1", type=float, help="shear well [[1, nu1], [0, 1]]")

    grid = parser.add_argument_group("grid")
    grid.add_argument("--grid-n", type=int, help="cells per side (even, default 512)")
    grid.add_argument("--grid-L", type=float, help="half-width of the window (default automatic)")
    grid.add_argument("--rlen-factor", type=float, help="lens diameter in units of mu^(2/3)")

    run = parser.add_argument_group("run")
    run.add_argument("--relax", action="store_true", default=None,
                     help="relax the elastic field after construction")
    run.add_argument("--max-iters", type=int, help="relaxation iteration cap")
    run.add_argument("--jobs", type=int, help="parallel sweep points")
    run.add_argument("--seed", type=int, help="seed for randomized probes")
    run.add_argument("--out", help="output directory")
    run.add_argument("--config", help="key=value config file (flags win)")
    run.add_argument("--verbose", action="store_true", help="log progress to stderr")

    probes = parser.add_argument_group("probe constants")
    for name in ("eta", "eta0", "delta", "theta", "alpha"):
        probes.add_argument(f"--{name}", type=float)
    return parser


class CommandHandler:
    """Dispatch a parsed run to its command"""

    def __init__(self):
        self.parser = build_parser()
        self.commands: Dict[str, Callable[[RunConfig], int]] = {
            "construct": self.cmd_construct,
            "relax": self.cmd_relax,
            "sweep": self.cmd_sweep,
            "rigidity": self.cmd_rigidity,
            "cover": self.cmd_cover,
        }

    def parse_config(self, argv: List[str]) -> RunConfig:
        """Parse flags and merge them over the config file"""
        args = self.parser.parse_args(argv)
        if args.verbose:
            set_console_level(logging.INFO)
        file_values = load_config(args.config) if args.config else {}
        overrides = {k: v for k, v in vars(args).items()
                     if k not in ("command", "config", "verbose")}
        return RunConfig.from_sources(args.command, file_values, overrides)

    def execute(self, argv: List[str]) -> int:
        """
        Run one command
        Returns the process exit code
        """
        try:
            config = self.parse_config(argv)
            config.out_dir.mkdir(parents=True, exist_ok=True)
            return self.commands[config.command](config)
        except ConfigError as e:
            return self._fail(e, EXIT_CONFIG)
        except (ResolutionError, LensError) as e:
            return self._fail(e, EXIT_RESOLUTION)
        except HypothesisError as e:
            return self._fail(e, EXIT_HYPOTHESIS)
        except (TwoWellError, OSError) as e:
            return self._fail(e, EXIT_FAILURE)

    def _fail(self, error: BaseException, code: int) -> int:
        module = _failing_module(error)
        logger.debug(f"{module}: {error}", exc_info=error)
        print(f"{tag('ERROR')} {module}: {error}", file=sys.stderr)
        return code

    def _write(self, result) -> None:
        ok, msg = result
        if not ok:
            raise OSError(msg)
        print(f"{tag('SUCCESS')} {colored(msg, Colors.DIM)}", file=sys.stderr)

    def _configuration(self, config: RunConfig):
        W = config.well()
        grid = config.grid_policy().grid_for(config.mu)
        chi, v, lens, shear = build_configuration(config.mu, W, grid, config.rlen_factor)
        return shear, chi, v, lens

    def cmd_construct(self, config: RunConfig) -> int:
        """Build the upper-bound configuration and certify it"""
        W, chi, v, lens = self._configuration(config)
        grid = chi.grid
        energy = total_energy(chi, v, W)
        report = admissibility_report(v, lens, W, seed=config.seed)

        if lens is None:
            Rlen = T = 2.0 * math.sqrt(config.mu / math.pi)
            rho = Rlen / 2.0
        else:
            Rlen, T, rho = lens.Rlen, lens.T, lens.rho
        row = [config.mu, grid.n, grid.L, grid.h, Rlen, T, rho, float(W.F[0, 1]),
               energy.interface, energy.elastic, energy.total,
               report.max_outside_deviation, report.bilip, report.admissible]

        out = config.out_dir
        self._write(write_csv(out / "construct.csv", CONSTRUCT_FIELDS,
                              [[_fmt(x) for x in row]], config.provenance()))
        write_field(out / "chi.field", chi)
        write_field(out / "v.field", v)
        self._write(write_report(out / "admissibility.txt",
                                 config.provenance() + report.to_lines()))

        print(f"E_interface={energy.interface:.15g} E_elastic={energy.elastic:.15g} "
              f"E_total={energy.total:.15g}")
        return EXIT_OK

    def cmd_relax(self, config: RunConfig) -> int:
        """Relax v at fixed chi from the construction"""
        W, chi, v, _ = self._configuration(config)
        result = relax(chi, v, W, config.relax_config())
        rows = [[str(i), _fmt(e.interface), _fmt(e.elastic), _fmt(e.total)]
                for i, e in enumerate(result.energy_trace)]

        out = config.out_dir
        self._write(write_csv(out / "relax.csv", RELAX_FIELDS, rows, config.provenance()))
        write_field(out / "v_relaxed.field", result.v_final)
        if not result.converged:
            logger.warning(f"relax: stopped after {result.iterations} iterations without converging")

        final = result.final
        print(f"E_elastic={final.elastic:.15g} E_total={final.total:.15g} "
              f"iterations={result.iterations} converged={_fmt(result.converged)}")
        return EXIT_OK

    def cmd_sweep(self, config: RunConfig) -> int:
        """Energy over the volume list and the two fitted slopes"""
        out = config.out_dir
        fit = scaling_sweep(
            config.mu_list, config.well(), config.grid_policy(),
            relax_fields=config.relax, relax_cfg=config.relax_config(),
            jobs=config.jobs, csv_path=out / "sweep.csv", provenance=config.provenance(),
        )

        lines = []
        for name, regime in (("small", fit.small), ("large", fit.large)):
            if regime is None:
                lines.append(f"slope_{name}=nan")
                continue
            lines += [
                f"slope_{name}={regime.slope:.15g}",
                f"intercept_{name}={regime.intercept:.15g}",
                f"r2_{name}={regime.r2:.15g}",
                f"ci_{name}={regime.ci_low:.15g},{regime.ci_high:.15g}",
                f"points_{name}={regime.count}",
            ]
        self._write(write_report(out / "fit.txt", config.provenance() + lines))

        def slope(regime) -> str:
            return "nan" if regime is None else f"{regime.slope:.6g}"

        def interval(regime) -> str:
            return "nan" if regime is None else f"[{regime.ci_low:.6g},{regime.ci_high:.6g}]"

        print(f"slope_small={slope(fit.small)} slope_large={slope(fit.large)}")
        print(f"ci95_small={interval(fit.small)} ci95_large={interval(fit.large)}")
        return EXIT_OK

    def cmd_rigidity(self, config: RunConfig) -> int:
        """Good rhombus above the inclusion, bad set inside it and the lower-bound ratio"""
        W, chi, v, lens = self._configuration(config)
        constants = config.constants()
        ball = probe_ball(chi.grid, lens, config.mu)

        report = find_good_rhombus(chi, v, W, constants.delta, 1.0, ball,
                                   constants.theta, constants.eta)
        bad = bad_set_measure(chi, v, W, report.rhombus)
        eps = report.ball_energy
        lines = config.provenance() + report.to_lines() + [
            f"probe_center={ball.center[0]:.15g},{ball.center[1]:.15g}",
            f"probe_radius={ball.radius:.15g}",
            f"bad_set_measure={bad:.15g}",
            f"bad_set_constant={(bad / math.sqrt(eps) if eps > 0 else 0.0):.15g}",
        ]

        center_ball = Ball(np.zeros(2), 0.95 * chi.grid.L)
        try:
            ratio = lower_bound_ratio(chi, v, W, center_ball, constants.alpha, constants.eta)
            lines.append(f"lower_bound_ratio={ratio:.15g}")
        except HypothesisError as e:
            logger.warning(f"rigidity: lower-bound ratio refused: {e}")
            lines += ["lower_bound_ratio=refused", f"lower_bound_reason={e}"]

        self._write(write_report(config.out_dir / "rigidity.txt", lines))
        print(f"max_length_distortion={report.max_length_distortion:.15g} "
              f"bad_set_measure={bad:.15g}")
        return EXIT_OK

    def cmd_cover(self, config: RunConfig) -> int:
        """Covering radii and the Vitali selection of the inclusion"""
        W, chi, v, _ = self._configuration(config)
        report = vitali_cover(chi, config.eta0, v, W)

        out = config.out_dir
        self._write(write_csv(out / "cover.csv", COVER_FIELDS, report.rows(),
                              config.provenance()))
        self._write(write_report(out / "cover.txt", config.provenance() + report.to_lines()))
        print(f"balls={len(report.radii)} disjoint={_fmt(report.disjoint)} "
              f"covers={_fmt(report.covers)} chain_constant={report.chain_constant:.6g}")
        return EXIT_OK


def probe_ball(grid, lens, mu: float) -> Ball:
    """Largest comfortable ball above the inclusion, two cells clear of it"""
    top = lens.T / 2.0 if lens is not None else math.sqrt(mu / math.pi)
    gap = 2.0 * grid.h
    radius = min(0.4 * grid.L, 0.98 * (grid.L - top - gap) / 2.0)
    if not radius > 4.0 * grid.h:
        raise ResolutionError(f"no room for a probe ball above the inclusion (L={grid.L:.6g})")
    return Ball(np.array([0.0, top + gap + radius]), radius)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the exit code"""
    if os.environ.get("NO_COLOR") or not sys.stderr.isatty():
        Colors.disable()
    try:
        return handler.execute(sys.argv[1:] if argv is None else list(argv))
    except SystemExit as e:
        # argparse usage errors
        return e.code if isinstance(e.code, int) else EXIT_CONFIG


# Global command handler
handler = CommandHandler()
