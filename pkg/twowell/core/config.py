"""
TwoWell Core - Configuration Management
"""

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .base import ConfigError
from .logger import logger
from .matrixcore import WellPair
from .minimizer import GridPolicy, RelaxConfig
from .rigidity import RigidityConstants
from ..utils.fileops import provenance_lines, read_report, write_report

TOOL_VERSION = "1.0.0"

COMMANDS = ("construct", "relax", "sweep", "rigidity", "cover")

# Run defaults; lambda applies only when neither lambda nor nu1 is given
DEFAULTS = {
    "lam": 0.8,
    "nu1": None,
    "grid_n": 512,
    "grid_L": None,
    "rlen_factor": 1.0,
    "eta": 0.01,
    "eta0": 0.01,
    "delta": 0.2,
    "theta": 0.1,
    "alpha": None,
    "jobs": 1,
    "seed": 0,
    "out": "./twowell_out",
    "relax": False,
    "max_iters": 2000,
    "grad_tol": 1e-6,
}

# Keys as written in config files and on the command line
ALIASES = {
    "lambda": "lam",
    "grid-n": "grid_n",
    "grid-l": "grid_L",
    "grid_l": "grid_L",
    "rlen-factor": "rlen_factor",
    "max-iters": "max_iters",
    "grad-tol": "grad_tol",
    "mu-min": "mu_min",
    "mu-max": "mu_max",
    "mu-list": "mu_list",
}

INT_KEYS = {"grid_n", "jobs", "seed", "max_iters", "points"}
BOOL_KEYS = {"relax"}
STR_KEYS = {"out", "command"}


def _canonical(key: str) -> str:
    key = key.strip()
    return ALIASES.get(key.lower(), ALIASES.get(key, key.replace("-", "_")))


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in STR_KEYS:
            return raw
        if raw.lower() in ("", "none", "auto"):
            return None
        if key in BOOL_KEYS:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if key in INT_KEYS:
            return int(raw)
        if key == "mu_list":
            return [float(x) for x in raw.split(",") if x.strip()]
        return float(raw)
    except ValueError:
        raise ConfigError(f"config key '{key}' has invalid value '{raw}'")


def load_config(path) -> Dict[str, object]:
    """Load a key=value config file into a dict of typed values"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        entries = read_report(path)
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"could not read config {path}: {e}")

    config = {}
    for key, raw in entries.items():
        name = _canonical(key)
        config[name] = _parse_value(name, raw)
    logger.debug(f"config: loaded {len(config)} keys from {path}")
    return config


def _format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.15g}"
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def save_config(config: Dict[str, object], path) -> bool:
    """Save configuration as key=value lines"""
    lines = []
    for key, value in config.items():
        name = "lambda" if key == "lam" else key
        lines.append(f"{name}={_format_value(value)}")
    ok, msg = write_report(path, lines)
    if not ok:
        logger.error(f"config: {msg}")
    return ok


@dataclass
class RunConfig:
    """Validated settings of one CLI run"""
    command: str
    mu_list: List[float] = field(default_factory=list)
    lam: Optional[float] = None
    nu1: Optional[float] = None
    grid_n: int = 512
    grid_L: Optional[float] = None
    rlen_factor: float = 1.0
    eta: float = 0.01
    eta0: float = 0.01
    delta: float = 0.2
    theta: float = 0.1
    alpha: Optional[float] = None
    jobs: int = 1
    seed: int = 0
    out: str = "./twowell_out"
    relax: bool = False
    max_iters: int = 2000
    grad_tol: float = 1e-6

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command '{self.command}'")
        if self.lam is not None and self.nu1 is not None:
            raise ConfigError("give exactly one of lambda and nu1")
        if self.lam is None and self.nu1 is None:
            self.lam = DEFAULTS["lam"]
        if self.lam is not None and (not self.lam > 0 or self.lam == 1.0):
            raise ConfigError(f"lambda must be positive and != 1, got {self.lam}")
        if self.nu1 is not None and not self.nu1 > 0:
            raise ConfigError(f"nu1 must be positive, got {self.nu1}")
        if self.alpha is None:
            self.alpha = self.delta / 4.0

        if not self.mu_list:
            raise ConfigError("no volume given; use --mu or --mu-min/--mu-max/--points")
        if any(not m > 0 for m in self.mu_list):
            raise ConfigError("volumes must be positive")
        if list(self.mu_list) != sorted(self.mu_list):
            raise ConfigError("mu list must be sorted ascending")
        if self.command != "sweep" and len(self.mu_list) != 1:
            raise ConfigError(f"'{self.command}' takes a single --mu")

        if self.grid_n < 8 or self.grid_n % 2:
            raise ConfigError(f"grid n must be even and >= 8, got {self.grid_n}")
        if self.grid_L is not None and not self.grid_L > 0:
            raise ConfigError(f"grid L must be positive, got {self.grid_L}")
        if not self.rlen_factor > 0:
            raise ConfigError(f"rlen factor must be positive, got {self.rlen_factor}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if self.max_iters < 0 or not self.grad_tol > 0:
            raise ConfigError("max_iters must be >= 0 and grad_tol positive")

        # constants are range-checked where they are consumed
        self.constants()

    @classmethod
    def from_sources(cls, command: str, file_values: Optional[Dict[str, object]] = None,
                     overrides: Optional[Dict[str, object]] = None) -> "RunConfig":
        """Merge defaults < config file < command-line overrides"""
        merged: Dict[str, object] = {}
        for source in (file_values or {}, overrides or {}):
            given = {_canonical(k) for k, v in source.items() if v is not None}
            if {"lam", "nu1"} <= given:
                raise ConfigError("give exactly one of lambda and nu1")
            for key, value in source.items():
                if value is None:
                    continue
                name = _canonical(key)
                if name in ("lam", "nu1"):
                    # the well is chosen as a whole by the latest source
                    merged.pop("lam", None)
                    merged.pop("nu1", None)
                merged[name] = value

        mus = _volumes(merged)
        known = {f.name for f in fields(cls)}
        unknown = sorted(k for k in merged if k not in known | {"mu", "mu_min", "mu_max", "points"})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {k: v for k, v in merged.items() if k in known and k not in ("command", "mu_list")}
        return cls(command=command, mu_list=mus, **kwargs)

    def well(self) -> WellPair:
        if self.nu1 is not None:
            return WellPair.from_shear(self.nu1)
        return WellPair.from_lambda(self.lam)

    def constants(self) -> RigidityConstants:
        return RigidityConstants(self.eta, self.eta0, self.delta, self.theta, self.alpha)

    def grid_policy(self) -> GridPolicy:
        return GridPolicy(self.grid_n, self.grid_L, self.rlen_factor)

    def relax_config(self) -> RelaxConfig:
        return RelaxConfig(max_iters=self.max_iters, grad_tol=self.grad_tol)

    @property
    def mu(self) -> float:
        return self.mu_list[0]

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def as_dict(self) -> Dict[str, object]:
        entries = {"version": TOOL_VERSION, "command": self.command}
        if self.nu1 is not None:
            entries["nu1"] = self.nu1
        else:
            entries["lambda"] = self.lam
        entries["mu"] = self.mu_list
        for key in ("grid_n", "grid_L", "rlen_factor", "eta", "eta0", "delta", "theta",
                    "alpha", "seed", "relax", "max_iters", "grad_tol"):
            entries[key] = getattr(self, key)
        return entries

    def provenance(self) -> List[str]:
        """'#' header lines echoing the config and tool version (jobs and out excluded)"""
        return provenance_lines({k: _format_value(v) for k, v in self.as_dict().items()})


def _volumes(merged: Dict[str, object]) -> List[float]:
    mu_list = merged.pop("mu_list", None)
    mu = merged.pop("mu", None)
    mu_min = merged.pop("mu_min", None)
    mu_max = merged.pop("mu_max", None)
    points = merged.pop("points", None)

    if mu_list is not None:
        return [float(m) for m in mu_list]
    if mu is not None:
        if isinstance(mu, (list, tuple)):
            return [float(m) for m in mu]
        return [float(mu)]
    if mu_min is None and mu_max is None:
        return []
    if mu_min is None or mu_max is None or points is None:
        raise ConfigError("--mu-min, --mu-max and --points go together")
    if not 0 < mu_min <= mu_max or points < 1:
        raise ConfigError(f"bad geometric range {mu_min}..{mu_max} with {points} points")
    if points == 1:
        return [float(mu_min)]
    return [float(f"{m:.15g}") for m in np.geomspace(mu_min, mu_max, int(points))]
