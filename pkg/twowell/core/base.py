"""
TwoWell Core - Base Classes
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Tuple


class BaseReport(ABC):
    """Base class for diagnostic reports written as key=value text"""

    @abstractmethod
    def as_dict(self) -> Dict[str, object]:
        """Return the report entries in output order"""
        pass

    def to_lines(self) -> List[str]:
        """Render the report as line-oriented key=value text"""
        lines = []
        for key, value in self.as_dict().items():
            if isinstance(value, float):
                value = f"{value:.15g}"
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, (list, tuple)):
                value = ",".join(
                    f"{v:.15g}" if isinstance(v, float) else str(v) for v in value
                )
            lines.append(f"{key}={value}")
        return lines


class TwoWellError(Exception):
    """Base exception for TwoWell errors"""
    pass


class ConfigError(TwoWellError):
    """Invalid run configuration or config file"""
    pass


class DomainError(TwoWellError, ValueError):
    """Numeric argument outside the operation's domain"""
    pass


class DegenerateError(DomainError):
    """Well equals the identity, so no rank-one connection exists"""
    pass


class AdmissibilityError(DomainError):
    """Deformation gradient with det <= 0 on some cell"""

    def __init__(self, message: str, cell: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.cell = cell


class LensError(DomainError):
    """Lens volume constraint cannot be met at the requested diameter"""
    pass


class ShapeError(TwoWellError, ValueError):
    """Fields live on different grids"""
    pass


class GridIndexError(TwoWellError, IndexError):
    """Cell index outside the grid"""
    pass


class ResolutionError(TwoWellError):
    """Window too small or grid too coarse for the configuration"""
    pass


class ConvergenceError(TwoWellError):
    """Newton inversion failed on too many cells"""
    pass


class HypothesisError(TwoWellError):
    """Probe hypotheses violated or no good rhombus found"""
    pass


class FitError(TwoWellError):
    """Not enough data points for a scaling fit"""
    pass
