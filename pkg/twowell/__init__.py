"""
TwoWell Package
Version 1.0.0
"""

__version__ = "1.0.0"
__description__ = "Energy scaling of two-well elastic inclusions: constructions, relaxations and rigidity probes"

from .core import *
from .utils import *

__all__ = [
    '__version__',
    'Colors',
    'colored',
    'WellPair',
    'GridSpec',
    'build_configuration',
    'relax',
    'scaling_sweep',
    'find_good_rhombus',
    'vitali_cover',
    'RunConfig',
    'load_config',
    'save_config'
]
