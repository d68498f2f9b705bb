"""
Pytest configuration
"""

import os
import sys
import tempfile
from pathlib import Path

import pytest

# Keep test logs out of the home directory
os.environ.setdefault("TWOWELL_LOG_DIR", tempfile.mkdtemp(prefix="twowell_logs_"))

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from twowell.core import GridSpec, GridPolicy, WellPair, build_configuration  # noqa: E402


@pytest.fixture
def well():
    """Default well diag(0.8, 1.25) in shear normal form"""
    return WellPair.from_lambda(0.8).normal_form()


@pytest.fixture
def diag_well():
    """diag(2, 0.5), the worked example of the matrix kernels"""
    return WellPair.from_lambda(2.0)


@pytest.fixture
def small_grid():
    return GridSpec(64, 1.0)


@pytest.fixture(scope="session")
def lens64():
    """Lens construction at mu = 64 on a 256 grid"""
    W = WellPair.from_lambda(0.8)
    grid = GridPolicy(n=256).grid_for(64.0)
    return build_configuration(64.0, W, grid)
