#!/usr/bin/env python3
"""
Pytest configuration and fixtures for corrbin tests.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Add scripts directory to path
sys.path.insert(0, str(Path(__file__).parent.parent / "scripts"))

from bigraph import reference_graphs  # noqa: E402
from probcore import dsbs, hamming_distortion  # noqa: E402


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def dsbs_02():
    """DSBS with crossover 0.2."""
    return dsbs(0.2)


@pytest.fixture
def dsbs_025():
    """DSBS with crossover 0.25."""
    return dsbs(0.25)


@pytest.fixture
def hamming2():
    return hamming_distortion(2)


@pytest.fixture
def ref_graphs():
    """The 3x3 reference graphs keyed "complete", "cycle", "matching"."""
    return reference_graphs()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
