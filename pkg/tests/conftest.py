import numpy as np
import pytest

import ivc


@pytest.fixture(scope="session")
def small_tube():
    """Straight 60 mm x r8 phantom at 1 mm: fast enough to share everywhere."""
    spec = ivc.PhantomSpec(preset="straight", length_mm=60.0, radius_mm=8.0, spacing_mm=1.0)
    return ivc.generate(spec)


@pytest.fixture(scope="session")
def small_art(small_tube):
    return ivc.build_artifacts(small_tube.volume, small_tube.seed_start, small_tube.seed_end)


@pytest.fixture(scope="session")
def polyp_tube():
    """Straight tube with one 4 mm-radius polyp at s=40, azimuth 90 degrees."""
    spec = ivc.PhantomSpec(
        preset="straight",
        length_mm=80.0,
        radius_mm=10.0,
        spacing_mm=1.0,
        polyps=(ivc.PolypSpec(s_mm=40.0, azimuth_deg=90.0, radius_mm=4.0),),
    )
    return ivc.generate(spec)


@pytest.fixture(scope="session")
def polyp_art(polyp_tube):
    return ivc.build_artifacts(polyp_tube.volume, polyp_tube.seed_start, polyp_tube.seed_end)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
