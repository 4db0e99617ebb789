import warnings

import pytest


@pytest.fixture(autouse=True)
def _quiet_coil_range():
    # Re-tuned fields above the 2 G coil range are legal and only warn.
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="magnetic field .* outside coil range")
        yield
