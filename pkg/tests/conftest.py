import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sosreg.calculus import FunctionHandle
from sosreg.exprlang import catalog_function


@pytest.fixture(scope="session")
def flat_exp_sq():
    return FunctionHandle.from_def(catalog_function("flat_exp_sq"))


@pytest.fixture(scope="session")
def flat_exp():
    return FunctionHandle.from_def(catalog_function("flat_exp"))


@pytest.fixture(scope="session")
def quartic_L():
    return FunctionHandle.from_def(catalog_function("quartic_L"))
