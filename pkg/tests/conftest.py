import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from precision_core import make_context  # noqa: E402
from zero_store import attach_zeta_prime, refine_table, seed_ordinates  # noqa: E402


@pytest.fixture(scope="session")
def first_zero_table():
    """Zero 1 refined to 60 digits with zeta' attached."""
    ctx = make_context(60)
    table = refine_table([14.134725141734694], 60, ctx, source="test")
    return attach_zeta_prime(table, ctx)


@pytest.fixture(scope="session")
def hundred_zeros_120():
    """The first 100 zeros at 120 digits, derivatives oversampled (desk experiment)."""
    ctx = make_context(120)
    table = refine_table(seed_ordinates(100), 120, ctx, source="test")
    return attach_zeta_prime(table, ctx)


@pytest.fixture(scope="session")
def fifty_zeros_40():
    ctx = make_context(40)
    table = refine_table(seed_ordinates(50), 40, ctx, source="test")
    return attach_zeta_prime(table, ctx)
