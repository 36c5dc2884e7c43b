import math

import pytest

from cuspforge import (
    find_special_points,
    make_family,
    trace_singularity_curves,
)

PAPER_BOX = ((-math.pi / 2.0, 3.0 * math.pi / 2.0), (-8.0, 8.0))
NORMAL_BOX = ((-4.0, 4.0), (-4.0, 4.0))


@pytest.fixture(scope="session")
def exact_family():
    return make_family("rpr2pr_exact", a1=3.0, a2=7.0, b1=6.0, b2=5.0)


@pytest.fixture(scope="session")
def offset_family():
    return make_family("rpr2pr_offset", a1=3.0, a2=7.0, b1=6.0, b2=5.0, d=3.0)


@pytest.fixture(scope="session")
def square_family():
    return make_family("complex_square_unfolded", a=1.0, b=-1.0)


@pytest.fixture(scope="session")
def quarto_family():
    return make_family("quarto_unfolded", a=1.0, b=1.0)


@pytest.fixture(scope="session")
def exact_specials(exact_family):
    return find_special_points(exact_family, PAPER_BOX)


@pytest.fixture(scope="session")
def offset_specials(offset_family):
    return find_special_points(offset_family, PAPER_BOX)


@pytest.fixture(scope="session")
def exact_trace(exact_family, exact_specials):
    return trace_singularity_curves(exact_family, PAPER_BOX, specials=exact_specials)


@pytest.fixture(scope="session")
def offset_trace(offset_family, offset_specials):
    return trace_singularity_curves(offset_family, PAPER_BOX, specials=offset_specials)


@pytest.fixture(scope="session")
def square_trace(square_family):
    return trace_singularity_curves(square_family, NORMAL_BOX)


@pytest.fixture(scope="session")
def quarto_trace(quarto_family):
    return trace_singularity_curves(quarto_family, NORMAL_BOX)
