import pytest

from rayatlas.poly import Polynomial


# Cubic with one escaping critical point: z^3 + a z^2.  The non-escaping
# critical point 0 is superattracting, its component is fixed, and the
# restriction near that component is quadratic-like (d = 2).
CUBIC_A = 0.31629 - 1.92522j

# Quartic c z^2 + a z^3 + z^4 with c = 10^(1/3).  Two escaping critical
# points forming a complex conjugate pair; again d = 2 around the fixed
# component of 0.
QUARTIC_C = 10.0 ** (1.0 / 3.0)
QUARTIC_A = -1.64846


@pytest.fixture(scope="session")
def cubic():
    return Polynomial((0.0, 0.0, CUBIC_A, 1.0))


@pytest.fixture(scope="session")
def quartic():
    return Polynomial((0.0, 0.0, QUARTIC_C, QUARTIC_A, 1.0))


@pytest.fixture(scope="session")
def zsq():
    return Polynomial((0.0, 0.0, 1.0))
