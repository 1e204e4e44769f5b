import pytest

from elsa.inference import GridSpec, ScenarioParams
from elsa.model import Location, Region

CORNERS3 = (Location(0.0, 0.0), Location(0.0, 100.0), Location(100.0, 0.0))
AREA = Region(0.0, 100.0, 0.0, 100.0)


@pytest.fixture
def defaults():
    return ScenarioParams()


@pytest.fixture
def grid1m():
    return GridSpec(AREA, 1.0)


def gaussian_logpdf_oracle(x, mean, var):
    import mpmath as mp
    mp.mp.dps = 50
    x, mean, var = mp.mpf(x), mp.mpf(mean), mp.mpf(var)
    return float(-mp.log(mp.sqrt(2 * mp.pi * var)) - (x - mean) ** 2 / (2 * var))


def _tail(z):
    """P(U >= z) for z >= 0: phi(z) * integral_0^inf exp(-z s - s^2 / 2) ds, by quadrature."""
    import mpmath as mp
    phi = mp.exp(-z * z / 2) / mp.sqrt(2 * mp.pi)
    return phi * mp.quad(lambda s: mp.exp(-z * s - s * s / 2), [0, 1, mp.inf])


def upper_tail_oracle(lam, mean, sd):
    """P(N(mean, sd^2) >= lam) by numerical integration of the density."""
    import mpmath as mp
    mp.mp.dps = 40
    z = (mp.mpf(lam) - mp.mpf(mean)) / mp.mpf(sd)
    return float(_tail(z) if z >= 0 else 1 - _tail(-z))


def lower_tail_oracle(lam, mean, sd):
    """P(N(mean, sd^2) < lam) as an mpf, integrated on the small side; can be below double range."""
    import mpmath as mp
    mp.mp.dps = 40
    z = (mp.mpf(lam) - mp.mpf(mean)) / mp.mpf(sd)
    return _tail(-z) if z <= 0 else 1 - _tail(z)


from hypothesis import settings  # noqa: E402

settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")
