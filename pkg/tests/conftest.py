from fractions import Fraction

from hypothesis import HealthCheck, settings, strategies as st

from normalmarket.markets import TradingKind
from normalmarket.population import Atom, DemanderClass, PopulationSpec, SupplierClass, UniformSegment

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("default")


def small_fraction(lo: int, hi: int, den: int = 4):
    return st.integers(lo * den, hi * den).map(lambda k: Fraction(k, den))


def _split(draw, parts: int) -> list[Fraction]:
    """Positive masses on a 1/12 lattice summing to one."""
    cuts = sorted(draw(st.lists(st.integers(1, 11), min_size=parts - 1, max_size=parts - 1, unique=True)))
    edges = [0, *cuts, 12]
    return [Fraction(b - a, 12) for a, b in zip(edges, edges[1:])]


@st.composite
def trading_specs(draw, max_suppliers: int = 2, max_demanders: int = 3, max_value: int = 12) -> PopulationSpec:
    """Random trading markets with rational parameters and unit total masses."""
    n_s = draw(st.integers(1, max_suppliers))
    n_d = draw(st.integers(1, max_demanders))
    suppliers = []
    for mass in _split(draw, n_s):
        cap = draw(small_fraction(1, 4, 10).filter(lambda x: x > 0))
        if draw(st.booleans()):
            suppliers.append(SupplierClass(Atom(mass), h1=cap, v=cap, h0=draw(small_fraction(1, min(8, max_value), 4))))
        else:
            lo = draw(small_fraction(0, min(2, max_value - 1), 4))
            hi = lo + draw(small_fraction(1, 3, 4))
            suppliers.append(SupplierClass(UniformSegment(lo, hi, mass / (hi - lo)), h1=cap, v=cap))
    demanders = []
    values = draw(st.lists(small_fraction(1, max_value, 4), min_size=n_d, max_size=n_d, unique=True))
    for mass, value in zip(_split(draw, n_d), values):
        demanders.append(DemanderClass(Atom(mass), eta1=1, eta0=value))
    return PopulationSpec(tuple(suppliers), tuple(demanders), TradingKind())


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
