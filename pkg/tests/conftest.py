import pytest

from multistop import MarketModel, ProjectSpec, RewardFunction, solve_multiple


@pytest.fixture(scope="session")
def model():
    return MarketModel(alpha=0.05, sigma=0.20, r=0.10)


@pytest.fixture(scope="session")
def spec():
    return ProjectSpec(invest_cost=1.0, op_cost=0.1, lifetime=5.0, lead_time=1.0)


@pytest.fixture(scope="session")
def rf(model, spec):
    return RewardFunction(model, spec)


@pytest.fixture(scope="session")
def golden(rf):
    """Baseline scenario iterated for 50 rights."""
    return solve_multiple(rf, k_max=50, eps_target=1e-300)


@pytest.fixture(scope="session")
def solved(rf):
    return solve_multiple(rf)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) == "call":
                lines += [v for k, v in getattr(rep, "user_properties", []) if k == "criterion"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split("]")[0]):
            terminalreporter.write_line(line)
