import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from isotorus import cli
from isotorus import frequency as fq
from isotorus.potential import LatticePotential, pushforward_periodic, random_potential

settings.register_profile("ci", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

TWO_FREQ = ["(sqrt(5)-1)/2", "sqrt(2)-1"]


@pytest.fixture(scope="session")
def two_freq():
    return fq.Frequency.parse(TWO_FREQ)


@pytest.fixture(scope="session")
def desk_V(two_freq):
    return random_potential(two_freq, 0.05, 1.0, support=3, seed=1)


@pytest.fixture(scope="session")
def desk_lattice(two_freq):
    return fq.build_lattice(fq.rational_approximation(two_freq, 10))


@pytest.fixture(scope="session")
def desk_lp(desk_V, desk_lattice):
    return pushforward_periodic(desk_V, desk_lattice)


@pytest.fixture(scope="session")
def mathieu():
    return LatticePotential.cosine(0.01)


ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


class DemoRuns:
    """Runs shipped demo configs through the CLI; the first run of each is cached."""

    def __init__(self, base):
        self.base = base
        self.first = {}
        self.count = 0

    def _run(self, name):
        path = CONFIGS / f"{name}.json"
        command = json.loads(path.read_text())["command"]
        self.count += 1
        out = self.base / f"{name}-{self.count}"
        code = cli.main([command, "--config", str(path), "--out", str(out)])
        return code, out

    def run(self, name):
        if name not in self.first:
            self.first[name] = self._run(name)
        return self.first[name]

    def rerun(self, name):
        return self._run(name)


@pytest.fixture(scope="session")
def demo_runs(tmp_path_factory):
    return DemoRuns(tmp_path_factory.mktemp("demos"))


ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance():
    def record(num, ok, detail):
        ACCEPTANCE[num] = (bool(ok), detail)
        print(f"criterion {num}: {'PASS' if ok else 'FAIL'} {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def desk_spec400(desk_lp, desk_lattice):
    """Desk spectrum through gap 400, enough to hold every coset with |m| <= 4."""
    from isotorus import hill
    return hill.label_gaps(hill.spectrum(desk_lp, 400, tol=1e-10), desk_lattice)
