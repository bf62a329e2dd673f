import pytest

from roadbird import kernel
from roadbird.config import RunConfig, resolve_topology
from roadbird.fleet import FleetMix, VehicleClass
from roadbird.network import build_network, load_topology, parse_topology

BACKENDS = kernel.available()


@pytest.fixture(scope="session")
def dhaka_parts():
    return load_topology(resolve_topology("dhaka-like"))


def straight_road(length=100.0, width=7.5, strip=0.5, n_links=1):
    """Links 1..n in a row, one path through all of them."""
    nodes = "".join(f"{i} {i * length} 0\n" for i in range(1, n_links + 2))
    links = "".join(f"{i} {i} {i + 1} {length} {width}\n" for i in range(1, n_links + 1))
    path = "1 " + " ".join(str(i) for i in range(1, n_links + 1)) + "\n"
    return build_network(parse_topology(nodes, links, path), strip)


def single_class_mix(**overrides):
    """Mix whose only class is ``probe`` (10 m/s desired speed by default)."""
    spec = dict(name="probe", category="medium", share=100.0, length=4.0, width=1.6,
                max_speed=36.0, max_accel=1.5, desired_braking=-3.0, expected_leader_braking=-3.0)
    spec.update(overrides)
    return FleetMix(0, 100, 0, (VehicleClass(**spec),))


# one line per acceptance criterion, filled by test_acceptance and echoed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
