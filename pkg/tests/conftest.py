import os

import numpy as np
import pytest

from chambercut.oracle import IDENTITY_MONITOR, IDENTITY_RTOL


_CRITERIA: dict = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _CRITERIA.setdefault(m.args[0], {"title": m.args[1], "outcomes": []})
    if os.environ.get("CHAMBERCUT_EXTENDED") == "1":
        return
    skip = pytest.mark.skip(reason="extended suite; set CHAMBERCUT_EXTENDED=1")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None or (rep.when != "call" and not (rep.failed or rep.skipped)):
        return
    if hasattr(rep, "wasxfail"):
        state = "XFAIL" if rep.skipped else "XPASS"
    else:
        state = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
    _CRITERIA[m.args[0]]["outcomes"].append((item.name, state))


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion.

    A criterion passes when all of its tests pass; strict xfails document
    known-unattainable sub-claims and do not fail it.  Skipped means not run.
    """
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        c = _CRITERIA[n]
        states = [s for _, s in c["outcomes"]]
        if not states:
            verdict = "NOT RUN"
        elif any(s in ("FAIL", "XPASS") for s in states):
            verdict = "FAIL"
        elif all(s == "SKIP" for s in states):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        notes = ", ".join(f"{name}={s}" for name, s in c["outcomes"] if s != "PASS")
        tr.write_line(f"criterion {n:2d} {verdict:7s} {c['title']}" + (f"  [{notes}]" if notes else ""))


@pytest.fixture(autouse=True)
def identity_check():
    """Every oracle call made by a test must satisfy b . grad log h = -sum s_j."""
    IDENTITY_MONITOR.reset()
    yield IDENTITY_MONITOR
    assert IDENTITY_MONITOR.worst < IDENTITY_RTOL, IDENTITY_MONITOR.violations[:3]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- shared expensive objects -------------------------------------------------

@pytest.fixture(scope="session")
def quad_fixture():
    from chambercut.fixtures import quadratic
    return quadratic()


@pytest.fixture(scope="session")
def quad_pws(quad_fixture):
    from chambercut.pwitness import initial_pseudo_witness
    return initial_pseudo_witness(quad_fixture.system, rng=np.random.default_rng(7))


@pytest.fixture(scope="session")
def quad_oracle(quad_pws):
    from chambercut.oracle import LineOracle
    return LineOracle(quad_pws, rng=np.random.default_rng(8))


@pytest.fixture(scope="session")
def quad_explicit_rf(quad_fixture):
    from chambercut.routing import ExplicitBackend, build_routing
    return build_routing(ExplicitBackend(quad_fixture.explicit_h), (13.0, 2.0), 2)


@pytest.fixture(scope="session")
def quad_explicit_run():
    """Full explicit-mode region run on the quadratic discriminant."""
    from chambercut.pipeline import JobSpec, run_regions
    return run_regions(JobSpec.from_fixture("quadratic", "explicit", seed=0))


@pytest.fixture(scope="session")
def quad_projection_run(tmp_path_factory):
    """Full projection-mode (pseudo-witness) region run on the quadratic discriminant."""
    from chambercut.pipeline import JobSpec, run_regions
    spec = JobSpec.from_fixture("quadratic", "projection", seed=0)
    return run_regions(spec, tmp_path_factory.mktemp("cache"))


QUAD_ROUTING_POINTS = np.array([(-12.339, -2.107), (-3.918, -6.636), (13.040, 1.994), (3.217, 8.083)])
QUAD_ROUTING_INDICES = [0, 1, 0, 0]


def match_rows(found, expected, tol):
    """Index map expected -> found (each within tol), or None if any is missing."""
    found = np.asarray(found)
    out = []
    for e in expected:
        d = np.max(np.abs(found - e), axis=1) if len(found) else np.array([np.inf])
        j = int(np.argmin(d))
        if d[j] > tol:
            return None
        out.append(j)
    return out
