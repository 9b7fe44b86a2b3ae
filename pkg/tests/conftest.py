import pytest

from restarch import Interface
from restarch.mockxnat import ArchiveFixture, MockXnat, default_fixture


@pytest.hookimpl(tryfirst=True, hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Expose each phase's report on the item (used by the acceptance banner)."""
    outcome = yield
    report = outcome.get_result()
    setattr(item, "rep_" + report.when, report)


class FakeClock:
    """Injectable wall clock for deterministic expiration tests."""

    def __init__(self, start: float = 1_000_000.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def server():
    srv = MockXnat(default_fixture()).start()
    yield srv
    srv.stop()


@pytest.fixture
def serve():
    """Start mock servers from fixture dicts or objects; stops them all."""
    servers = []

    def _serve(fixture):
        if isinstance(fixture, dict):
            fixture = ArchiveFixture.from_dict(fixture)
        srv = MockXnat(fixture).start()
        servers.append(srv)
        return srv

    yield _serve
    for srv in servers:
        srv.stop()


@pytest.fixture
def make_interface(tmp_path):
    """Interface factory with a fresh cache directory per call."""
    interfaces = []
    counter = [0]

    def _make(server, **kwargs):
        counter[0] += 1
        kwargs.setdefault("cachedir", str(tmp_path / f"cache{counter[0]}"))
        iface = Interface(server.url, **kwargs)
        interfaces.append(iface)
        return iface

    yield _make
    for iface in interfaces:
        iface.close()


@pytest.fixture
def interface(server, make_interface):
    return make_interface(server)


def subjects_only_fixture(layout: dict[str, int]) -> dict:
    """A minimal fixture: projects mapping to a number of subjects each."""
    projects = []
    n = 0
    for project_id, count in layout.items():
        subjects = []
        for _ in range(count):
            n += 1
            subjects.append({
                "id": f"S{n:03d}",
                "label": f"SUBJ_{n:03d}",
                "metadata": {
                    "SUBJECT_ID": f"S{n:03d}", "LABEL": f"SUBJ_{n:03d}",
                    "GENDER": "female" if n % 2 else "male",
                    "HANDEDNESS": "right", "PROJECT": project_id,
                },
            })
        projects.append({"id": project_id, "subjects": subjects})
    return {
        "schema": {
            "xnat:projectData": ["ID", "NAME"],
            "xnat:subjectData": ["SUBJECT_ID", "LABEL", "GENDER", "HANDEDNESS", "PROJECT"],
            "xnat:mrSessionData": ["SESSION_ID", "LABEL", "AGE", "PROJECT"],
        },
        "projects": projects,
    }
