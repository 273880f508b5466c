import pytest

from imaxent.reference import cached_reference

# n = 100 reference shared by the selector, harness and acceptance tests
REF100 = dict(n=100, draws=100_000, grid_size=1000, seed=0)


@pytest.fixture(scope="session")
def ref_cache(request):
    return request.config.cache.mkdir("imaxent-refs")


@pytest.fixture(scope="session")
def ref100(ref_cache):
    return cached_reference(cache_dir=ref_cache, **REF100)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip()
        lines.append((number, line))
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
