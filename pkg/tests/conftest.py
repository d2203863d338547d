import pytest

VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    def record(n, ok, detail, info=False):
        tag = "INFO" if info else ("PASS" if ok else "FAIL")
        line = f"{tag} criterion {n}: {detail}"
        VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance")
        for line in VERDICTS:
            terminalreporter.write_line(line)
