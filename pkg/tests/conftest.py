import re

import pytest

_RESULTS = {}


@pytest.fixture
def record():
    """record(key, ok, detail): key is a criterion number with an optional part letter."""

    def _record(key, ok, detail=""):
        _RESULTS[str(key)] = (bool(ok), detail)
        print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    groups = {}
    for key, val in _RESULTS.items():
        groups.setdefault(int(re.match(r"\d+", key).group()), []).append((key, *val))
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(groups):
        parts = sorted(groups[num])
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{k}: {'ok' if good else 'FAIL'} {d}".strip() if len(parts) > 1 else d
                           for k, good, d in parts)
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
