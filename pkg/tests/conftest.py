import re
import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

_VERDICTS = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running benchmark")


def record_verdict(number, title, ok, detail):
    _VERDICTS.append((number, title, ok, detail))
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail})"
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_VERDICTS, key=lambda v: (int(re.match(r"\d+", str(v[0])).group()), str(v[0]))):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail})")
