"""Shared pytest hooks: print one status line per acceptance criterion."""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" in nodeid and getattr(report, "when", "") == "call":
                outcomes[nodeid] = status
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if (
                "test_acceptance" in nodeid
                and getattr(report, "when", "") == "setup"
                and status in ("failed", "error")
            ):
                outcomes.setdefault(nodeid, status)
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid in sorted(outcomes):
        name = nodeid.split("::")[-1]
        status = "PASS" if outcomes[nodeid] == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
