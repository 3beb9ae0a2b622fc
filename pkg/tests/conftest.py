import sys


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance summary")
    for n in acceptance.CRITERIA:
        terminalreporter.write_line(acceptance.summary_line(n))
