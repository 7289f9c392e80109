import acceptance_log


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance_log.VERDICTS):
        title, ok, detail = acceptance_log.VERDICTS[number]
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'} criterion {number:2d} ({title}): {detail}")
