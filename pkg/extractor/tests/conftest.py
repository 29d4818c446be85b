_acceptance_lines = []


def record_acceptance(name: str, ok: bool) -> None:
    _acceptance_lines.append(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria (extractor)")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
