def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    titles = {c[0]: c[1] for c in mod.CRITERIA}
    for number in sorted(mod.RESULTS):
        ok, elapsed, budget, detail = mod.RESULTS[number]
        terminalreporter.write_line(mod.format_line(number, titles[number], ok, elapsed, budget, detail))
