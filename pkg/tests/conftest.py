def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for idx in sorted(RESULTS):
        ok, detail = RESULTS[idx]
        terminalreporter.write_line(f"criterion {idx:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
