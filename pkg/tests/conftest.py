"""Shared fixtures for the test suite."""
import pytest


@pytest.fixture
def scoreboard(request):
    """Print one pass/fail line per acceptance criterion, bypassing capture."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def announce(num, desc, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {desc} — {detail}"
        if capman is not None:
            with capman.global_and_fixture_disabled():
                print(line, flush=True)
        else:
            print(line, flush=True)
        assert ok, line

    return announce
