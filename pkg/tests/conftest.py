"""Shared fixtures: the built-in glyph set and one small trained model.

Training even the quick model costs ~10 s, so it is session-scoped and
shared by every test module that needs a working reader.

Also collects the ACCEPTANCE lines emitted by test_acceptance.py and
prints them in the terminal summary, where capture can't eat them.
"""

import re

import pytest

from anpr.charnet import CharModel, TrainConfig, train
from anpr.synthgen import GlyphSet, generate_dataset


def record_acceptance_line(config, line: str) -> None:
    lines = getattr(config, "_acceptance_lines", None)
    if lines is None:
        lines = []
        config._acceptance_lines = lines
    lines.append(line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    m = re.match(r"test_criterion_(\d+)", item.name)
    if m is None:
        return
    num = int(m.group(1))
    lines = getattr(item.config, "_acceptance_lines", None) or []
    if not any(f"ACCEPTANCE {num:02d}" in line for line in lines):
        # the test died before reporting its own line
        state = "FAIL" if report.failed else "PASS"
        record_acceptance_line(
            item.config, f"ACCEPTANCE {num:02d} {state}  {item.name}"
        )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def glyphs():
    return GlyphSet.from_builtin()


@pytest.fixture(scope="session")
def model(glyphs):
    # small but deterministic; enough to read the strings pinned in tests
    data = generate_dataset(glyphs, per_class=20, seed=5)
    trained, _ = train(CharModel(), data, TrainConfig(epochs=8, seed=2))
    return trained
