from __future__ import annotations

from dataclasses import dataclass

import pytest

from optolink.harness.config import LinkConfig
from optolink.harness.pipeline import front_end, prbs_symbols
from optolink.pattern import SymbolStream
from optolink.waveform import Waveform

# acceptance criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@dataclass(frozen=True)
class CleanLink:
    cfg: LinkConfig
    symbols: SymbolStream
    rx: Waveform


@pytest.fixture(scope="session")
def clean_link() -> CleanLink:
    """Noiseless default link, 20k PRBS7Q symbols, TIA output."""
    cfg = LinkConfig().with_noise(False)
    symbols = prbs_symbols(cfg, 20_000)
    return CleanLink(cfg, symbols, front_end(cfg, symbols)["rx_electrical"])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
