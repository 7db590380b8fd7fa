import numpy as np
import pytest

from dyadsense.ingest import DAY_MS, MINUTE_MS, StudyConfig, TimelineGrid

T0 = 1_500_000_000_000 - (1_500_000_000_000 % DAY_MS)  # a UTC midnight


def make_config(days=1, **kw):
    end = T0 + days * DAY_MS
    kw.setdefault("wave_times", (T0, T0 + (end - T0) // 2, end))
    return StudyConfig(study_start=T0, study_end=end, **kw)


def make_grid(device, config, lat, lon, hotspots=None):
    starts = config.bin_starts()
    n = len(starts)
    lat = np.broadcast_to(np.asarray(lat, dtype=float), (n,)).copy()
    lon = np.broadcast_to(np.asarray(lon, dtype=float), (n,)).copy()
    if hotspots is None:
        hotspots = [frozenset()] * n
    return TimelineGrid(device, starts, lat, lon, [frozenset(h) for h in hotspots])


@pytest.fixture
def day_config():
    return make_config()


def write_csv(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


__all__ = ["T0", "MINUTE_MS", "DAY_MS", "make_config", "make_grid", "write_csv"]


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
