import os

from hypothesis import HealthCheck, settings

settings.register_profile("shelab", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("shelab")


def pytest_configure(config):
    # keep oracle caches written by harness tests out of the user's home
    os.environ.setdefault("SHELAB_CACHE", os.path.join(str(config.rootpath), ".pytest_cache",
                                                       "shelab-oracles.json"))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":").rstrip("ab"))):
            terminalreporter.write_line(line)
