import pytest

from swarmcover import env as envmod
from swarmcover import link_budget as lb
from swarmcover import mission as ms

# Verdict lines pushed by the acceptance tests; replayed after the run so
# the log always carries one PASS/FAIL line per claim (default capture
# would otherwise swallow them for passing tests).
acceptance_verdicts: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_verdicts:
        terminalreporter.section("acceptance gate")
        for line in acceptance_verdicts:
            terminalreporter.write_line(line)


@pytest.fixture
def urban() -> lb.AirGroundParams:
    return lb.params_from_preset("urban")


@pytest.fixture
def radio() -> lb.RadioConfig:
    return lb.RadioConfig()


def small_env(side: int = 3, swarm: int = 2, slots: int = 6,
              strategic: tuple[int, ...] = (4,), max_swarm: int = 3,
              device_count: int | None = None, **env_kw) -> envmod.CoverageEnv:
    """A desk-sized world: side x side cells of the default 88 m width."""
    mission_cfg = ms.MissionConfig(
        area_m=88.0 * side,
        cells_per_side=side,
        slots=slots,
        frame_seconds=24.0 * slots,
    )
    env_cfg = envmod.EnvConfig(
        max_swarm=max_swarm,
        num_strategic=len(strategic),
        strategic_cells=tuple(strategic),
        swarm_size=swarm,
        swarm_min=1,
        swarm_max=max_swarm,
        device_count=side * side if device_count is None else device_count,
        **env_kw,
    )
    return envmod.make_env(mission_cfg, env_cfg=env_cfg)


@pytest.fixture
def env3() -> envmod.CoverageEnv:
    return small_env()
