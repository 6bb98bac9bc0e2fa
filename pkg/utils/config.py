"""
Runtime settings.
Read from REFSYNTH_* environment variables (a .env file is honoured by the
entry points); command-line flags override them.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, replace


def _int(name: str, default: int, minimum: int = 0) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}") from None
    if value < minimum:
        raise ValueError(f"{name} must be at least {minimum}, got {value}")
    return value


def _switch(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    value = raw.strip().lower()
    if value in ("on", "true", "1", "yes"):
        return True
    if value in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"{name} must be on or off, got {raw!r}")


@dataclass(frozen=True)
class Settings:
    timeout_ms: int = 60_000
    max_solutions: int = 1
    max_depth: int = 8
    max_branches: int = 20_000
    fuel: int = 100_000
    workers: int = 1
    heuristics: bool = True
    log_level: str = "WARNING"
    spec: str = "lm"

    @classmethod
    def from_env(cls) -> "Settings":
        """
        Build settings from the environment.

        Raises:
            ValueError: naming the variable whose value is malformed
        """
        return cls(
            timeout_ms=_int("REFSYNTH_TIMEOUT_MS", cls.timeout_ms, 1),
            max_solutions=_int("REFSYNTH_MAX_SOLUTIONS", cls.max_solutions, 1),
            max_depth=_int("REFSYNTH_MAX_DEPTH", cls.max_depth),
            max_branches=_int("REFSYNTH_MAX_BRANCHES", cls.max_branches, 1),
            fuel=_int("REFSYNTH_FUEL", cls.fuel, 1),
            workers=_int("REFSYNTH_WORKERS", cls.workers, 1),
            heuristics=_switch("REFSYNTH_HEURISTICS", cls.heuristics),
            log_level=os.getenv("REFSYNTH_LOG_LEVEL", cls.log_level).upper(),
            spec=os.getenv("REFSYNTH_SPEC", cls.spec),
        )

    def override(self, **flags) -> "Settings":
        """Apply command-line flags; None means the flag was not given."""
        return replace(self, **{k: v for k, v in flags.items() if v is not None})
