"""Bundled benchmark configurations."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

BENCHMARKS = ("pendulum", "no_common_lf", "three_mode_discrete", "three_mode_continuous")


def builtin_config_path(name: str) -> Path:
    """Filesystem path of a bundled benchmark config."""
    if name not in BENCHMARKS:
        raise KeyError(f"unknown benchmark {name!r}; available: {', '.join(BENCHMARKS)}")
    return Path(resources.files("nmlf") / "configs" / f"{name}.json")


def resolve_config(arg: str) -> Path:
    """Interpret a CLI argument as a config file path or a benchmark name."""
    p = Path(arg)
    if p.exists():
        return p
    if arg in BENCHMARKS:
        return builtin_config_path(arg)
    raise FileNotFoundError(f"no such config file or benchmark: {arg}")
