"""Loader for the versioned agent prompt files shipped with the package."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    path = resources.files(__package__).joinpath("prompts", name)
    return path.read_text(encoding="utf-8").strip()
