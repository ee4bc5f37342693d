"""The eight malware category labels used for per-category reporting."""

from __future__ import annotations

from enum import Enum


class CategoryLabel(str, Enum):
    ADWARE = "adware"
    BACKDOOR = "backdoor"
    BOTNET = "botnet"
    DROPPER = "dropper"
    RANSOMWARE = "ransomware"
    ROOTKIT = "rootkit"
    SPYWARE = "spyware"
    VIRUS = "virus"


CATEGORY_NAMES: tuple[str, ...] = tuple(label.value for label in CategoryLabel)


def check_category(name: str) -> str:
    if name not in CATEGORY_NAMES:
        raise ValueError(f"unknown category {name!r}; expected one of {CATEGORY_NAMES}")
    return name
