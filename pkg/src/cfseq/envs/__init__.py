"""Registered toy environments."""

from __future__ import annotations

from ..core import Environment, InputError
from .farm import MiniFarm, Stage
from .highway import MiniHighway
from .nav import ContinuousNav, NavController

REGISTRY = {
    MiniHighway.name: MiniHighway,
    MiniFarm.name: MiniFarm,
    ContinuousNav.name: ContinuousNav,
}


def make_env(name: str, **params) -> Environment:
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise InputError(f"unknown environment {name!r}; known: {sorted(REGISTRY)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise InputError(f"bad parameters for {name}: {exc}") from None


__all__ = ["REGISTRY", "make_env", "MiniHighway", "MiniFarm", "ContinuousNav", "NavController", "Stage"]
