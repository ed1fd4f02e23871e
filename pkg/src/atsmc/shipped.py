"""Bundled security/privacy models, combination scenarios and principle plans."""
from __future__ import annotations

from importlib import resources

from .model import AttackTree, ScenarioSpec
from .parser import parse_model, parse_scenarios
from .principles import TransformSpec, parse_plan

MODEL_NAMES = ("security", "privacy")
SCENARIO_PREFIX = {"security": "TS", "privacy": "PTS"}
# principle studies start from the hot scenario of the leaf being protected
BASELINE_HOT = {"security": "PasswordAttacks", "privacy": "UnauthorizedAccess"}
PLANS = {
    "security": ("security_hardening", "security_least_privilege", "security_combined"),
    "privacy": ("privacy_diversity", "privacy_least_privilege", "privacy_combined"),
}


def read_text(filename: str) -> str:
    return resources.files("atsmc").joinpath("models", filename).read_text(encoding="utf-8")


def shipped_model(name: str) -> AttackTree:
    if name not in MODEL_NAMES:
        raise KeyError(f"no shipped model {name!r}; choose from {MODEL_NAMES}")
    return parse_model(read_text(f"{name}.adt"))


def shipped_models() -> dict[str, AttackTree]:
    return {name: shipped_model(name) for name in MODEL_NAMES}


def shipped_combos(name: str) -> list[ScenarioSpec]:
    return parse_scenarios(read_text(f"{name}_combos.json"), shipped_model(name))


def shipped_plan(plan: str) -> list[TransformSpec]:
    return parse_plan(read_text(f"{plan}.json"))
