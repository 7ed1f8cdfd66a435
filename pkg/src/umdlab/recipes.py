"""Shipped reproduction recipes, one per acceptance criterion."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib import resources

from . import harness

TIERS = ("smoke", "full")


@dataclass(frozen=True)
class Recipe:
    name: str
    criterion: int
    description: str
    configs: tuple
    expected: str = "PASS"


@dataclass(frozen=True)
class RecipeOutcome:
    name: str
    passed: bool
    seconds: float
    report: harness.Report


def recipe_dir():
    return resources.files("umdlab") / "data" / "recipes"


def load_recipes() -> list[Recipe]:
    out = []
    for path in sorted(recipe_dir().iterdir(), key=lambda p: p.name):
        if not path.name.endswith(".json"):
            continue
        doc = json.loads(path.read_text())
        cfgs = doc["config"] if isinstance(doc["config"], list) \
            else [doc["config"]]
        out.append(Recipe(doc["name"], int(doc["criterion"]),
                          doc["description"],
                          tuple(harness.ExperimentConfig.from_json(c)
                                for c in cfgs),
                          doc.get("expected", "PASS")))
    return out


def run_recipes(tier: str, threads: int = 1, timing: bool = True,
                names=None) -> list[RecipeOutcome]:
    """Run every recipe (sequentially) through the harness.

    The smoke tier clamps budgets (depth <= 6, N <= 32, M <= 101,
    restarts <= 4); the full tier runs the recipes as written.
    """
    if tier not in TIERS:
        raise ValueError(f"unknown tier {tier!r}; expected one of {TIERS}")
    outcomes = []
    for rec in load_recipes():
        if names is not None and rec.name not in names:
            continue
        t0 = time.perf_counter()
        rep = harness.run_batch(list(rec.configs), threads, timing,
                                smoke=tier == "smoke")
        ok = rep.all_passed if rec.expected == "PASS" else not rep.all_passed
        outcomes.append(RecipeOutcome(rec.name, ok,
                                      time.perf_counter() - t0, rep))
    return outcomes
