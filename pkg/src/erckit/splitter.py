"""Series-disjoint train/val/test partitioning."""
from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus
from .errors import SplitError

SPLIT_NAMES = ("train", "val", "test")
# default target utterance shares for train/val/test
DEFAULT_RATIOS = (0.713, 0.115, 0.172)


@dataclass(frozen=True)
class Split:
    assignment: dict  # tv_series -> split name
    target_ratios: tuple[float, float, float] = DEFAULT_RATIOS
    seed: int = 0

    def __post_init__(self):
        bad = {v for v in self.assignment.values() if v not in SPLIT_NAMES}
        if bad:
            raise SplitError(f"unknown split names {sorted(bad)}")

    def series(self, name: str) -> list[str]:
        return sorted(s for s, v in self.assignment.items() if v == name)


def _check_ratios(ratios):
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must be three positive numbers summing to 1, got {tuple(ratios)}")


def tv_independent_split(corpus: Corpus, ratios=DEFAULT_RATIOS, seed: int = 0) -> Split:
    """Greedy utterance-balanced assignment of whole series to splits.

    Series are visited largest first (equal sizes in seeded-shuffle order) and
    each goes to the split furthest below its utterance target. Once the number
    of series left equals the number of still-empty splits, only empty splits
    are eligible, so every split ends up non-empty.
    """
    ratios = tuple(float(r) for r in ratios)
    _check_ratios(ratios)
    sizes = Counter()
    for d in corpus:
        sizes[d.tv_series] += len(d)
    if len(sizes) < len(SPLIT_NAMES):
        raise SplitError(f"need at least {len(SPLIT_NAMES)} series to split, got {len(sizes)}")
    order = sorted(sizes)
    random.Random(seed).shuffle(order)
    order.sort(key=lambda s: -sizes[s])  # stable: shuffle order breaks ties
    total = sum(sizes.values())
    assigned = [0] * 3
    members = [0] * 3
    assignment = {}
    for i, s in enumerate(order):
        left = len(order) - i
        empty = [j for j in range(3) if members[j] == 0]
        eligible = empty if left <= len(empty) else range(3)
        j = max(eligible, key=lambda j: (ratios[j] * total - assigned[j], -j))
        assignment[s] = SPLIT_NAMES[j]
        assigned[j] += sizes[s]
        members[j] += 1
    return Split(dict(sorted(assignment.items())), ratios, seed)


def apply_split(corpus: Corpus, split: Split) -> dict[str, Corpus]:
    missing = sorted({d.tv_series for d in corpus} - set(split.assignment))
    if missing:
        raise SplitError(f"series not covered by split: {', '.join(missing)}")
    parts = {name: [] for name in SPLIT_NAMES}
    for d in corpus:
        parts[split.assignment[d.tv_series]].append(d)
    return {name: Corpus(tuple(ds)) for name, ds in parts.items()}


def split_record(split: Split) -> dict:
    rec = {name: split.series(name) for name in SPLIT_NAMES}
    rec["seed"] = split.seed
    rec["ratios"] = list(split.target_ratios)
    return rec


def write_split(split: Split, path) -> None:
    Path(path).write_text(json.dumps(split_record(split), indent=2) + "\n", encoding="utf-8")


def read_split(path) -> Split:
    try:
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
        assignment = {}
        for name in SPLIT_NAMES:
            for s in rec[name]:
                if s in assignment:
                    raise SplitError(f"series {s!r} appears in both {assignment[s]} and {name}")
                assignment[s] = name
        return Split(dict(sorted(assignment.items())), tuple(rec["ratios"]), int(rec["seed"]))
    except (KeyError, TypeError, ValueError) as e:
        raise SplitError(f"{path}: malformed split file ({e})") from None
