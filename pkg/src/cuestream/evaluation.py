"""Top-k cue-list metrics: tolerance-matched recall and rank distance.

Two timestamps from different lists denote the same cue iff they lie
within the matching tolerance. Recall matches truth cues greedily in
rank order, each claiming the nearest unclaimed detected cue; the rank
distance instead uses a symmetric closest-pair-first matching so the
metric is invariant to argument order.

The rank distance over two top-k lists sums a unit penalty over every
unordered pair {i, j} of distinct elements of the union where (i) i
appears only in one list and j only in the other, (ii) i precedes j in
one list and only j appears in the other, or (iii) i precedes j in one
list and follows it in the other; the total is normalized by k(k-1)/2.
Identical lists score 0; disjoint lists score 2k/(k-1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence


class UndefinedMetricError(ValueError):
    """The metric is undefined for these inputs (e.g. empty truth)."""


@dataclass(frozen=True)
class MatchingConfig:
    """Temporal tolerance for treating two cue timestamps as one cue."""

    tolerance: float = 30.0

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")


@dataclass(frozen=True)
class RankedCueList:
    """Cue timestamps ordered by significance (rank 1 first)."""

    times: tuple[float, ...]

    def __post_init__(self):
        if len(set(self.times)) != len(self.times):
            raise ValueError("cue timestamps must be distinct")

    @property
    def k(self) -> int:
        return len(self.times)

    def to_pairs(self) -> list[dict]:
        return [{"t": t, "rank": i + 1} for i, t in enumerate(self.times)]

    @classmethod
    def from_pairs(cls, pairs: Sequence[dict]) -> "RankedCueList":
        ordered = sorted(pairs, key=lambda p: int(p["rank"]))
        return cls(times=tuple(float(p["t"]) for p in ordered))


def load_ground_truth(path: str) -> RankedCueList:
    """Read a ground-truth file: a JSON array of {"t": s, "rank": n}."""
    with open(path, "r", encoding="utf-8") as fh:
        return RankedCueList.from_pairs(json.load(fh))


def save_ground_truth(path: str, cues: RankedCueList) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cues.to_pairs(), fh, indent=2)
        fh.write("\n")


def match_by_rank(
    claimants: Sequence[float], pool: Sequence[float], tolerance: float
) -> dict[int, int]:
    """Greedy one-to-one matching: claimant index -> pool index.

    Claimants are visited in the given (rank) order; each claims the
    nearest unclaimed pool entry within tolerance, ties to the earlier
    pool timestamp.
    """
    claimed: set[int] = set()
    matches: dict[int, int] = {}
    for ci, ct in enumerate(claimants):
        best: tuple[float, float, int] | None = None
        for pi, pt in enumerate(pool):
            if pi in claimed:
                continue
            dist = abs(pt - ct)
            if dist > tolerance:
                continue
            key = (dist, pt, pi)
            if best is None or key < best:
                best = key
        if best is not None:
            matches[ci] = best[2]
            claimed.add(best[2])
    return matches


def match_closest_pairs(
    a: Sequence[float], b: Sequence[float], tolerance: float
) -> list[tuple[int, int]]:
    """Symmetric greedy matching: globally closest pairs claim first.

    Candidate pairs within tolerance are taken in ascending order of
    (time gap, earlier endpoint, later endpoint), skipping pairs whose
    endpoints are already claimed. Swapping the argument lists yields the
    same matched pairs with indices transposed.
    """
    candidates = []
    for i, ta in enumerate(a):
        for j, tb in enumerate(b):
            gap = abs(ta - tb)
            if gap <= tolerance:
                candidates.append((gap, min(ta, tb), max(ta, tb), i, j))
    candidates.sort()
    used_a: set[int] = set()
    used_b: set[int] = set()
    out: list[tuple[int, int]] = []
    for _, _, _, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        out.append((i, j))
    return out


def recall(
    detected: RankedCueList, truth: RankedCueList, cfg: MatchingConfig = MatchingConfig()
) -> float:
    """Fraction of truth cues claimed by a detected cue within tolerance."""
    if truth.k == 0:
        raise UndefinedMetricError("recall is undefined for an empty truth list")
    matches = match_by_rank(truth.times, detected.times, cfg.tolerance)
    return len(matches) / truth.k


def kendall_min_distance(
    tau1: RankedCueList, tau2: RankedCueList, cfg: MatchingConfig = MatchingConfig()
) -> float:
    """Minimizing rank distance between two top-k lists (k >= 2 each)."""
    k = tau1.k
    if k < 2 or tau2.k != k:
        raise UndefinedMetricError(
            f"rank distance needs two lists of equal length k >= 2, got {tau1.k} and {tau2.k}"
        )
    pairs = match_closest_pairs(tau1.times, tau2.times, cfg.tolerance)

    # Element universe: matched pairs are one element; the rest are singletons.
    pos1: list[int | None] = []
    pos2: list[int | None] = []
    matched1 = {i for i, _ in pairs}
    matched2 = {j for _, j in pairs}
    for i, j in pairs:
        pos1.append(i)
        pos2.append(j)
    for i in range(k):
        if i not in matched1:
            pos1.append(i)
            pos2.append(None)
    for j in range(k):
        if j not in matched2:
            pos1.append(None)
            pos2.append(j)

    total = 0
    n = len(pos1)
    for e in range(n):
        for f in range(e + 1, n):
            total += _pair_penalty(pos1[e], pos2[e], pos1[f], pos2[f])
    return total / (k * (k - 1) / 2.0)


def _pair_penalty(
    p1e: int | None, p2e: int | None, p1f: int | None, p2f: int | None
) -> int:
    """Unit penalty cases over one unordered element pair {e, f}."""
    in1 = (p1e is not None, p1f is not None)
    in2 = (p2e is not None, p2f is not None)
    # Case (iii): both elements in both lists, orders disagree.
    if all(in1) and all(in2):
        assert p1e is not None and p1f is not None and p2e is not None and p2f is not None
        return int((p1e < p1f) != (p2e < p2f))
    # Case (ii): both in one list, exactly one in the other; penalize when
    # the one that is present is the lower-ranked of the two.
    if all(in1) and any(in2):
        assert p1e is not None and p1f is not None
        later_missing_first = p1e < p1f and p2f is not None and p2e is None
        earlier_missing_first = p1f < p1e and p2e is not None and p2f is None
        return int(later_missing_first or earlier_missing_first)
    if all(in2) and any(in1):
        assert p2e is not None and p2f is not None
        later_missing_first = p2e < p2f and p1f is not None and p1e is None
        earlier_missing_first = p2f < p2e and p1e is not None and p1f is None
        return int(later_missing_first or earlier_missing_first)
    # Case (i): each element appears in exactly one list, and they differ.
    if in1 == (True, False) and in2 == (False, True):
        return 1
    if in1 == (False, True) and in2 == (True, False):
        return 1
    # Remaining case: both elements confined to the same single list.
    return 0
