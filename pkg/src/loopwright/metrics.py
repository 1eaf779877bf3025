"""Agreement statistics, distribution tables, and nonparametric tests.

Everything here is a pure function over immutable inputs. Implementations are
dependency-free; the hypothesis tests cross-check them against brute-force
oracles.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import (
    DegenerateDistribution,
    ItemSetMismatch,
    LengthMismatch,
    NoCommonItems,
    UndefinedAlpha,
)
from .labels import AnnotatorKind, CWLabel, HSLabel, collapse_binary
from .records import AnnotatorRef, FinalLabelRecord, TripleRun
from .voting import VariabilityClass, classify_variability

# ---------------------------------------------------------------------------
# Annotation matrix


@dataclass(frozen=True)
class AnnotationMatrix:
    """Sparse (item, rater) -> label grid over one label space.

    Missing cells are simply absent; at least two raters are required.
    """

    items: tuple[str, ...]
    raters: tuple[AnnotatorRef, ...]
    cells: Mapping[tuple[str, AnnotatorRef], Enum]
    label_space: type[Enum]

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "raters", tuple(self.raters))
        if len(self.raters) < 2:
            raise ValueError("an annotation matrix needs at least 2 raters")
        known_items = set(self.items)
        known_raters = set(self.raters)
        for (item, rater), label in self.cells.items():
            if item not in known_items:
                raise ValueError(f"cell references unknown item {item!r}")
            if rater not in known_raters:
                raise ValueError(f"cell references unknown rater {rater.identifier!r}")
            if not isinstance(label, self.label_space):
                raise ValueError(
                    f"label {label!r} is not in the declared label space "
                    f"{self.label_space.__name__}"
                )

    @classmethod
    def from_columns(
        cls,
        columns: Mapping[str, Sequence[Enum | None]],
        label_space: type[Enum],
        items: Sequence[str] | None = None,
    ) -> AnnotationMatrix:
        """Build a matrix from per-rater label sequences (None = missing)."""
        lengths = {len(v) for v in columns.values()}
        if len(lengths) != 1:
            raise LengthMismatch("all rater columns must have equal length")
        n = lengths.pop()
        item_ids = tuple(items) if items is not None else tuple(f"i{k}" for k in range(n))
        raters = tuple(
            AnnotatorRef(AnnotatorKind.HUMAN, name) for name in columns
        )
        cells: dict[tuple[str, AnnotatorRef], Enum] = {}
        for rater, (name, labels) in zip(raters, columns.items()):
            for item, label in zip(item_ids, labels):
                if label is not None:
                    cells[(item, rater)] = label
        return cls(items=item_ids, raters=raters, cells=cells, label_space=label_space)

    def rater(self, ref_or_id: AnnotatorRef | str) -> AnnotatorRef:
        if isinstance(ref_or_id, AnnotatorRef):
            return ref_or_id
        for rater in self.raters:
            if rater.identifier == ref_or_id:
                return rater
        raise ValueError(f"unknown rater: {ref_or_id!r}")

    def column(self, rater: AnnotatorRef | str) -> dict[str, Enum]:
        ref = self.rater(rater)
        return {
            item: label
            for (item, cell_rater), label in self.cells.items()
            if cell_rater == ref
        }

    def collapse(self) -> AnnotationMatrix:
        """Binary view of a 3-class matrix (CFS vs the rest)."""
        if self.label_space is not CWLabel:
            raise ValueError("collapse applies to check-worthiness matrices")
        cells = {key: collapse_binary(label) for key, label in self.cells.items()}
        from .labels import BinaryCWLabel

        return AnnotationMatrix(self.items, self.raters, cells, BinaryCWLabel)


def _common_pairs(
    m: AnnotationMatrix, rater_a: AnnotatorRef | str, rater_b: AnnotatorRef | str
) -> tuple[list[Enum], list[Enum]]:
    col_a = m.column(rater_a)
    col_b = m.column(rater_b)
    common = [item for item in m.items if item in col_a and item in col_b]
    if not common:
        raise NoCommonItems("the two raters share no labeled items")
    return [col_a[i] for i in common], [col_b[i] for i in common]


# ---------------------------------------------------------------------------
# Agreement coefficients


def percent_agreement(
    m: AnnotationMatrix, rater_a: AnnotatorRef | str, rater_b: AnnotatorRef | str
) -> float:
    """Matching labels divided by commonly labeled items."""
    a, b = _common_pairs(m, rater_a, rater_b)
    matches = sum(1 for x, y in zip(a, b) if x == y)
    return matches / len(a)


def _kappa_from_pairs(a: Sequence[Enum], b: Sequence[Enum]) -> float:
    n = len(a)
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    counts_a = Counter(a)
    counts_b = Counter(b)
    p_e = sum(
        (counts_a[label] / n) * (counts_b[label] / n)
        for label in set(counts_a) | set(counts_b)
    )
    if p_e >= 1.0:
        raise DegenerateDistribution(
            "both raters are constant on the same label; kappa is undefined"
        )
    return (p_o - p_e) / (1.0 - p_e)


def cohens_kappa(
    m: AnnotationMatrix, rater_a: AnnotatorRef | str, rater_b: AnnotatorRef | str
) -> float:
    """Cohen's kappa with per-rater marginals over the common items."""
    a, b = _common_pairs(m, rater_a, rater_b)
    if len(a) < 2:
        raise NoCommonItems("kappa needs at least 2 common items")
    return _kappa_from_pairs(a, b)


def krippendorff_alpha_nominal(m: AnnotationMatrix) -> float:
    """Krippendorff's alpha for nominal data via the coincidence matrix.

    Units with fewer than two ratings are excluded. Within a unit of size
    ``m_u`` each ordered pair of ratings contributes ``1 / (m_u - 1)`` to the
    coincidence counts; alpha = 1 - D_o / D_e.
    """
    units: list[list[Enum]] = []
    for item in m.items:
        ratings = [
            label for (cell_item, _), label in m.cells.items() if cell_item == item
        ]
        if len(ratings) >= 2:
            units.append(ratings)
    if not units:
        raise UndefinedAlpha("no item carries two or more ratings")

    coincidence: Counter[tuple[Enum, Enum]] = Counter()
    for ratings in units:
        weight = 1.0 / (len(ratings) - 1)
        for i, first in enumerate(ratings):
            for j, second in enumerate(ratings):
                if i != j:
                    coincidence[(first, second)] += weight

    n_total = sum(coincidence.values())
    label_totals: Counter[Enum] = Counter()
    for (first, _), count in coincidence.items():
        label_totals[first] += count

    d_observed = (
        sum(count for (first, second), count in coincidence.items() if first != second)
        / n_total
    )
    d_expected = sum(
        label_totals[c] * label_totals[k]
        for c in label_totals
        for k in label_totals
        if c != k
    ) / (n_total * (n_total - 1))
    if d_expected == 0:
        raise UndefinedAlpha("all pairable ratings are identical")
    return 1.0 - d_observed / d_expected


def compare_tracks(
    gold: Mapping[str, CWLabel], platinum: Mapping[str, CWLabel]
) -> tuple[float, float]:
    """Kappa between two label tracks, on 3 classes and after binary collapse."""
    if set(gold) != set(platinum):
        raise ItemSetMismatch("gold and platinum tracks cover different claims")
    items = sorted(gold)
    a = [gold[i] for i in items]
    b = [platinum[i] for i in items]
    kappa_3 = _kappa_from_pairs(a, b)
    kappa_2 = _kappa_from_pairs(
        [collapse_binary(x) for x in a], [collapse_binary(x) for x in b]
    )
    return kappa_3, kappa_2


# ---------------------------------------------------------------------------
# Tables


@dataclass(frozen=True)
class VariabilityRow:
    stratum: str
    counts: Mapping[VariabilityClass, int]
    percents: Mapping[VariabilityClass, float]
    total: int


def variability_table(
    runs: Iterable[TripleRun], strata: Mapping[str, str] | None = None
) -> list[VariabilityRow]:
    """Count runs per variability class, per stratum plus an overall row.

    ``strata`` maps claim ids to stratum names; unmapped claims fall in
    "unstratified". Percentages are over the row total.
    """
    per_stratum: dict[str, Counter[VariabilityClass]] = {}
    overall: Counter[VariabilityClass] = Counter()
    for run in runs:
        cls = classify_variability(run)
        overall[cls] += 1
        if strata is not None:
            name = strata.get(run.claim_id, "unstratified")
            per_stratum.setdefault(name, Counter())[cls] += 1

    def row(name: str, counts: Counter[VariabilityClass]) -> VariabilityRow:
        total = sum(counts.values())
        return VariabilityRow(
            stratum=name,
            counts={cls: counts.get(cls, 0) for cls in VariabilityClass},
            percents={
                cls: (100.0 * counts.get(cls, 0) / total if total else 0.0)
                for cls in VariabilityClass
            },
            total=total,
        )

    rows = [row(name, counts) for name, counts in sorted(per_stratum.items())]
    rows.append(row("overall", overall))
    return rows


HS_STRATUM = "HS"
NON_HS_STRATUM = "Non-HS"
ALL_CLAIMS = "all"
UNLABELED = "unlabeled"


@dataclass(frozen=True)
class LabelDistribution:
    """Cross-tabulation of final labels by message stratum and claim stratum.

    Claims on hateful messages are split by their component-level label; claims
    on non-hateful messages form a single row (they carry no component labels).
    """

    cells: Mapping[tuple[str, str, CWLabel], int]

    def cell(self, message_stratum: str, claim_stratum: str, label: CWLabel) -> int:
        return self.cells.get((message_stratum, claim_stratum, label), 0)

    def column_total(self, message_stratum: str, label: CWLabel) -> int:
        return sum(
            count
            for (msg, _, lab), count in self.cells.items()
            if msg == message_stratum and lab == label
        )

    def total(self) -> int:
        return sum(self.cells.values())


def label_distribution(
    finals: Iterable[FinalLabelRecord],
    message_hs: Mapping[str, HSLabel],
    claim_hs: Mapping[str, HSLabel | None],
    track: str = "gold",
) -> LabelDistribution:
    """Tabulate a label track against message- and claim-level HS strata."""
    if track not in ("gold", "platinum"):
        raise ValueError("track must be 'gold' or 'platinum'")
    cells: Counter[tuple[str, str, CWLabel]] = Counter()
    for record in finals:
        label = record.gold if track == "gold" else record.platinum
        if label is None:
            continue
        message_label = message_hs[record.claim_id]
        if message_label is HSLabel.HATEFUL:
            component = claim_hs.get(record.claim_id)
            if component is HSLabel.HATEFUL:
                claim_stratum = HS_STRATUM
            elif component is HSLabel.NON_HATEFUL:
                claim_stratum = NON_HS_STRATUM
            else:
                claim_stratum = UNLABELED
            cells[(HS_STRATUM, claim_stratum, label)] += 1
        else:
            cells[(NON_HS_STRATUM, ALL_CLAIMS, label)] += 1
    return LabelDistribution(dict(cells))


# ---------------------------------------------------------------------------
# Classification metrics


class Prf(NamedTuple):
    precision: float
    recall: float
    f1: float


def macro_prf(gold: Sequence[HSLabel], pred: Sequence[HSLabel]) -> Prf:
    """Macro precision/recall/F1 over both classes, 0-substituting 0/0 ratios."""
    if len(gold) != len(pred):
        raise LengthMismatch(f"gold has {len(gold)} labels, pred has {len(pred)}")
    if not gold:
        raise LengthMismatch("at least one pair of labels is required")
    precisions, recalls, f1s = [], [], []
    for cls in HSLabel:
        tp = sum(1 for g, p in zip(gold, pred) if g == cls and p == cls)
        fp = sum(1 for g, p in zip(gold, pred) if g != cls and p == cls)
        fn = sum(1 for g, p in zip(gold, pred) if g == cls and p != cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
    k = len(f1s)
    return Prf(sum(precisions) / k, sum(recalls) / k, sum(f1s) / k)


# ---------------------------------------------------------------------------
# Mann-Whitney U and effect size


def _midranks(values: Sequence[float]) -> list[float]:
    """Ascending ranks with ties sharing the mean of their rank range."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _u_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """Pairs where an a-value exceeds a b-value, ties counting one half."""
    ranks = _midranks(list(a) + list(b))
    rank_sum_a = sum(ranks[: len(a)])
    return rank_sum_a - len(a) * (len(a) + 1) / 2


def _tie_counts(values: Sequence[float]) -> list[int]:
    return sorted(Counter(values).values())


def _normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _p_normal(u: float, n_a: int, n_b: int, pooled: Sequence[float]) -> float:
    n = n_a + n_b
    mean = n_a * n_b / 2.0
    tie_term = sum(t**3 - t for t in _tie_counts(pooled))
    variance = (n_a * n_b / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0:
        return 1.0
    # Continuity correction pulls |U - mean| toward zero by one half.
    numerator = max(abs(u - mean) - 0.5, 0.0)
    z = numerator / math.sqrt(variance)
    return min(1.0, 2.0 * _normal_sf(z))


def _exact_u_distribution(pooled: Sequence[float], n_a: int) -> dict[int, int]:
    """Permutation distribution of 2U over all splits of the pooled values.

    Dynamic program over tie groups in ascending order; the state tracks how
    many a-values have been placed and the accumulated doubled statistic.
    Returns {2U: number of splits}, totalling C(n, n_a).
    """
    groups = sorted(Counter(pooled).items())
    states: dict[tuple[int, int], int] = {(0, 0): 1}
    processed = 0
    for _, group_size in groups:
        next_states: dict[tuple[int, int], int] = {}
        for (used, u2), ways in states.items():
            b_before = processed - used
            for take in range(0, min(group_size, n_a - used) + 1):
                b_here = group_size - take
                delta = 2 * take * b_before + take * b_here
                key = (used + take, u2 + delta)
                next_states[key] = next_states.get(key, 0) + ways * math.comb(
                    group_size, take
                )
        states = next_states
        processed += group_size
    return {u2: ways for (used, u2), ways in states.items() if used == n_a}


def _p_exact(u: float, n_a: int, n_b: int, pooled: Sequence[float]) -> float:
    distribution = _exact_u_distribution(pooled, n_a)
    total = sum(distribution.values())
    center = n_a * n_b  # doubled scale
    observed_distance = abs(2 * u - center)
    hits = sum(
        ways
        for u2, ways in distribution.items()
        if abs(u2 - center) >= observed_distance - 1e-9
    )
    return hits / total


def mann_whitney_u(
    a: Sequence[float], b: Sequence[float], method: str = "auto"
) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test.

    U is reported for group ``a`` (pairs where the a-value exceeds the
    b-value; ties count one half) and is computed from midranks. The p-value
    uses exact permutation enumeration for pooled sizes up to 20 and the
    normal approximation with tie and continuity corrections above that;
    ``method`` can force either path.
    """
    if not a or not b:
        raise ValueError("both groups must be non-empty")
    if method not in ("auto", "exact", "normal"):
        raise ValueError("method must be auto, exact, or normal")
    u = _u_statistic(a, b)
    pooled = list(a) + list(b)
    if method == "auto":
        method = "normal" if len(pooled) > 20 else "exact"
    if method == "exact":
        p = _p_exact(u, len(a), len(b), pooled)
    else:
        p = _p_normal(u, len(a), len(b), pooled)
    return u, p


def rank_biserial_r(u: float, n_a: int, n_b: int) -> float:
    """Absolute rank-biserial correlation, |1 - 2U / (n_a * n_b)|."""
    if n_a < 1 or n_b < 1:
        raise ValueError("group sizes must be at least 1")
    return abs(1.0 - 2.0 * u / (n_a * n_b))


@dataclass(frozen=True)
class GroupComparison:
    """Mann-Whitney comparison between two score groups."""

    group_a_name: str
    group_b_name: str
    n_a: int
    n_b: int
    u_statistic: float
    p_value: float
    effect_size_r: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.u_statistic <= self.n_a * self.n_b:
            raise ValueError("U must lie within [0, n_a * n_b]")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value must lie within [0, 1]")
        if not 0.0 <= self.effect_size_r <= 1.0:
            raise ValueError("effect size must lie within [0, 1]")

    @property
    def u_statistic_b(self) -> float:
        """The same comparison seen from group b."""
        return self.n_a * self.n_b - self.u_statistic

    def to_dict(self) -> dict:
        return {
            "group_a": self.group_a_name,
            "group_b": self.group_b_name,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "u_statistic": self.u_statistic,
            "u_statistic_b": self.u_statistic_b,
            "p_value": self.p_value,
            "effect_size_r": self.effect_size_r,
        }


def compare_groups(
    name_a: str,
    scores_a: Sequence[float],
    name_b: str,
    scores_b: Sequence[float],
    method: str = "auto",
) -> GroupComparison:
    u, p = mann_whitney_u(scores_a, scores_b, method=method)
    r = rank_biserial_r(u, len(scores_a), len(scores_b))
    return GroupComparison(
        group_a_name=name_a,
        group_b_name=name_b,
        n_a=len(scores_a),
        n_b=len(scores_b),
        u_statistic=u,
        p_value=p,
        effect_size_r=r,
    )
