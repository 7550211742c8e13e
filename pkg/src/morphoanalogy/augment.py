"""Analogy augmentation: equivalent valid forms and derived invalid forms.

A valid analogy a:b::c:d is closed under symmetry (swap the two halves) and
central permutation (swap the middle terms); applying both exhaustively
yields exactly eight equivalent forms. Three counterexample patterns per
form (swap the first two slots, swap the outer-left slots, duplicate the
first slot) give up to 24 invalid quadruples. On degenerate inputs some
"invalid" candidates coincide textually with a valid form; those are
dropped so no quadruple ever carries both labels.
"""

from __future__ import annotations

from .corpus import LabeledQuadruple, Quadruple
from .numkit import Rng

# slot-index images of (a, b, c, d) under the analogy postulates, in the
# fixed order: base, then central permutation / symmetry combinations
VALID_FORM_SLOTS: tuple[tuple[int, int, int, int], ...] = (
    (0, 1, 2, 3),   # a:b::c:d
    (0, 2, 1, 3),   # a:c::b:d
    (3, 1, 2, 0),   # d:b::c:a
    (2, 0, 3, 1),   # c:a::d:b
    (2, 3, 0, 1),   # c:d::a:b
    (1, 0, 3, 2),   # b:a::d:c
    (3, 2, 1, 0),   # d:c::b:a
    (1, 3, 0, 2),   # b:d::a:c
)

# counterexample patterns applied to each valid form (w, x, y, z)
INVALID_PATTERNS: tuple[tuple[int, int, int, int], ...] = (
    (1, 0, 2, 3),   # x:w::y:z
    (2, 1, 0, 3),   # y:x::w:z
    (0, 0, 2, 3),   # w:w::y:z
)


def _apply(q: Quadruple, slots: tuple[int, int, int, int]) -> Quadruple:
    return Quadruple(q[slots[0]], q[slots[1]], q[slots[2]], q[slots[3]])


def valid_forms(q: Quadruple) -> list[Quadruple]:
    """The eight equivalent forms of ``q``, in fixed order (base first)."""
    return [_apply(q, slots) for slots in VALID_FORM_SLOTS]


def invalid_slot_candidates() -> list[tuple[int, int, int, int]]:
    """The 24 invalid slot patterns: three per valid form, form-major order."""
    out = []
    for form in VALID_FORM_SLOTS:
        for pattern in INVALID_PATTERNS:
            out.append(tuple(form[i] for i in pattern))
    return out


def _filter_collisions(q: Quadruple, candidates) -> list[tuple[int, int, int, int]]:
    valid = set(valid_forms(q))
    seen = set()
    out = []
    for slots in candidates:
        cand = _apply(q, slots)
        if cand in valid or cand in seen:
            continue
        seen.add(cand)
        out.append(slots)
    return out


def invalid_slots_for(q: Quadruple) -> list[tuple[int, int, int, int]]:
    """Slot patterns of the surviving invalid forms of ``q`` (up to 24)."""
    return _filter_collisions(q, invalid_slot_candidates())


def base_invalid_slots_for(q: Quadruple) -> list[tuple[int, int, int, int]]:
    """Slot patterns of the surviving base-form invalids (at most three)."""
    return _filter_collisions(q, INVALID_PATTERNS)


def sample_invalid_slots(q: Quadruple, k: int, rng: Rng) -> list[tuple[int, int, int, int]]:
    """Slot patterns of a uniform without-replacement sample of ``k`` invalids.

    If fewer than ``k`` distinct invalid forms survive, all of them are kept
    and the remainder is drawn with replacement; zero survivors yield an
    empty list.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    pool = invalid_slots_for(q)
    if k == 0 or not pool:
        return []
    if len(pool) >= k:
        picked = rng.choice(len(pool), size=k, replace=False)
        return [pool[i] for i in picked]
    extra = rng.choice(len(pool), size=k - len(pool), replace=True)
    return pool + [pool[i] for i in extra]


def invalid_forms(q: Quadruple) -> list[LabeledQuadruple]:
    """Up to 24 invalid quadruples derived from ``q``.

    Candidates textually equal to one of the eight valid forms are dropped,
    as are duplicates among the candidates (first occurrence kept).
    """
    return [LabeledQuadruple(_apply(q, slots), 0) for slots in invalid_slots_for(q)]


def base_invalid_forms(q: Quadruple) -> list[LabeledQuadruple]:
    """Invalid quadruples derived from the base form only (at most three)."""
    return [LabeledQuadruple(_apply(q, slots), 0) for slots in base_invalid_slots_for(q)]


def sample_invalid(q: Quadruple, k: int = 8, rng: Rng | None = None) -> list[LabeledQuadruple]:
    """Uniform sample of ``k`` invalid forms, without replacement.

    If fewer than ``k`` distinct invalid forms exist, all of them are kept
    and the remainder is drawn uniformly with replacement, except that zero
    available forms yield an empty list.
    """
    rng = rng if rng is not None else Rng(0)
    slots = sample_invalid_slots(q, k, rng)
    return [LabeledQuadruple(_apply(q, s), 0) for s in slots]


def augment_for_classification(q: Quadruple, rng: Rng) -> list[LabeledQuadruple]:
    """Training-time augmentation: 8 valid forms plus 8 sampled invalid."""
    out = [LabeledQuadruple(form, 1) for form in valid_forms(q)]
    out.extend(sample_invalid(q, 8, rng))
    return out


def augment_for_evaluation(q: Quadruple) -> list[LabeledQuadruple]:
    """Evaluation-time augmentation: 8 valid forms plus all invalid forms."""
    out = [LabeledQuadruple(form, 1) for form in valid_forms(q)]
    out.extend(invalid_forms(q))
    return out


def augment_for_regression(q: Quadruple) -> list[Quadruple]:
    """Regression augmentation: the 8 valid forms only, never invalid ones."""
    return valid_forms(q)
