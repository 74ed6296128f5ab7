"""Exact conditional support of a selected t-statistic.

Holding the nuisance direction fixed, every coordinate of the t-statistic
vector is a line in the selected statistic x_s.  The set of x_s values that
reproduce the observed selection outcome is a finite union of closed
intervals; it is found by partitioning the real line at points where the
ordering used by the sequential procedure can change (line/line crossings,
sign changes, and for two-sided rules crossings of mirrored lines), and
intersecting each cell with the linear inequalities implied by the event.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .stats_core import DegenerateSupportError, IntervalUnion
from .testing import (
    STEP_DOWN,
    STEP_UP,
    SelectionOutcome,
    ThresholdSpec,
    _batch_membership,
    select,
    threshold_value,
    thresholds_by_step,
)

_INF = math.inf

#: Relative tolerance below which nearby sweep breakpoints are collapsed.
BREAKPOINT_TOL = 1e-12

#: Relative gap below which adjacent support pieces are coalesced.
MERGE_TOL = 1e-10

_BLOCK = 4096


class InconsistentEventError(ValueError):
    """The observed statistic is not a member of the computed support."""


@dataclass(eq=False)
class Decomposition:
    """Split of the t-statistic vector along the selected coordinate.

    ``omega_col * x_s + z`` reconstructs the full vector; ``z`` is the part
    independent of ``x_s`` under joint Gaussianity, with ``z[s] == 0``.
    """

    s: int
    x_s: float
    z: np.ndarray
    omega_col: np.ndarray


def decompose(x: Sequence[float], omega: np.ndarray, s: int) -> Decomposition:
    """Decompose statistics ``x`` against correlation matrix ``omega`` at s."""
    x = np.asarray(x, dtype=float)
    omega = np.asarray(omega, dtype=float)
    m = x.shape[0]
    if x.ndim != 1 or omega.shape != (m, m):
        raise ValueError(
            f"shape mismatch: x has {x.shape}, omega has {omega.shape}"
        )
    if not 0 <= s < m:
        raise ValueError(f"selected index {s} out of range for m={m}")
    scale = max(1.0, float(np.abs(omega).max()))
    if np.abs(omega - omega.T).max() > 1e-8 * scale:
        raise ValueError("omega must be symmetric")
    if np.abs(np.diag(omega) - 1.0).max() > 1e-12:
        raise ValueError("omega must have a unit diagonal")
    col = omega[:, s].copy()
    z = x - col * x[s]
    z[s] = 0.0
    return Decomposition(s=s, x_s=float(x[s]), z=z, omega_col=col)


@dataclass(frozen=True)
class SelectionEvent:
    """Conditioning event: the exact significant set, or containment of one.

    ``equal(S)`` conditions on the procedure returning exactly S;
    ``superset(R)`` conditions on every member of R being significant while
    staying agnostic about the rest.
    """

    kind: str
    indices: frozenset[int]

    def __post_init__(self) -> None:
        if self.kind not in ("equal", "superset"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        object.__setattr__(self, "indices", frozenset(int(i) for i in self.indices))
        if self.kind == "superset" and not self.indices:
            raise ValueError("a superset event needs a nonempty target set")

    @classmethod
    def equal(cls, significant: Iterable[int]) -> "SelectionEvent":
        return cls("equal", frozenset(significant))

    @classmethod
    def superset(cls, required: Iterable[int]) -> "SelectionEvent":
        return cls("superset", frozenset(required))


def _event_holds(outcome: SelectionOutcome, event: SelectionEvent) -> bool:
    got = outcome.significant_set
    if event.kind == "equal":
        return got == event.indices
    return event.indices <= got


def membership_oracle(
    x_s: float, d: Decomposition, spec: ThresholdSpec, event: SelectionEvent
) -> bool:
    """Does setting the selected statistic to ``x_s`` reproduce the event?

    Runs the full selection procedure on the reconstructed vector; this is
    the ground truth the sweep-based support computation is checked against.
    """
    vec = d.omega_col * x_s + d.z
    return _event_holds(select(vec, spec), event)


def membership_profile(
    xs: Sequence[float], d: Decomposition, spec: ThresholdSpec, event: SelectionEvent
) -> np.ndarray:
    """Vectorized :func:`membership_oracle` over a grid of x_s values."""
    xs = np.asarray(xs, dtype=float)
    if thresholds_by_step(spec) is None:
        return np.asarray([membership_oracle(x, d, spec, event) for x in xs])
    matrix = d.omega_col[:, None] * xs[None, :] + d.z[:, None]
    member = _batch_membership(matrix, spec)
    mask = np.zeros(spec.m, dtype=bool)
    mask[list(event.indices)] = True
    if event.kind == "equal":
        return (member == mask[:, None]).all(axis=0)
    return member[mask].all(axis=0)


def merge_intervals(
    raw: Iterable[tuple[float, float]], tol: float = MERGE_TOL
) -> IntervalUnion:
    """Coalesce raw (lo, hi) pieces into a sorted disjoint union.

    Pieces whose gap is below ``tol`` (relative to the endpoint magnitudes)
    are merged; the discarded gaps have measure zero at the scale the
    truncated CDF can resolve.
    """
    pieces = []
    for lo, hi in raw:
        lo, hi = float(lo), float(hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if lo > hi:
            raise ValueError(f"interval has lo > hi: ({lo}, {hi})")
        pieces.append((lo, hi))
    pieces.sort()
    merged: list[tuple[float, float]] = []
    for lo, hi in pieces:
        if merged:
            prev_lo, prev_hi = merged[-1]
            scale = max(
                1.0,
                abs(lo) if math.isfinite(lo) else 1.0,
                abs(prev_hi) if math.isfinite(prev_hi) else 1.0,
            )
            if lo <= prev_hi + tol * scale:
                merged[-1] = (prev_lo, max(prev_hi, hi))
                continue
        merged.append((lo, hi))
    return IntervalUnion(tuple(merged))


# ---------------------------------------------------------------------------
# breakpoints and partitions
# ---------------------------------------------------------------------------


def _dedup_sorted(points: np.ndarray, tol: float = BREAKPOINT_TOL) -> np.ndarray:
    if points.size == 0:
        return points
    keep = [points[0]]
    for p in points[1:]:
        if p - keep[-1] > tol * max(1.0, abs(p), abs(keep[-1])):
            keep.append(p)
    return np.asarray(keep)


def _breakpoints_brute(
    a: np.ndarray,
    b: np.ndarray,
    rows: Sequence[int],
    two_sided: bool,
    w_lo: float,
    w_hi: float,
    axis_rows: Sequence[int] | None = None,
) -> np.ndarray:
    """All ordering breakpoints among the given lines, clipped to the window.

    Pairwise crossings always matter; under two-sided testing the ordering
    of the magnitudes also changes where one line meets the mirror image of
    another and where a line changes sign, so those abscissas are included
    as well.
    """
    rows = np.asarray(list(rows), dtype=int)
    chunks: list[np.ndarray] = []
    if rows.size >= 2:
        aa, bb = a[rows], b[rows]
        i, j = np.triu_indices(rows.size, k=1)
        da = aa[i] - aa[j]
        nz = da != 0.0
        chunks.append((bb[j] - bb[i])[nz] / da[nz])
        if two_sided:
            sa = aa[i] + aa[j]
            nz = sa != 0.0
            chunks.append(-(bb[i] + bb[j])[nz] / sa[nz])
    if two_sided:
        ar = rows if axis_rows is None else np.asarray(list(axis_rows), dtype=int)
        if ar.size:
            aa, bb = a[ar], b[ar]
            nz = aa != 0.0
            chunks.append(-bb[nz] / aa[nz])
    if not chunks:
        return np.empty(0)
    points = np.concatenate(chunks)
    points = points[np.isfinite(points)]
    points = points[(points > w_lo) & (points < w_hi)]
    points.sort()
    return _dedup_sorted(points)


def _sweep_breakpoints(
    a: np.ndarray,
    b: np.ndarray,
    rows: Sequence[int],
    w_lo: float,
    w_hi: float,
) -> np.ndarray:
    """Crossings of plain lines inside the window via a neighbor sweep.

    Classic arrangement sweep: only lines adjacent in the current vertical
    order can cross next, so a priority queue of adjacent-pair crossing
    abscissas enumerates every intersection in increasing order.  An event
    is acted on only when the pair is still adjacent and still ordered
    against its slopes (pre-crossing), which makes stale and concurrent
    events self-resolving.
    """
    rows = list(rows)
    n = len(rows)
    if n < 2:
        return np.empty(0)
    aa = a[rows].astype(float)
    bb = b[rows].astype(float)

    if math.isfinite(w_lo):
        order = sorted(range(n), key=lambda i: (aa[i] * w_lo + bb[i], aa[i], i))
    else:
        # ascending value at x -> -inf: steeper lines sit lower
        order = sorted(range(n), key=lambda i: (-aa[i], bb[i], i))
    pos = [0] * n
    for p, i in enumerate(order):
        pos[i] = p

    def crossing(i: int, j: int) -> float | None:
        da = aa[i] - aa[j]
        if da == 0.0:
            return None
        x = (bb[j] - bb[i]) / da
        return x if math.isfinite(x) else None

    heap: list[tuple[float, int, int]] = []

    def push(lower: int, upper: int, x_now: float) -> None:
        x = crossing(lower, upper)
        if x is not None and x >= x_now and w_lo < x < w_hi:
            heapq.heappush(heap, (x, lower, upper))

    for p in range(n - 1):
        push(order[p], order[p + 1], w_lo if math.isfinite(w_lo) else -_INF)

    found: list[float] = []
    while heap:
        x, i, j = heapq.heappop(heap)
        if abs(pos[i] - pos[j]) != 1:
            continue
        lower, upper = (i, j) if pos[i] < pos[j] else (j, i)
        if aa[lower] <= aa[upper]:
            continue  # already in post-crossing order
        found.append(x)
        pl, pu = pos[lower], pos[upper]
        order[pl], order[pu] = upper, lower
        pos[lower], pos[upper] = pu, pl
        if pl > 0:
            push(order[pl - 1], order[pl], x)
        if pu < n - 1:
            push(order[pu], order[pu + 1], x)
    points = np.asarray(sorted(found))
    return _dedup_sorted(points)


def _partition(
    points: np.ndarray, w_lo: float, w_hi: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cells of the window split at the breakpoints, with interior probes.

    Unbounded cells probe one unit inside their finite endpoint; both-ways
    unbounded falls back to 0.
    """
    edges = np.concatenate(([w_lo], points, [w_hi]))
    los, his = edges[:-1], edges[1:]
    reps = np.empty_like(los)
    finite = np.isfinite(los) & np.isfinite(his)
    reps[finite] = 0.5 * (los[finite] + his[finite])
    left_open = ~np.isfinite(los) & np.isfinite(his)
    reps[left_open] = his[left_open] - 1.0
    right_open = np.isfinite(los) & ~np.isfinite(his)
    reps[right_open] = los[right_open] + 1.0
    reps[~np.isfinite(los) & ~np.isfinite(his)] = 0.0
    return los, his, reps


# ---------------------------------------------------------------------------
# per-cell linear constraints
# ---------------------------------------------------------------------------


def _apply_linear(
    lohi: tuple[float, float] | None,
    a_h: float,
    b_h: float,
    target: float,
    geq: bool,
) -> tuple[float, float] | None:
    """Intersect a cell with {x : a x + b >= target} (or <=)."""
    if lohi is None:
        return None
    lo, hi = lohi
    if a_h == 0.0:
        ok = b_h >= target if geq else b_h <= target
        return lohi if ok else None
    bound = (target - b_h) / a_h
    if geq == (a_h > 0.0):
        lo = max(lo, bound)
    else:
        hi = min(hi, bound)
    return (lo, hi) if lo <= hi else None


def _require_ge(lohi, a_h, b_h, v_h, t, two_sided):
    """Cell restriction for 'statistic significant at critical value t'."""
    if not two_sided:
        return _apply_linear(lohi, a_h, b_h, t, True)
    if v_h > 0.0:
        return _apply_linear(lohi, a_h, b_h, t, True)
    if v_h < 0.0:
        return _apply_linear(lohi, a_h, b_h, -t, False)
    return None  # |value| == 0 on this cell can never clear t > 0


def _require_le(lohi, a_h, b_h, t, two_sided):
    """Cell restriction for 'statistic insignificant at critical value t'."""
    out = _apply_linear(lohi, a_h, b_h, t, False)
    if out is None or not two_sided:
        return out
    return _apply_linear(out, a_h, b_h, -t, True)


def _cell_sd_equal(lohi, v, score, a, b, ordered_s, comp, spec, steps, two):
    cur = lohi
    for rank, h in enumerate(ordered_s):
        if steps is not None:
            t = steps[rank]
        else:
            t = threshold_value(spec, list(ordered_s[rank:]) + comp)
        cur = _require_ge(cur, a[h], b[h], v[h], t, two)
        if cur is None:
            return None
    if comp:
        t0 = (
            steps[len(ordered_s)]
            if steps is not None
            else threshold_value(spec, comp)
        )
        for h in comp:
            cur = _require_le(cur, a[h], b[h], t0, two)
            if cur is None:
                return None
    return cur


def _cell_sd_superset(lohi, v, score, a, b, required, spec, steps, two):
    m = spec.m
    order = sorted(range(m), key=lambda h: (-score[h], h))
    rank_of = {h: r for r, h in enumerate(order)}
    j_star = max(rank_of[h] for h in required)
    cur = lohi
    for j in range(j_star + 1):
        h = order[j]
        t = steps[j] if steps is not None else threshold_value(spec, order[j:])
        cur = _require_ge(cur, a[h], b[h], v[h], t, two)
        if cur is None:
            return None
    return cur


def _cell_su_equal(lohi, v, score, a, b, sel, comp, spec, steps, two):
    t_sel = steps[spec.m - len(sel)]
    cur = lohi
    for h in sel:
        cur = _require_ge(cur, a[h], b[h], v[h], t_sel, two)
        if cur is None:
            return None
    order_c = sorted(comp, key=lambda h: (score[h], h))
    for rank, h in enumerate(order_c):
        cur = _require_le(cur, a[h], b[h], steps[rank], two)
        if cur is None:
            return None
    return cur


def _cell_su_superset(lohi, v, score, a, b, required, spec, steps, two):
    # the event holds as soon as some statistic at or below the lowest
    # required rank clears its own step threshold, so the cell contributes a
    # union of half-space slices rather than a single [l, u]
    m = spec.m
    order = sorted(range(m), key=lambda h: (score[h], h))
    rank_of = {h: r for r, h in enumerate(order)}
    r_min = min(rank_of[h] for h in required)
    out = []
    for j in range(r_min + 1):
        h = order[j]
        piece = _require_ge(lohi, a[h], b[h], v[h], steps[j], two)
        if piece is not None:
            out.append(piece)
    return out


def _pieces_cellwise(a, b, los, his, reps, spec, event, steps):
    """Reference per-cell evaluation; handles any threshold family."""
    two = spec.sided == "two"
    indices = sorted(event.indices)
    comp = [h for h in range(spec.m) if h not in event.indices]
    pieces: list[tuple[float, float]] = []
    for lo0, hi0, t in zip(los, his, reps):
        v = a * t + b
        score = np.abs(v) if two else v
        lohi = (lo0, hi0)
        if spec.procedure == STEP_DOWN:
            if event.kind == "equal":
                ordered_s = sorted(indices, key=lambda h: (-score[h], h))
                cell = _cell_sd_equal(
                    lohi, v, score, a, b, ordered_s, comp, spec, steps, two
                )
            else:
                cell = _cell_sd_superset(
                    lohi, v, score, a, b, indices, spec, steps, two
                )
            if cell is not None:
                pieces.append(cell)
        else:
            if event.kind == "equal":
                cell = _cell_su_equal(
                    lohi, v, score, a, b, indices, comp, spec, steps, two
                )
                if cell is not None:
                    pieces.append(cell)
            else:
                pieces.extend(
                    _cell_su_superset(lohi, v, score, a, b, indices, spec, steps, two)
                )
    return pieces


# ---------------------------------------------------------------------------
# vectorized step-down engines (cardinality-based families)
# ---------------------------------------------------------------------------


def _reduce_bounds(lo, hi, cand, targ, geq, a_rows, b_rows, active):
    """Shared bound reduction over a (rows x cells) constraint block."""
    flat = a_rows == 0.0
    apos = a_rows > 0.0
    low_mask = active & ~flat & (geq == apos)
    upp_mask = active & ~flat & (geq != apos)
    if cand.shape[0]:
        lo = np.maximum(lo, np.where(low_mask, cand, -np.inf).max(axis=0))
        hi = np.minimum(hi, np.where(upp_mask, cand, np.inf).min(axis=0))
    flat_bad = (
        active & flat & np.where(geq, b_rows < targ, b_rows > targ)
    ).any(axis=0)
    return lo, hi, flat_bad


def _pieces_sd_equal_vec(a, b, sel, comp, los, his, reps, spec, steps, two):
    m = spec.m
    # thresholds faced by insignificant statistics never depend on the cell
    # ordering, so they collapse to constants
    w_lo, w_hi = -_INF, _INF
    if comp:
        t0 = steps[len(sel)]
        for h in comp:
            if a[h] > 0.0:
                w_hi = min(w_hi, (t0 - b[h]) / a[h])
                if two:
                    w_lo = max(w_lo, (-t0 - b[h]) / a[h])
            elif a[h] < 0.0:
                w_lo = max(w_lo, (t0 - b[h]) / a[h])
                if two:
                    w_hi = min(w_hi, (-t0 - b[h]) / a[h])
            else:
                ok = abs(b[h]) <= t0 if two else b[h] <= t0
                if not ok:
                    return []
    sel = np.asarray(sel, dtype=int)
    a_s = a[sel]
    b_s = b[sel]
    thr_s = steps[: sel.size]
    pieces: list[tuple[float, float]] = []
    for start in range(0, reps.size, _BLOCK):
        r = reps[start : start + _BLOCK]
        k = r.size
        lo = np.maximum(los[start : start + _BLOCK], w_lo)
        hi = np.minimum(his[start : start + _BLOCK], w_hi)
        values = a_s[:, None] * r[None, :] + b_s[:, None]
        score = np.abs(values) if two else values
        order = np.argsort(-score, axis=0, kind="stable")
        ranks = np.empty_like(order)
        np.put_along_axis(
            ranks, order, np.broadcast_to(np.arange(sel.size)[:, None], (sel.size, k)),
            axis=0,
        )
        thr = thr_s[ranks]
        if two:
            positive = values > 0.0
            dead = (~positive & ~(values < 0.0)).any(axis=0)
            targ = np.where(positive, thr, -thr)
            geq = positive
        else:
            dead = np.zeros(k, dtype=bool)
            targ = thr
            geq = np.ones_like(thr, dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = (targ - b_s[:, None]) / a_s[:, None]
        lo, hi, flat_bad = _reduce_bounds(
            lo, hi, cand, targ, geq, a_s[:, None], b_s[:, None],
            np.ones_like(geq, dtype=bool),
        )
        ok = ~dead & ~flat_bad & (lo <= hi)
        pieces.extend(zip(lo[ok].tolist(), hi[ok].tolist()))
    return pieces


def _pieces_sd_superset_vec(a, b, required, los, his, reps, spec, steps, two):
    m = spec.m
    req = np.asarray(required, dtype=int)
    pieces: list[tuple[float, float]] = []
    for start in range(0, reps.size, _BLOCK):
        r = reps[start : start + _BLOCK]
        k = r.size
        lo = los[start : start + _BLOCK].copy()
        hi = his[start : start + _BLOCK].copy()
        values = a[:, None] * r[None, :] + b[:, None]
        score = np.abs(values) if two else values
        v_star = score[req].min(axis=0)
        counts = (score >= v_star[None, :]).sum(axis=0)
        j_max = int(counts.max())
        # only the prefix of ranks down to the lowest required statistic is
        # constrained; pull those rows out instead of fully sorting
        part = np.argpartition(-score, j_max - 1, axis=0)[:j_max]
        top = np.take_along_axis(score, part, axis=0)
        local = np.argsort(-top, axis=0, kind="stable")
        rows = np.take_along_axis(part, local, axis=0)
        a_r = a[rows]
        b_r = b[rows]
        active = np.arange(j_max)[:, None] < counts[None, :]
        thr = np.broadcast_to(steps[:j_max, None], (j_max, k))
        if two:
            v_rows = np.take_along_axis(values, rows, axis=0)
            positive = v_rows > 0.0
            dead = (active & ~positive & ~(v_rows < 0.0)).any(axis=0)
            targ = np.where(positive, thr, -thr)
            geq = positive
        else:
            dead = np.zeros(k, dtype=bool)
            targ = thr
            geq = np.ones((j_max, k), dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = (targ - b_r) / a_r
        lo, hi, flat_bad = _reduce_bounds(lo, hi, cand, targ, geq, a_r, b_r, active)
        ok = ~dead & ~flat_bad & (lo <= hi)
        pieces.extend(zip(lo[ok].tolist(), hi[ok].tolist()))
    return pieces


# ---------------------------------------------------------------------------
# initial window (necessary restrictions) and the public entry point
# ---------------------------------------------------------------------------


def _initial_window(a, b, spec, event, steps):
    """Necessary linear restrictions on x_s, folded into one interval.

    Every returned bound is implied by membership, so clipping the sweep to
    this window never changes the computed support.  Restrictions that are
    not convex in x_s (two-sided significance of a required effect) are
    skipped.
    """
    lo, hi = -_INF, _INF
    empty = False
    two = spec.sided == "two"
    indices = sorted(event.indices)
    comp = [h for h in range(spec.m) if h not in event.indices]

    def clip(a_h, b_h, t, geq):
        nonlocal lo, hi, empty
        if a_h > 0.0:
            if geq:
                lo = max(lo, (t - b_h) / a_h)
            else:
                hi = min(hi, (t - b_h) / a_h)
        elif a_h < 0.0:
            if geq:
                hi = min(hi, (t - b_h) / a_h)
            else:
                lo = max(lo, (t - b_h) / a_h)
        elif (b_h < t) if geq else (b_h > t):
            empty = True

    if spec.procedure == STEP_DOWN and event.kind == "equal":
        if comp:
            t0 = steps[len(indices)] if steps is not None else threshold_value(spec, comp)
            for h in comp:
                clip(a[h], b[h], t0, geq=False)
                if two:
                    clip(a[h], b[h], -t0, geq=True)
        if not two and indices:
            if steps is not None:
                t_crit = steps[len(indices) - 1]
            else:
                t_crit = min(threshold_value(spec, [h] + comp) for h in indices)
            for h in indices:
                clip(a[h], b[h], t_crit, geq=True)
    elif spec.procedure == STEP_DOWN:
        if not two:
            for h in indices:
                t = steps[-1] if steps is not None else threshold_value(spec, [h])
                clip(a[h], b[h], t, geq=True)
    elif event.kind == "equal":
        t_sel = steps[spec.m - len(indices)] if indices else None
        if not two and indices:
            for h in indices:
                clip(a[h], b[h], t_sel, geq=True)
        if comp:
            t_max = steps[len(comp) - 1]
            for h in comp:
                clip(a[h], b[h], t_max, geq=False)
                if two:
                    clip(a[h], b[h], -t_max, geq=True)
    else:
        if not two:
            for h in indices:
                clip(a[h], b[h], steps[0], geq=True)

    if empty or lo > hi:
        return 1.0, -1.0
    return lo, hi


def conditional_support(
    d: Decomposition,
    spec: ThresholdSpec,
    event: SelectionEvent,
    *,
    prefilter: bool = True,
    accelerate: bool = False,
) -> IntervalUnion:
    """Closure of the x_s values compatible with the selection event.

    ``prefilter`` clips the sweep to an interval of necessary conditions;
    ``accelerate`` additionally restricts the breakpoint search to the lines
    whose ordering can matter for equal events and, for one-sided step-down
    equal events, enumerates their crossings with a neighbor sweep instead
    of all-pairs enumeration.  Neither switch changes the returned union.

    Raises :class:`DegenerateSupportError` when the event admits no value at
    all, and :class:`InconsistentEventError` when the observed statistic is
    not a member of the computed support (the event does not describe the
    data it was derived from).
    """
    a = np.asarray(d.omega_col, dtype=float)
    b = np.asarray(d.z, dtype=float)
    m = spec.m
    if a.shape != (m,) or b.shape != (m,):
        raise ValueError("decomposition size does not match spec.m")
    if event.kind == "equal" and not event.indices:
        raise ValueError("conditioning on an empty significant set is not supported")
    if any(not 0 <= h < m for h in event.indices):
        raise ValueError("event indices out of range")
    two = spec.sided == "two"
    indices = sorted(event.indices)
    comp = [h for h in range(m) if h not in event.indices]
    steps = thresholds_by_step(spec)
    if steps is None and spec.procedure == STEP_UP:
        raise ValueError("step-up support requires per-step thresholds")

    if prefilter:
        w_lo, w_hi = _initial_window(a, b, spec, event, steps)
    else:
        w_lo, w_hi = -_INF, _INF
    if w_lo > w_hi:
        raise DegenerateSupportError("the selection event admits no value of x_s")

    if accelerate and event.kind == "equal":
        order_rows = indices if spec.procedure == STEP_DOWN else comp
        if two:
            points = _breakpoints_brute(
                a, b, order_rows, True, w_lo, w_hi, axis_rows=range(m)
            )
        elif spec.procedure == STEP_DOWN:
            points = _sweep_breakpoints(a, b, order_rows, w_lo, w_hi)
        else:
            points = _breakpoints_brute(a, b, order_rows, False, w_lo, w_hi)
    else:
        points = _breakpoints_brute(a, b, range(m), two, w_lo, w_hi)

    los, his, reps = _partition(points, w_lo, w_hi)

    if spec.procedure == STEP_DOWN and steps is not None:
        if event.kind == "equal":
            pieces = _pieces_sd_equal_vec(
                a, b, indices, comp, los, his, reps, spec, steps, two
            )
        else:
            pieces = _pieces_sd_superset_vec(
                a, b, indices, los, his, reps, spec, steps, two
            )
    else:
        pieces = _pieces_cellwise(a, b, los, his, reps, spec, event, steps)

    union = merge_intervals(pieces)
    if union.is_empty:
        raise DegenerateSupportError("the selection event admits no value of x_s")
    if not union.contains(d.x_s, tol=1e-9 * max(1.0, abs(d.x_s))):
        raise InconsistentEventError(
            f"observed statistic {d.x_s!r} is outside the support of the "
            f"{event.kind} event"
        )
    return union
