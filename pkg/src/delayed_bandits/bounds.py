"""Closed-form regret upper bounds for SE, PSE and OPSE.

Quantile minimisations are solved over a fixed grid ``q in {0.01, ..., 1.00}``
augmented with the exact CDF levels of each law's atoms (so packet-loss and
table laws hit their breakpoints exactly).  For the per-arm forms the
objective separates once the value of the ``max`` term is fixed, so we
enumerate candidate max values and let each arm take its largest feasible
quantile.  Natural logarithms throughout.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .distributions import INFINITY

GRID = np.round(np.arange(1, 101) / 100.0, 2)

KINDS = ("se_per_arm", "se_single_q", "pse", "opse")

_SE_PER_ARM = 40.0
_SE_SINGLE = 325.0
_PSE = 290.0
_OPSE = 1166.0


def _candidates(law) -> np.ndarray:
    qs = set(GRID.tolist())
    atoms = getattr(law, "atoms", None)
    if atoms is not None:
        acc = 0.0
        for d, p in atoms():
            acc += p
            if d != INFINITY and 0.0 < acc <= 1.0:
                qs.add(min(1.0, acc))
    return np.array(sorted(qs))


def _quantiles(law, qs: np.ndarray) -> np.ndarray:
    return np.array([float(law.quantile(float(q))) for q in qs])


def _optimal_index(gaps: Sequence[float]) -> int:
    for i, g in enumerate(gaps):
        if g == 0:
            return i
    raise ValueError("one arm must have gap exactly 0")


def _per_arm_min(coef: np.ndarray, gaps: np.ndarray, tables, shift: float, scale: float):
    """min over q vector of sum_i coef_i / q_i + scale * max_i (d_i(q_i) + shift) * gap_i.

    ``tables`` holds ``(qs, ds)`` per arm, with ds nondecreasing in qs.
    Returns (value, chosen q per arm).
    """
    vals = []
    for (qs, ds), g in zip(tables, gaps):
        vals.append((ds + shift) * g)
    cands = np.unique(np.concatenate([v[np.isfinite(v)] for v in vals]))
    if cands.size == 0:
        return math.inf, None
    total = np.zeros(cands.size)
    choice = []
    for c, (qs, _), v in zip(coef, tables, vals):
        idx = np.searchsorted(v, cands, side="right") - 1
        feasible = idx >= 0
        q_pick = np.where(feasible, qs[np.clip(idx, 0, None)], np.nan)
        total += np.where(feasible, c / q_pick, np.inf)
        choice.append(q_pick)
    total += scale * cands
    best = int(np.argmin(total))
    if not np.isfinite(total[best]):
        return math.inf, None
    return float(total[best]), [float(q[best]) for q in choice]


def bound_with_argmin(kind: str, gaps: Sequence[float], delay_dists: Sequence, T: int):
    """Bound value plus the minimising quantile(s) (None where not applicable)."""
    gaps = np.asarray(gaps, dtype=float)
    if len(gaps) != len(delay_dists):
        raise ValueError("need one delay law per arm")
    if T < 2:
        raise ValueError("T must be >= 2")
    if np.any(gaps < 0):
        raise ValueError("gaps must be nonnegative")
    if not np.any(gaps > 0):
        return 0.0, None
    L = math.log(T)
    K = len(gaps)
    star = _optimal_index(gaps)
    sub = [i for i in range(K) if gaps[i] > 0]
    sub_gaps = gaps[sub]

    if kind == "se_single_q":
        qs = np.unique(np.concatenate([_candidates(delay_dists[i]) for i in range(K)]))
        worst = np.max(np.stack([_quantiles(delay_dists[i], qs) for i in range(K)]), axis=0)
        values = _SE_SINGLE * L * np.sum(1.0 / sub_gaps) / qs + 4.0 * worst
        best = int(np.argmin(values))
        return float(values[best]), float(qs[best])

    if kind == "opse":
        d_sub = max(float(delay_dists[i].quantile(1.0 - gaps[i] / 4.0)) for i in sub)
        d_star = float(delay_dists[star].quantile(1.0 - sub_gaps.min() / 4.0))
        value = _OPSE * L * np.sum(1.0 / sub_gaps) + 4.0 * math.log(K) * (d_sub + d_star)
        return float(value), None

    tables = []
    for i in sub:
        qs = _candidates(delay_dists[i])
        tables.append((qs, _quantiles(delay_dists[i], qs)))

    if kind == "pse":
        coef = _PSE * L / sub_gaps
        return _per_arm_min(coef, sub_gaps, tables, 0.0, L * math.log(K))

    if kind == "se_per_arm":
        best_val, best_q = math.inf, None
        coef = _SE_PER_ARM * L / sub_gaps
        star_qs = _candidates(delay_dists[star])
        star_ds = _quantiles(delay_dists[star], star_qs)
        for q_star, d_star in zip(star_qs, star_ds):
            if not np.isfinite(d_star):
                continue
            val, qv = _per_arm_min(coef, sub_gaps, tables, d_star, math.log(K))
            val += float(np.sum(coef)) / q_star
            if val < best_val:
                best_val, best_q = val, (float(q_star), qv)
        return best_val, best_q

    raise ValueError(f"unknown bound kind {kind!r}; expected one of {KINDS}")


def bound_value(kind: str, gaps: Sequence[float], delay_dists: Sequence, T: int) -> float:
    """Right-hand side of the regret theorem ``kind`` for this instance.

    kinds:
      se_per_arm   min_q sum 40 L/D_i (1/q_i + 1/q_*) + log K max (d_i(q_i)+d_*(q_*)) D_i
      se_single_q  min_q sum 325 L/(q D_i) + 4 max_i d_i(q)
      pse          min_q sum 290 L/(q_i D_i) + L log K max d_i(q_i) D_i
      opse         sum 1166 L/D_i + 4 log K (max d_i(1 - D_i/4) + d_*(1 - D_min/4))

    with L = log T, D the gaps, sums and maxima over sub-optimal arms unless
    noted.  All-zero gaps give 0.
    """
    return bound_with_argmin(kind, gaps, delay_dists, T)[0]


def instance_bound(kind: str, instance, T: int) -> float:
    return bound_value(kind, instance.gaps, [a.marginal_delay() for a in instance.arms], T)
