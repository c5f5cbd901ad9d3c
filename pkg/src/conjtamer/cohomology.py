"""Approximate solutions of u - u∘f = log Df by averaging the cocycle over
group balls, defect measurement, and conversion of solutions into
conjugating diffeomorphisms (including interpolated paths of conjugates).

Ball averages carry an exact re-evaluator so that defects and telescoping
identities can be checked off-grid without interpolation error.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .action import Action
from .diffeo import Diffeo
from .errors import (
    ConjTamerError,
    NoAdmissibleRadius,
    NonFinite,
    NotPeriodic,
    SizeOverflow,
)
from .gridfn import GridFunction
from .space import Space
from .words import ABELIAN, Presentation, enumerate_ball, select_shell_radii

Array = np.ndarray

_FIELD_CAP = 4 * 10**7  # max (n^d) * points entries in a vectorized ball sum


# ---------------------------------------------------------------------------
# Ball sums.


def birkhoff_field(action: Action, n_max: int, x) -> Array:
    """Cumulative positive-ball cocycle sums: row n holds
    sum_{f in B+(n)} log Df (x) for n = 0..n_max (row 0 is zero).

    Words f = g1^{k1}...gd^{kd} act with the last generator applied first;
    log-derivatives accumulate along orbits through the cocycle identity.
    """
    if action.presentation.kind != ABELIAN:
        raise ConjTamerError("positive-ball averaging needs a Z^d presentation")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = action.rank
    m = x.size
    if n_max < 1:
        raise ValueError("need n_max >= 1")
    if (n_max**d) * m > _FIELD_CAP:
        raise SizeOverflow(f"ball sum of size {n_max}^{d} x {m} exceeds cap")
    out = np.zeros((n_max + 1, m))
    if d == 0:
        return out
    if d == 1:
        g = action.gens[0]
        c_cum = np.zeros(m)  # log D(g^k)(x)
        p = x
        acc = np.zeros(m)
        for n in range(1, n_max + 1):
            acc = acc + c_cum
            out[n] = acc
            if n < n_max:
                c_cum = c_cum + g.log_deriv(p)
                p = g.eval_lift(p)
        return out
    if d == 2:
        g1, g2 = action.gens
        # inner orbit under g2
        q = x
        c2_cum = np.zeros(m)
        rows = np.empty((n_max, n_max, m))
        for k2 in range(n_max):
            c1_cum = np.zeros(m)
            p = q
            for k1 in range(n_max):
                rows[k1, k2] = c2_cum + c1_cum
                if k1 < n_max - 1:
                    c1_cum = c1_cum + g1.log_deriv(p)
                    p = g1.eval_lift(p)
            if k2 < n_max - 1:
                c2_cum = c2_cum + g2.log_deriv(q)
                q = g2.eval_lift(q)
        pref = rows.cumsum(axis=0).cumsum(axis=1)
        for n in range(1, n_max + 1):
            out[n] = pref[n - 1, n - 1]
        return out
    # generic d: walk every exponent vector, bucket by max exponent
    from .words import enumerate_positive_ball

    ball = enumerate_positive_ball(d, n_max)
    buckets = np.zeros((n_max, m))
    for row, word in zip(ball.exponents, ball.elements):
        c, _ = action.word_cocycle(word.letters, x)
        buckets[int(np.max(row))] += c
    np.cumsum(buckets, axis=0, out=buckets)
    out[1:] = buckets
    return out


def empirical_measure_integral(action: Action, i: int, n: int, x):
    """(1/n^d) * sum over the positive ball of log Df_i at the orbit points
    of x.  Independent recursion over exponent digits (innermost generator
    applied first), kept separate from birkhoff_field on purpose."""
    if action.presentation.kind != ABELIAN:
        raise ConjTamerError("empirical measures need a Z^d presentation")
    d = action.rank
    if n**d > _FIELD_CAP:
        raise SizeOverflow(f"positive ball {n}^{d} exceeds cap")
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    scalar = np.ndim(x) == 0
    ci = action.gens[i].log_deriv

    def rec(j: int, y: Array) -> Array:
        if j == 0:
            return ci(y)
        g = action.gens[j - 1]
        total = np.zeros_like(y)
        p = y
        for k in range(n):
            total = total + rec(j - 1, p)
            if k < n - 1:
                p = g.eval_lift(p)
        return total

    result = rec(d, x_arr) / float(n**d)
    return float(result[0]) if scalar else result


# ---------------------------------------------------------------------------
# Solutions and defects.


@dataclass
class CohomSolution:
    """An approximate solution u of u - u∘f = log Df for every generator.

    u is normalized so that the piecewise-linear density exp(u) integrates to
    one; defects are exact grid suprema of |u - u∘f - log Df| with the argmax
    location per generator, plus a once-refined (midpoint) re-measurement.
    """

    u: GridFunction
    defect_per_generator: Dict[str, float]
    defect_locations: Dict[str, float]
    defect_refined: Dict[str, float]
    construction: str
    extras: dict = field(default_factory=dict)

    @property
    def defect(self) -> float:
        if not self.defect_per_generator:
            return 0.0
        return max(self.defect_per_generator.values())


def cocycle_defect(
    u: GridFunction, action: Action
) -> Tuple[Dict[str, float], Dict[str, float]]:
    """Exact grid suprema of |u - u∘f - log Df| per generator, with argmax
    locations.  u is evaluated through its exact backing when present."""
    tn = action.space.track_nodes()
    u_t = u.samples
    defects: Dict[str, float] = {}
    locations: Dict[str, float] = {}
    for name, g in zip(action.names, action.gens):
        d = u_t - u(g.eval_lift(tn)) - g.log_deriv.samples
        k = int(np.argmax(np.abs(d)))
        defects[name] = float(np.abs(d[k]))
        locations[name] = float(tn[k])
    return defects, locations


def _defect_refined(u: GridFunction, action: Action) -> Dict[str, float]:
    """Defect suprema re-measured with midpoints added to the grid."""
    tn = action.space.track_nodes()
    fine = np.sort(np.concatenate([tn, tn + 0.5 * action.space.h]))
    fine = fine[fine <= 1.0]
    out: Dict[str, float] = {}
    for name, g in zip(action.names, action.gens):
        d = u(fine) - u(g.eval_lift(fine)) - g.log_deriv(fine)
        out[name] = float(np.max(np.abs(d)))
    return out


def _exp_cell_integrals(samples_full: Array, h: float) -> Array:
    """Exact cell integrals of exp(piecewise-linear samples)."""
    a = samples_full[:-1]
    b = samples_full[1:]
    db = b - a
    small = np.abs(db) < 1e-12
    safe = np.where(small, 1.0, db)
    out = h * np.exp(a) * np.expm1(safe) / safe
    out_small = h * np.exp(a) * (1.0 + 0.5 * db)
    return np.where(small, out_small, out)


def log_density_normalizer(space: Space, samples: Array) -> float:
    """C with integral of exp(samples + C) = 1 (piecewise-linear samples)."""
    full = (
        np.concatenate([samples, samples[:1]]) if space.is_circle else samples
    )
    return -float(np.log(np.sum(_exp_cell_integrals(full, space.h))))


def _normalized(space: Space, u: GridFunction) -> GridFunction:
    return u + log_density_normalizer(space, u.samples)


def birkhoff_solution(action: Action, n: int) -> CohomSolution:
    """u_n = average of log Df over the positive ball B+(n), normalized."""
    space = action.space
    tn = space.track_nodes()
    scale = float(n**action.rank)
    samples = birkhoff_field(action, n, tn)[n] / scale
    u_fn = lambda y: birkhoff_field(action, n, y)[n] / scale
    u = _normalized(space, GridFunction(space, samples, u_fn))
    defects, locations = cocycle_defect(u, action)
    return CohomSolution(
        u=u,
        defect_per_generator=defects,
        defect_locations=locations,
        defect_refined=_defect_refined(u, action),
        construction=f"birkhoff-positive-ball(n={n})",
    )


def nilpotent_average_solution(
    action: Action,
    presentation: Presentation,
    shell_index: int,
    growth_constant: Optional[float] = None,
    k_max: int = 12,
    delta: float = 0.1,
) -> CohomSolution:
    """u = average of log Df over the full ball B(k), k taken from the
    admissible shell radii; the defect bound is decomposed into the
    small-exponent term C*N0*max|c|/k and the large-exponent term M*C*delta
    from the bounded-generation argument."""
    selection = select_shell_radii(
        presentation,
        k_max,
        growth_constant
        if growth_constant is not None
        else select_shell_radii(presentation, k_max, float("inf")).minimal_c
        * (1.0 + 1e-9),
    )
    if not selection.radii:
        raise NoAdmissibleRadius(
            f"no admissible radius up to {k_max}; minimal admissible growth "
            f"constant is {selection.minimal_c:.6g}"
        )
    if not (0 <= shell_index < len(selection.radii)):
        raise NoAdmissibleRadius(
            f"shell_index {shell_index} outside the {len(selection.radii)} "
            f"admissible radii"
        )
    k = selection.radii[shell_index]
    space = action.space
    tn = space.track_nodes()
    ball = enumerate_ball(presentation, k + 1)
    sizes = np.cumsum(ball.sphere_sizes)
    n_inner = int(sizes[k])

    def ball_average(x: Array) -> Array:
        acc = np.zeros_like(x)
        for word in ball.elements[:n_inner]:
            c, _ = action.word_cocycle(word.letters, x)
            acc += c
        return acc / n_inner

    max_word_c = 0.0
    for word in ball.elements:
        c, _ = action.word_cocycle(word.letters, tn)
        max_word_c = max(max_word_c, float(np.max(np.abs(c))))

    u = _normalized(space, GridFunction(space, ball_average(tn), ball_average))
    defects, locations = cocycle_defect(u, action)

    # measured constants of the error decomposition
    c_used = selection.measured[k - 1]
    m_bound = presentation.bounded_generation or 1
    n_cap = max(2, m_bound * k)
    n0 = _measure_exactness_onset(action, presentation, delta, n_cap)
    max_gen_c = max(g.log_deriv.sup_abs() for g in action.gens)
    small_term = c_used * n0 * max_gen_c / k
    large_term = m_bound * c_used * delta
    extras = {
        "shell_radius": k,
        "growth_constant": float(c_used),
        "bounded_generation_m": m_bound,
        "delta": delta,
        "n0": n0,
        "max_generator_cocycle": max_gen_c,
        "max_ball_cocycle": max_word_c,
        "small_exponent_term": small_term,
        "large_exponent_term": large_term,
        "defect_bound": small_term + large_term,
        "normal_form_alphabet": list(presentation.generators),
    }
    return CohomSolution(
        u=u,
        defect_per_generator=defects,
        defect_locations=locations,
        defect_refined=_defect_refined(u, action),
        construction=f"nilpotent-shell(k={k})",
        extras=extras,
    )


def _measure_exactness_onset(
    action: Action, presentation: Presentation, delta: float, n_cap: int
) -> int:
    """Smallest N0 such that |(1/n) log D(g^n)| < delta on the grid for every
    metric generator and all n in [N0, n_cap]; n_cap when never reached."""
    tn = action.space.track_nodes()
    worst = 1
    for j in presentation.metric_generators:
        for g in (action.gens[j], action.inverses[j]):
            p = tn
            acc = np.zeros_like(tn)
            onset = 1
            for n in range(1, n_cap + 1):
                acc = acc + g.log_deriv(p)
                p = g.eval_lift(p)
                if float(np.max(np.abs(acc))) / n >= delta:
                    onset = n + 1
            worst = max(worst, onset)
    return worst


# ---------------------------------------------------------------------------
# From solutions to conjugacies.


def conjugacy_from_log_density(u: GridFunction) -> Diffeo:
    """phi with log Dphi = u + C, C = -log integral exp(u): phi(x) is the
    exact integral of the exponential of the piecewise-linear u, normalized;
    value, log-derivative and inverse all evaluate in closed form."""
    space = u.space
    samples = u.samples
    if not np.all(np.isfinite(samples)):
        raise NonFinite("log-density has non-finite samples")
    full = (
        np.concatenate([samples, samples[:1]]) if space.is_circle else samples
    )
    cells = _exp_cell_integrals(full, space.h)
    cum = np.concatenate([[0.0], np.cumsum(cells)])
    total = cum[-1]
    values = cum / total
    values[-1] = 1.0
    c_norm = -math.log(total)
    nodes = space.nodes
    h = space.h
    grid_size = space.grid_size
    slopes = (full[1:] - full[:-1]) / h
    small = np.abs(full[1:] - full[:-1]) < 1e-12

    def value_fn(x):
        x = np.asarray(x, dtype=float)
        k = np.floor(x) if space.is_circle else 0.0
        x0 = np.clip(x - k, 0.0, 1.0)
        idx = np.clip((x0 * grid_size).astype(int), 0, grid_size - 1)
        t = x0 - nodes[idx]
        a = full[idx]
        s = slopes[idx]
        lin = np.exp(a) * t * (1.0 + 0.5 * s * t)
        gen = np.exp(a) * np.expm1(np.where(small[idx], 1.0, s) * t) / np.where(
            small[idx], 1.0, s
        )
        part = np.where(small[idx], lin, gen)
        return (cum[idx] + part) / total + k

    def inverse_fn(y):
        y = np.asarray(y, dtype=float)
        k = np.floor(y) if space.is_circle else 0.0
        y0 = np.clip(y - k, 0.0, 1.0)
        target = y0 * total
        idx = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, grid_size - 1)
        rem = target - cum[idx]
        a = full[idx]
        s = np.where(small[idx], 1.0, slopes[idx])
        t_gen = np.log1p(s * rem * np.exp(-a)) / s
        t_lin = rem * np.exp(-a)
        t = np.where(small[idx], t_lin, t_gen)
        return nodes[idx] + np.clip(t, 0.0, h) + k

    ld = GridFunction(space, samples + c_norm)
    logd_fn = lambda x: ld.interp(x)
    return Diffeo(
        space,
        GridFunction(space, ld.samples, logd_fn),
        values,
        value_fn,
        inverse_fn,
    )


# ---------------------------------------------------------------------------
# Paths of conjugates.


@dataclass
class PathSample:
    """One point of the interpolated conjugacy path.

    c1_gap: max over generators of the sup of the interpolated defect field
    (equals sup|log D(conjugated generator)| up to grid interpolation, and
    matches defect(u_n) exactly at integer t).  c1_step records the per-
    generator C1 distance to the previous sample (None on the first)."""

    t: float
    phi: Diffeo
    conjugated: Action
    c1_gap: float
    c1_gap_track: float
    gap_per_generator: Dict[str, float] = field(default_factory=dict)
    c1_step: Optional[Dict[str, Tuple[float, float]]] = None


def _thread_count() -> int:
    raw = os.environ.get("CONJ_TAMER_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def path_of_conjugates(
    action: Action, n_max: int, steps_per_unit: int
) -> List[PathSample]:
    """Samples t in {1, 1+1/steps, ..., n_max} of the path phi_t built from
    v_t = (1-s) u_n + s u_{n+1} + C_t; each sample carries the conjugated
    action and the interpolated defect gap."""
    if n_max < 1 or steps_per_unit < 1:
        raise ValueError("need n_max >= 1 and steps_per_unit >= 1")
    space = action.space
    tn = space.track_nodes()
    scale = lambda n: float(n**action.rank)

    fields = {"x": birkhoff_field(action, n_max, tn)}
    for name, g in zip(action.names, action.gens):
        fields[name] = birkhoff_field(action, n_max, g.eval_lift(tn))

    u_samp = [None] + [fields["x"][n] / scale(n) for n in range(1, n_max + 1)]
    d_fields: List[Optional[Array]] = [None]
    for n in range(1, n_max + 1):
        rows = []
        for name, g in zip(action.names, action.gens):
            rows.append(
                u_samp[n]
                - fields[name][n] / scale(n)
                - g.log_deriv.samples
            )
        d_fields.append(np.stack(rows))

    total_steps = (n_max - 1) * steps_per_unit
    js = list(range(total_steps + 1))

    def build(j: int) -> PathSample:
        n, rem = divmod(j, steps_per_unit)
        n += 1
        s = rem / steps_per_unit
        if n >= n_max:
            n, s = n_max - 1, 1.0
        t = n + s
        ut = (1.0 - s) * u_samp[n] + s * u_samp[n + 1]
        phi = conjugacy_from_log_density(GridFunction(space, ut))
        conjugated = action.conjugated(phi)
        gap_field = (1.0 - s) * d_fields[n] + s * d_fields[n + 1]
        per_gen = {
            name: float(np.max(np.abs(gap_field[i])))
            for i, name in enumerate(action.names)
        }
        c1_gap = float(np.max(np.abs(gap_field)))
        c1_track = max(g.log_deriv.sup_abs() for g in conjugated.gens)
        return PathSample(
            t=t,
            phi=phi,
            conjugated=conjugated,
            c1_gap=c1_gap,
            c1_gap_track=c1_track,
            gap_per_generator=per_gen,
        )

    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(build, js))
    else:
        samples = [build(j) for j in js]

    from .diffeo import c1_distance

    for prev, cur in zip(samples, samples[1:]):
        cur.c1_step = {
            name: c1_distance(pg, cg)
            for name, pg, cg in zip(action.names, prev.conjugated.gens, cur.conjugated.gens)
        }
    return samples


# ---------------------------------------------------------------------------
# Invariant means.


def invariant_mean_log_derivative(
    f: Diffeo,
    orbit=None,
    x: Optional[float] = None,
    n: Optional[int] = None,
    tol: float = 1e-8,
) -> float:
    """Mean of log Df along a periodic orbit, or the n-step average along the
    forward orbit of x.  Exactly one mode must be given."""
    if orbit is not None:
        pts = np.asarray(orbit, dtype=float)
        if pts.ndim != 1 or pts.size < 1:
            raise NotPeriodic("orbit must be a nonempty 1-d point list")
        img = f(pts)
        expected = np.roll(pts, -1)
        gap = np.abs(img - expected)
        if f.space.is_circle:
            gap = np.minimum(gap, 1.0 - gap)
        if float(np.max(gap)) > tol:
            raise NotPeriodic(
                f"points are not an f-orbit (max step error {np.max(gap):.2e})"
            )
        return float(np.mean(f.log_deriv(pts)))
    if x is None or n is None or n < 1:
        raise ValueError("need orbit=... or x=..., n>=1")
    y = np.asarray([x], dtype=float)
    acc = 0.0
    for _ in range(int(n)):
        acc += float(f.log_deriv(y)[0])
        y = f.eval_lift(y)
    return acc / float(n)
