"""Periodic-orbit inventory, hyperbolic-point flattening, and detection of
resilient interval pairs.

Flattening conjugates by a map whose germ at each flagged point is
x_j ± r (t/r)^(1/alpha); the conjugated maps stay C^1 with fixed-point
multipliers raised to the power 1/alpha, while the flattening map itself has
infinite derivative at the flagged points and is kept in its own class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .action import Action
from .diffeo import Diffeo
from .errors import InfiniteHyperbolicSet, NotCircle
from .gridfn import GridFunction
from .space import Space
from .words import FREE, Letter, Word

Array = np.ndarray

PARABOLIC_TOL = 1e-6  # |log multiplier| below this counts as parabolic
_GERM_LIN = 1e-9  # offset below which the germ arithmetic is linearized
_SNAP_TOL = 1e-8  # distance for snapping images of flagged points


# ---------------------------------------------------------------------------
# Periodic points.


@dataclass(frozen=True)
class PeriodicOrbit:
    """A periodic orbit: points in forward order from the smallest
    representative, the least period, and the one-cycle multiplier."""

    points: Tuple[float, ...]
    period: int
    multiplier: float

    @property
    def log_multiplier(self) -> float:
        return math.log(self.multiplier)

    @property
    def parabolic(self) -> bool:
        return abs(self.log_multiplier) < PARABOLIC_TOL


def _iterate_lift(f: Diffeo, x: Array, n: int) -> Array:
    y = np.array(x, dtype=float)
    for _ in range(n):
        y = f.eval_lift(y)
    return y


def _point_distance(space: Space, a: float, b: float) -> float:
    d = abs(a - b)
    return min(d, 1.0 - d) if space.is_circle else d


def orbit_multiplier(f: Diffeo, x: float, period: int) -> float:
    """Df^period at x through the log-derivative chain rule."""
    lm = 0.0
    y = np.asarray([x], dtype=float)
    for _ in range(period):
        lm += float(f.log_deriv(y)[0])
        y = f.eval_lift(y)
    return math.exp(lm)


def find_periodic_points(
    f: Diffeo, n_max: int, tol: float = 1e-10
) -> List[PeriodicOrbit]:
    """All periodic orbits of least period <= n_max, one record per orbit,
    sorted by (period, smallest point).  Powers that are identity-like on the
    grid (sup |f^N - id| below tol) contribute no orbits: every point would
    be periodic and no finite inventory exists."""
    space = f.space
    nodes = space.nodes
    merge_tol = 2.0 / space.grid_size
    accepted: List[PeriodicOrbit] = []

    def already_known(x: float) -> bool:
        return any(
            _point_distance(space, x, p) <= merge_tol
            for orb in accepted
            for p in orb.points
        )

    for period in range(1, n_max + 1):
        img = _iterate_lift(f, nodes, period)
        disp = img - nodes
        shifts = (
            range(
                int(math.ceil(disp.min() - 1e-12)),
                int(math.floor(disp.max() + 1e-12)) + 1,
            )
            if space.is_circle
            else (0,)
        )
        roots: List[float] = []
        identity_like = False
        for m in shifts:
            d = disp - m
            if float(np.max(np.abs(d))) < tol:
                identity_like = True
                break
            hit = np.abs(d) <= tol
            roots.extend(float(v) for v in nodes[hit])
            flip = np.nonzero((d[:-1] * d[1:] < 0.0) & ~hit[:-1] & ~hit[1:])[0]
            if flip.size:
                lo = nodes[flip].copy()
                hi = nodes[flip + 1].copy()
                dlo = d[flip].copy()
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    dm = _iterate_lift(f, mid, period) - mid - m
                    left = (dm * dlo) > 0.0
                    lo = np.where(left, mid, lo)
                    dlo = np.where(left, dm, dlo)
                    hi = np.where(left, hi, mid)
                roots.extend(float(v) for v in 0.5 * (lo + hi))
        if identity_like:
            continue
        cleaned: List[float] = []
        for x in sorted(roots):
            x = x % 1.0 if space.is_circle else x
            if cleaned and _point_distance(space, x, cleaned[-1]) <= merge_tol:
                continue
            cleaned.append(x)
        for x in cleaned:
            if already_known(x):
                continue
            orbit = [x]
            y = np.asarray([x])
            least = period
            for k in range(1, period):
                y = f.eval_lift(y)
                pt = float(y[0]) % 1.0 if space.is_circle else float(y[0])
                if _point_distance(space, pt, x) <= merge_tol:
                    least = k
                    break
                orbit.append(pt)
            if least < period:
                continue
            k0 = orbit.index(min(orbit))
            orbit = tuple(orbit[k0:] + orbit[:k0])
            accepted.append(
                PeriodicOrbit(orbit, period, orbit_multiplier(f, orbit[0], period))
            )
    accepted.sort(key=lambda o: (o.period, o.points[0]))
    return accepted


# ---------------------------------------------------------------------------
# Rotation numbers.


def rotation_number(
    f: Diffeo, iters: int = 4096, base_points: int = 3
) -> Tuple[float, float]:
    """(estimate, error bound): lift displacement over iters orbit steps,
    averaged over equispaced base points; the bound is 1/iters."""
    if not f.space.is_circle:
        raise NotCircle("rotation numbers need a circle action")
    if iters < 1:
        raise ValueError("need iters >= 1")
    x = np.arange(base_points, dtype=float) / base_points
    y = _iterate_lift(f, x, iters)
    rho = float(np.mean(y - x)) / iters
    return rho % 1.0, 1.0 / iters


# ---------------------------------------------------------------------------
# Flattening.


def _hermite_terms(s: Array) -> Tuple[Array, Array]:
    """(h10, h11) cubic Hermite terms multiplying the endpoint slopes."""
    return s * (1.0 - s) ** 2, s * s * (s - 1.0)


def _hermite_dterms(s: Array) -> Tuple[Array, Array]:
    return (1.0 - s) * (1.0 - 3.0 * s), s * (3.0 * s - 2.0)


@dataclass(frozen=True)
class _Bridge:
    """Monotone C^1 cubic fixing both endpoints with prescribed slopes.
    With slopes in (0, 3] against the unit secant the Fritsch-Carlson test
    holds, so the cubic is strictly increasing."""

    a: float
    b: float
    slope_a: float
    slope_b: float

    def value(self, x: Array) -> Array:
        h = self.b - self.a
        s = (x - self.a) / h
        t10, t11 = _hermite_terms(s)
        return x + h * ((self.slope_a - 1.0) * t10 + (self.slope_b - 1.0) * t11)

    def deriv(self, x: Array) -> Array:
        s = (x - self.a) / (self.b - self.a)
        d10, d11 = _hermite_dterms(s)
        return 1.0 + (self.slope_a - 1.0) * d10 + (self.slope_b - 1.0) * d11

    def invert(self, y: Array) -> Array:
        lo = np.full_like(y, self.a)
        hi = np.full_like(y, self.b)
        x = np.clip(y, self.a, self.b)
        for _ in range(60):
            fx = self.value(x) - y
            lo = np.where(fx <= 0, x, lo)
            hi = np.where(fx >= 0, x, hi)
            xn = x - fx / self.deriv(x)
            bad = ~np.isfinite(xn) | (xn < lo) | (xn > hi)
            xn = np.where(bad, 0.5 * (lo + hi), xn)
            if np.max(np.abs(xn - x)) < 1e-15:
                return xn
            x = xn
        return x


_LEFT_GERM, _RIGHT_GERM, _BRIDGE = 0, 1, 2


class FlatteningMap:
    """psi with germ x_j ± r (t/r)^(1/alpha) at each flagged point and
    monotone C^1 Hermite bridges elsewhere.  Dpsi is infinite at the flagged
    points, so psi is not a Diffeo; conjugation goes through
    flatten_conjugate, which removes the singularity analytically."""

    def __init__(self, space: Space, flagged: Sequence[float], alpha: float):
        if alpha < 1.0:
            raise ValueError("alpha must be >= 1")
        pts = sorted(
            float(x) % 1.0 if space.is_circle else float(x) for x in flagged
        )
        self.space = space
        self.alpha = float(alpha)
        self.nodes = tuple(pts)
        if not pts:
            # nothing to flatten: psi is the identity
            self.radius = 0.05
            self._q = 1.0 / self.alpha
            self._starts = np.asarray([0.0])
            self._kinds = np.asarray([_BRIDGE])
            self._payload = [_Bridge(0.0, 1.0, 1.0, 1.0)]
            return
        gaps = [b - a for a, b in zip(pts, pts[1:])]
        if space.is_circle:
            gaps.append(pts[0] + 1.0 - pts[-1])
        else:
            if pts[0] > 0.0:
                gaps.append(pts[0])
            if pts[-1] < 1.0:
                gaps.append(1.0 - pts[-1])
        self.radius = min(0.05, 0.5 * min(gaps)) if gaps else 0.05
        q = 1.0 / self.alpha
        self._q = q
        r = self.radius

        # segment table over one period/interval: (start, kind, payload)
        # where payload is the germ center (in the segment's own frame,
        # possibly shifted by ±1 on the circle) or a _Bridge.
        segs: List[Tuple[float, int, object]] = []

        def add_bridge(a: float, b: float, sa: float, sb: float):
            if b - a > 1e-12:
                segs.append((a, _BRIDGE, _Bridge(a, b, sa, sb)))

        if space.is_circle:
            for j, x in enumerate(pts):
                segs.append((x - r, _LEFT_GERM, x))
                segs.append((x, _RIGHT_GERM, x))
                nxt = pts[j + 1] if j + 1 < len(pts) else pts[0] + 1.0
                add_bridge(x + r, nxt - r, q, q)
            # fold segments into [0,1): split anything crossing an integer
            folded: List[Tuple[float, int, object]] = []
            for start, kind, pay in segs:
                s0 = start % 1.0
                folded.append((s0, kind, pay if not isinstance(pay, float) else pay))
                # frame correction: a germ centered at c evaluated from a
                # folded start s0 = start+1 sees points near c+1
                if s0 != start:
                    shift = round(s0 - start)
                    if isinstance(pay, float):
                        folded[-1] = (s0, kind, pay + shift)
                    else:
                        folded[-1] = (
                            s0,
                            kind,
                            _Bridge(
                                pay.a + shift, pay.b + shift, pay.slope_a, pay.slope_b
                            ),
                        )
            # a segment may still straddle 1.0 after folding its start; the
            # part beyond 1 reappears at the front via mod-1 inputs, handled
            # by an extra copy starting at 0 when no segment starts there
            folded.sort(key=lambda t: t[0])
            if folded[0][0] > 0.0:
                start, kind, pay = folded[-1]
                if isinstance(pay, float):
                    folded.insert(0, (0.0, kind, pay - 1.0))
                else:
                    folded.insert(
                        0,
                        (
                            0.0,
                            kind,
                            _Bridge(pay.a - 1.0, pay.b - 1.0, pay.slope_a, pay.slope_b),
                        ),
                    )
            segs = folded
        else:
            if pts[0] > 0.0:
                add_bridge(0.0, pts[0] - r, 1.0, q)
            for j, x in enumerate(pts):
                if x - r >= 0.0:
                    segs.append((x - r, _LEFT_GERM, x))
                if x < 1.0:
                    segs.append((x, _RIGHT_GERM, x))
                if j + 1 < len(pts):
                    add_bridge(x + r, pts[j + 1] - r, q, q)
                elif x + r <= 1.0 - 1e-12:
                    add_bridge(x + r, 1.0, q, 1.0)
            segs.sort(key=lambda t: t[0])
        self._starts = np.asarray([s for s, _, _ in segs], dtype=float)
        self._kinds = np.asarray([k for _, k, _ in segs], dtype=int)
        self._payload = [p for _, _, p in segs]

    # -- evaluation ----------------------------------------------------------

    def _segment(self, x0: Array) -> Array:
        return np.clip(
            np.searchsorted(self._starts, x0, side="right") - 1,
            0,
            len(self._starts) - 1,
        )

    def _germ(self, z: Array) -> Array:
        r = self.radius
        return r * np.power(np.maximum(z, 0.0) / r, self._q)

    def _germ_inv(self, u: Array) -> Array:
        r = self.radius
        return r * np.power(np.maximum(u, 0.0) / r, self.alpha)

    def _split(self, x) -> Tuple[Array, Array]:
        x = np.asarray(x, dtype=float)
        if self.space.is_circle:
            k = np.floor(x)
        else:
            k = np.zeros_like(x)
        return k, np.clip(x - k, 0.0, 1.0)

    def _map_pieces(self, x0: Array, inverse: bool) -> Array:
        out = np.empty_like(x0)
        seg = self._segment(x0)
        for i in np.unique(seg):
            sel = seg == i
            kind = self._kinds[i]
            pay = self._payload[i]
            if kind == _BRIDGE:
                out[sel] = pay.invert(x0[sel]) if inverse else pay.value(x0[sel])
            else:
                z = np.abs(x0[sel] - pay)
                sgn = 1.0 if kind == _RIGHT_GERM else -1.0
                out[sel] = pay + sgn * (
                    self._germ_inv(z) if inverse else self._germ(z)
                )
        return out

    def eval_lift(self, x) -> Array:
        k, x0 = self._split(x)
        return self._map_pieces(x0, inverse=False) + k

    def invert_lift(self, y) -> Array:
        # psi fixes every segment boundary, so segments are psi-invariant
        k, y0 = self._split(y)
        return self._map_pieces(y0, inverse=True) + k

    def log_deriv(self, x) -> Array:
        """log Dpsi; +inf exactly at the flagged points."""
        _, x0 = self._split(x)
        seg = self._segment(x0)
        out = np.empty_like(x0)
        q = self._q
        for i in np.unique(seg):
            sel = seg == i
            pay = self._payload[i]
            if self._kinds[i] == _BRIDGE:
                out[sel] = np.log(pay.deriv(x0[sel]))
            else:
                z = np.abs(x0[sel] - pay)
                with np.errstate(divide="ignore"):
                    out[sel] = math.log(q) + (q - 1.0) * (
                        np.log(z) - math.log(self.radius)
                    )
        return out

    def __repr__(self):
        return (
            f"FlatteningMap(alpha={self.alpha:.6g}, r={self.radius:.6g}, "
            f"nodes={list(self.nodes)})"
        )


def flatten_conjugate(psi: FlatteningMap, g: Diffeo) -> Diffeo:
    """psi ∘ g ∘ psi^{-1} as an honest C^1 diffeomorphism.  Near flagged
    points the composition is evaluated in offset coordinates: images of
    flagged points snap to flagged points when closer than 1e-8, offsets
    below 1e-9 use the exact linear collapse x_k ± m^(1/alpha) z with
    log-derivative (1/alpha) log m, and larger offsets difference out the
    periodic-point root error before the germ power is applied."""
    space = g.space
    q = psi._q
    r = psi.radius
    flagged = np.asarray(psi.nodes)

    def snap_table(move: Callable) -> Array:
        imgs = move(flagged)
        table = np.full(len(flagged), -1, dtype=int)
        for j, img in enumerate(imgs):
            img0 = img % 1.0 if space.is_circle else img
            d = np.abs(flagged - img0)
            if space.is_circle:
                d = np.minimum(d, 1.0 - d)
            k = int(np.argmin(d))
            if d[k] < _SNAP_TOL:
                table[j] = k
        return table

    def kernel(move: Callable, move_ld: Callable, targets: Array):
        """(value mod frame, logderiv) of psi∘move∘psi^{-1} on [0,1]."""

        def both(x0: Array) -> Tuple[Array, Array]:
            seg = psi._segment(x0)
            val = np.empty_like(x0)
            ld = np.empty_like(x0)
            for i in np.unique(seg):
                sel = seg == i
                kind = psi._kinds[i]
                pay = psi._payload[i]
                xs = x0[sel]
                if kind == _BRIDGE:
                    y = pay.invert(xs)
                    w = move(y)
                    val[sel] = psi.eval_lift(w)
                    ld[sel] = (
                        psi.log_deriv(w) + move_ld(y) - np.log(pay.deriv(y))
                    )
                    continue
                c = float(pay)
                sgn = 1.0 if kind == _RIGHT_GERM else -1.0
                z_x = np.abs(xs - c)
                z_y = psi._germ_inv(z_x)
                y = c + sgn * z_y
                j = int(np.argmin(np.abs(flagged - (c % 1.0 if space.is_circle else c))))
                tgt = int(targets[j])
                if tgt < 0:
                    w = move(y)
                    val[sel] = psi.eval_lift(w)
                    with np.errstate(divide="ignore"):
                        germ_ld = math.log(q) + (q - 1.0) * (
                            np.log(z_y) - math.log(r)
                        )
                    ld[sel] = psi.log_deriv(w) + move_ld(y) - germ_ld
                    continue
                base = float(move(np.asarray([c]))[0])
                ck = base  # snapped frame origin: exact flagged value + lift
                lm = float(move_ld(np.asarray([c]))[0])
                w = move(y)
                z_gy = np.maximum((w - base) * sgn, 0.0)
                lin = z_y < _GERM_LIN
                m_q = math.exp(q * lm)
                v_lin = ck + sgn * m_q * z_x
                ld_lin = np.full_like(xs, q * lm)
                inside = z_gy <= r
                with np.errstate(divide="ignore", invalid="ignore"):
                    v_in = ck + sgn * psi._germ(z_gy)
                    ld_in = move_ld(y) + (q - 1.0) * (
                        np.log(np.maximum(z_gy, 1e-300))
                        - np.log(np.maximum(z_y, 1e-300))
                    )
                    w_out = ck + sgn * z_gy
                    v_out = psi.eval_lift(w_out)
                    germ_ld = math.log(q) + (q - 1.0) * (
                        np.log(np.maximum(z_y, 1e-300)) - math.log(r)
                    )
                    ld_out = psi.log_deriv(w_out) + move_ld(y) - germ_ld
                val[sel] = np.where(lin, v_lin, np.where(inside, v_in, v_out))
                ld[sel] = np.where(lin, ld_lin, np.where(inside, ld_in, ld_out))
            return val, ld

        return both

    fwd_snap = snap_table(g.eval_lift)
    bwd_snap = np.full(len(flagged), -1, dtype=int)
    for j, t in enumerate(fwd_snap):
        if t >= 0:
            bwd_snap[t] = j
    fwd = kernel(g.eval_lift, g.log_deriv, fwd_snap)
    bwd = kernel(g.invert_lift, lambda y: -g.log_deriv(g.invert_lift(y)), bwd_snap)

    def lifted(pair: Callable, raw_move: Callable):
        def value_fn(x):
            x = np.asarray(x, dtype=float)
            k = np.floor(x) if space.is_circle else np.zeros_like(x)
            x0 = np.clip(x - k, 0.0, 1.0)
            v, _ = pair(x0)
            if space.is_circle:
                raw = psi.eval_lift(raw_move(psi.invert_lift(x0)))
                v = v + np.round(raw - v)
            return v + k

        def ld_fn(x):
            x = np.asarray(x, dtype=float)
            k = np.floor(x) if space.is_circle else np.zeros_like(x)
            _, l = pair(np.clip(x - k, 0.0, 1.0))
            return l

        return value_fn, ld_fn

    fwd_value, fwd_ld = lifted(fwd, g.eval_lift)
    bwd_value, _ = lifted(bwd, g.invert_lift)

    values = fwd_value(space.nodes)
    shift = math.floor(values[0]) if space.is_circle else 0
    if shift:
        values = values - shift
    ld_samples = fwd_ld(space.track_nodes())

    value_fn = (lambda x: fwd_value(x) - shift) if shift else fwd_value
    inverse_fn = (lambda y: bwd_value(np.asarray(y, dtype=float) + shift)) if shift else bwd_value
    return Diffeo(
        space,
        GridFunction(space, ld_samples, fwd_ld),
        values,
        value_fn,
        inverse_fn,
    )


@dataclass
class FlatteningReport:
    alpha: float
    radius: float
    flagged: Tuple[float, ...]
    orbits: List[PeriodicOrbit]
    log_multipliers_before: Dict[float, float]
    log_multipliers_after: Dict[float, float]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "radius": self.radius,
            "flagged": list(self.flagged),
            "orbits": [
                {
                    "points": list(o.points),
                    "period": o.period,
                    "multiplier": o.multiplier,
                }
                for o in self.orbits
            ],
            "log_multipliers_before": {
                f"{k:.12g}": v for k, v in self.log_multipliers_before.items()
            },
            "log_multipliers_after": {
                f"{k:.12g}": v for k, v in self.log_multipliers_after.items()
            },
        }


def flatten_hyperbolic(
    action: Action,
    delta: Optional[float] = None,
    alpha: Optional[float] = None,
    n_max: int = 3,
    cap: int = 64,
) -> Tuple[Action, FlatteningMap, FlatteningReport]:
    """Conjugates the action so every hyperbolic periodic multiplier M of
    period N satisfies |log M|/alpha <= N*delta, taking
    alpha = max(1, max |log M| / (N*delta)) unless given.  Raises
    InfiniteHyperbolicSet when more than cap points are flagged."""
    if delta is None and alpha is None:
        raise ValueError("need delta or alpha")
    per_gen = [find_periodic_points(g, n_max) for g in action.gens]
    hyper = [o for orbits in per_gen for o in orbits if not o.parabolic]
    flagged: List[float] = []
    for o in hyper:
        for p in o.points:
            if all(
                _point_distance(action.space, p, f) > 2.0 / action.space.grid_size
                for f in flagged
            ):
                flagged.append(p)
    if len(flagged) > cap:
        raise InfiniteHyperbolicSet(
            f"{len(flagged)} hyperbolic periodic points exceed cap {cap}"
        )
    if not flagged:
        psi = FlatteningMap(action.space, (), 1.0 if alpha is None else alpha)
        report = FlatteningReport(
            alpha=psi.alpha,
            radius=psi.radius,
            flagged=(),
            orbits=[],
            log_multipliers_before={},
            log_multipliers_after={},
        )
        return action, psi, report
    if alpha is None:
        alpha = max(
            1.0,
            max(abs(o.log_multiplier) / (o.period * delta) for o in hyper),
        )
    psi = FlatteningMap(action.space, flagged, alpha)
    flat_gens = [flatten_conjugate(psi, g) for g in action.gens]
    flattened = Action(action.space, action.presentation, flat_gens)
    before: Dict[float, float] = {}
    after: Dict[float, float] = {}
    for orbits, g_new in zip(per_gen, flat_gens):
        for o in orbits:
            if o.parabolic:
                continue
            before[o.points[0]] = o.log_multiplier
            after[o.points[0]] = math.log(
                orbit_multiplier(g_new, o.points[0], o.period)
            )
    report = FlatteningReport(
        alpha=float(alpha),
        radius=psi.radius,
        flagged=tuple(sorted(flagged)),
        orbits=sorted(hyper, key=lambda o: (o.period, o.points[0])),
        log_multipliers_before=before,
        log_multipliers_after=after,
    )
    return flattened, psi, report


def c1_refinement_ratio(f: Diffeo) -> float:
    """Largest consecutive log-derivative jump on the grid divided by the
    same at doubled resolution; near 2 for C^1 maps, near 1 at a corner."""
    coarse = f.log_deriv.samples
    fine = f.log_deriv(f.space.refine().track_nodes())
    jump_c = float(np.max(np.abs(np.diff(coarse))))
    jump_f = float(np.max(np.abs(np.diff(fine))))
    return jump_c / max(jump_f, 1e-300)


# ---------------------------------------------------------------------------
# Resilient pairs.


@dataclass(frozen=True)
class ResilientWitness:
    """Certificate x < f(x) < f(y) < g(x) < g(y) < y with every margin above
    the requested resolution; words spell f and g in generator letters."""

    word_f: Word
    word_g: Word
    display_f: str
    display_g: str
    x: float
    y: float
    chain: Tuple[float, float, float, float, float, float]
    margin: float
    resolution: float

    def to_dict(self) -> dict:
        return {
            "word_f": self.display_f,
            "word_g": self.display_g,
            "x": self.x,
            "y": self.y,
            "chain": list(self.chain),
            "margin": self.margin,
            "resolution": self.resolution,
        }


def _reduced_words(n_gens: int, max_len: int) -> List[Tuple[Tuple[int, int], ...]]:
    letters = []
    for idx in range(n_gens):
        letters.append((idx, 1))
        letters.append((idx, -1))
    out: List[Tuple[Tuple[int, int], ...]] = []
    frontier: List[Tuple[Tuple[int, int], ...]] = [()]
    for _ in range(max_len):
        nxt = []
        for seq in frontier:
            for let in letters:
                if seq and seq[-1] == (let[0], -let[1]):
                    continue
                nxt.append(seq + (let,))
        out.extend(nxt)
        frontier = nxt
    return out


def _distinct_words(action: Action, max_len: int) -> List[Tuple[Letter, ...]]:
    """Reduced words up to max_len, keeping the first spelling of each group
    element (rewriting collapses e.g. the 12 spellings of g1 g2 in Z^2)."""
    words = _reduced_words(len(action.gens), max_len)
    if action.presentation.kind == FREE:
        return words
    seen = set()
    kept = []
    for seq in words:
        key = action.presentation.normal_form(Word(seq)).letters
        if key not in seen:
            seen.add(key)
            kept.append(seq)
    return kept


def detect_resilient(
    action: Action, max_len: int, resolution: float
) -> Optional[ResilientWitness]:
    """First witness in the deterministic order (word pair, x index, y index)
    of a resilient chain over grid points, or None.  Circle actions compare
    the mod-1 values, so a chain must fit inside one fundamental domain;
    their scan runs on a subgrid with a few nodes per resolution length,
    which is where chains this wide are separated anyway."""
    space = action.space
    nodes = space.nodes
    n = len(nodes)
    words = _distinct_words(action, max_len)
    cache: Dict[Tuple, Array] = {}

    def values_of(seq) -> Array:
        if seq not in cache:
            pts = nodes.copy()
            for letter in reversed(seq):
                pts = action.letter_diffeo(letter).eval_lift(pts)
            cache[seq] = pts % 1.0 if space.is_circle else pts
        return cache[seq]

    if space.is_circle:
        stride = max(1, int(space.grid_size * resolution / 4.0))
        sub = np.arange(0, n, stride)
        xs = nodes[sub]
        for sf in words:
            fs = values_of(sf)[sub]
            x_ok = fs - xs > resolution
            if not x_ok.any():
                continue
            for sg in words:
                if sg == sf:
                    continue
                gs = values_of(sg)[sub]
                cand_i = np.nonzero(x_ok & (gs - fs > 2.0 * resolution))[0]
                cand_j = np.nonzero(xs - gs > resolution)[0]
                if cand_i.size == 0 or cand_j.size == 0:
                    continue
                ok = (
                    (cand_i[:, None] < cand_j[None, :])
                    & (fs[cand_j][None, :] - fs[cand_i][:, None] > resolution)
                    & (gs[cand_i][:, None] - fs[cand_j][None, :] > resolution)
                    & (gs[cand_j][None, :] - gs[cand_i][:, None] > resolution)
                )
                if ok.any():
                    flat = int(np.argmax(ok))  # row-major: first (i, j)
                    ii, jj = divmod(flat, ok.shape[1])
                    i = int(sub[cand_i[ii]])
                    j = int(sub[cand_j[jj]])
                    return _witness(action, sf, sg, values_of, i, j, resolution)
        return None

    idx_arr = np.arange(n)
    for sf in words:
        fv = values_of(sf)
        x_ok = fv - nodes > resolution
        if not x_ok.any():
            continue
        for sg in words:
            if sg == sf:
                continue
            gv = values_of(sg)
            y_ok = nodes - gv > resolution
            if not y_ok.any():
                continue
            nxt = np.full(n + 1, n, dtype=int)
            nxt[:n] = np.minimum.accumulate(
                np.where(y_ok, idx_arr, n)[::-1]
            )[::-1]
            cand = np.nonzero(x_ok & (gv - fv > resolution))[0]
            for i in cand:
                lo = int(
                    max(
                        np.searchsorted(fv, fv[i] + resolution, side="right"),
                        np.searchsorted(gv, gv[i] + resolution, side="right"),
                        i + 1,
                    )
                )
                hi = int(np.searchsorted(fv, gv[i] - resolution, side="left"))
                if lo >= hi:
                    continue
                j = int(nxt[lo])
                if j < hi:
                    return _witness(action, sf, sg, values_of, i, j, resolution)
    return None


def _witness(action, sf, sg, values_of, i, j, resolution) -> ResilientWitness:
    nodes = action.space.nodes
    fv, gv = values_of(sf), values_of(sg)
    chain = (
        float(nodes[i]),
        float(fv[i]),
        float(fv[j]),
        float(gv[i]),
        float(gv[j]),
        float(nodes[j]),
    )
    wf, wg = Word(sf), Word(sg)
    return ResilientWitness(
        word_f=wf,
        word_g=wg,
        display_f=wf.display(action.names),
        display_g=wg.display(action.names),
        x=float(nodes[i]),
        y=float(nodes[j]),
        chain=chain,
        margin=float(np.min(np.diff(chain))),
        resolution=resolution,
    )
