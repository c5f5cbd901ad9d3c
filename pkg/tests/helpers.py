"""Builders for the small zoo of actions the tests keep reusing.

Everything is cached per grid size; callers must not mutate the returned
objects.  The maps:

* mobius_action   -- Z acting on [0,1] by x/(2-x): hyperbolic fixed points
                     0 and 1 with multipliers 1/2 and 2.
* wobble          -- h(x) = x + 0.1 sin(2 pi x) on the circle.
* conj_rotation_action / conj_rotation_z2
                  -- h R_a h^{-1} for the golden (and silver) rotation
                     angle: free actions with irrational rotation number.
* rigid_rotations -- the same two angles acting as honest rotations.
* pingpong_action -- two piecewise-linear maps pushing (0.05, 0.95) into
                     (0.1, 0.3) and (0.5, 0.7) respectively; generates a
                     free semigroup with crossed-interval witnesses.
"""

from __future__ import annotations

from functools import lru_cache

from conjtamer import (
    Action,
    Presentation,
    build_diffeo,
    conjugated_rotation,
    pwl_diffeo,
    rotation,
)
from conjtamer.space import circle, interval

GOLDEN = 0.618034
SILVER = 0.414214


@lru_cache(maxsize=None)
def mobius_gen(grid: int = 4096):
    return build_diffeo("mobius(1, 0, -1, 2)", interval(grid))


@lru_cache(maxsize=None)
def mobius_action(grid: int = 4096) -> Action:
    sp = interval(grid)
    return Action(sp, Presentation.zd(1, ("f",)), {"f": mobius_gen(grid)})


@lru_cache(maxsize=None)
def wobble(grid: int = 4096):
    return build_diffeo("x + 0.1*sin(2*pi*x)", circle(grid))


@lru_cache(maxsize=None)
def conj_rotation_action(grid: int = 4096) -> Action:
    sp = circle(grid)
    g = conjugated_rotation(sp, wobble(grid), GOLDEN)
    return Action(sp, Presentation.zd(1, ("g",)), {"g": g})


@lru_cache(maxsize=None)
def conj_rotation_z2(grid: int = 4096) -> Action:
    sp = circle(grid)
    h = wobble(grid)
    g1 = conjugated_rotation(sp, h, GOLDEN)
    g2 = conjugated_rotation(sp, h, SILVER)
    return Action(sp, Presentation.zd(2, ("g1", "g2")), {"g1": g1, "g2": g2})


@lru_cache(maxsize=None)
def rigid_rotations(grid: int = 4096) -> Action:
    sp = circle(grid)
    return Action(
        sp,
        Presentation.zd(2, ("r1", "r2")),
        {"r1": rotation(sp, GOLDEN), "r2": rotation(sp, SILVER)},
    )


PINGPONG_F = ((0.0, 0.0), (0.05, 0.12), (0.95, 0.28), (1.0, 1.0))
PINGPONG_G = ((0.0, 0.0), (0.05, 0.52), (0.95, 0.68), (1.0, 1.0))


@lru_cache(maxsize=None)
def pingpong_action(grid: int = 4096) -> Action:
    sp = circle(grid)
    f = pwl_diffeo(sp, PINGPONG_F)
    g = pwl_diffeo(sp, PINGPONG_G)
    return Action(sp, Presentation.free(("f", "g")), {"f": f, "g": g})


@lru_cache(maxsize=None)
def trivial_action(grid: int = 256) -> Action:
    sp = interval(grid)
    return Action(sp, Presentation.zd(1, ("f",)), {"f": build_diffeo("x", sp)})
