"""Defect decay of averaged solutions to u - u∘g = log Dg.

For a circle map with irrational rotation number the empirical measures
along orbits equidistribute, so the positive-ball averages u_n solve the
equation with defects shrinking as n grows.  The third column confirms the
telescoping identity: the defect at its argmax equals the empirical-measure
integral of log Dg at the matched point.
"""

import argparse

from conjtamer import (
    birkhoff_solution,
    build_action,
    empirical_measure_integral,
    load_action_spec,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spec", default="specs/a3.spec")
    ap.add_argument("--nmax", type=int, default=32)
    args = ap.parse_args()

    action = build_action(load_action_spec(args.spec))
    name = action.names[0]

    print(f"{'n':>4}  {'defect':>12}  {'|emp integral|':>14}")
    n = 2
    while n <= args.nmax:
        sol = birkhoff_solution(action, n)
        x_star = sol.defect_locations[name]
        emp = empirical_measure_integral(action, 0, n, x_star)
        print(f"{n:4d}  {sol.defect_per_generator[name]:12.8f}  {abs(emp):14.8f}")
        n *= 2


if __name__ == "__main__":
    main()
