"""Command-line interface.

    conjtamer tame-lipschitz --spec a4.spec --lambda 0.9048 --radius 40 --out out/
    conjtamer tame-c1        --spec a4.spec --epsilon 0.1
    conjtamer path           --spec a3_z2.spec --nmax 24 --steps 8
    conjtamer detect         --spec pingpong.spec --resilient -L 4 --resolution 0.01
    conjtamer flatten        --spec a4.spec --delta 0.1
    conjtamer report         --spec a3.spec

Exit codes: 0 success (detect returns 0 whether or not a witness exists),
2 spec/usage error, 3 certification failure (report.json still written),
1 any other pipeline error.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

from .errors import CertificationFailure, ConjTamerError, SpecError
from .pipeline import run_pipeline
from .specfile import load_action_spec

_OVERRIDE_ATTRS = {
    "lambda_": "lam",
    "radius": "radius",
    "epsilon": "epsilon",
    "delta": "delta",
    "alpha": "alpha",
    "nmax": "nmax",
    "steps": "steps",
    "max_word_len": "max_word_len",
    "resolution": "resolution",
    "growth_constant": "growth_constant",
    "k_max": "k_max",
    "shell_index": "shell_index",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conjtamer",
        description="Conjugate interval/circle group actions toward "
        "Lipschitz or C1-small generators, follow conjugacy paths, and "
        "probe obstructions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--spec", required=True, metavar="FILE",
                        help="action spec file")
        sp.add_argument("--grid", type=int, metavar="N",
                        help="override [space] grid_size")
        sp.add_argument("--out", default="out", metavar="DIR",
                        help="output directory (default: out)")

    tl = sub.add_parser("tame-lipschitz",
                        help="conjugate to uniformly small Lipschitz "
                        "constants via a word-averaged measure")
    common(tl)
    tl.add_argument("--lambda", dest="lambda_", type=float,
                    help="series weight in (0, 1/growth)")
    tl.add_argument("--radius", "--ball-radius", dest="radius", type=int,
                    help="word-length truncation radius")

    tc = sub.add_parser("tame-c1",
                        help="flatten hyperbolic periodic points, solve the "
                        "additive cocycle equation and certify sup|log D|")
    common(tc)
    tc.add_argument("--epsilon", type=float, help="certification target")
    tc.add_argument("--delta", type=float,
                    help="post-flattening multiplier budget per period "
                    "(default: epsilon)")
    tc.add_argument("--alpha", type=float,
                    help="flattening exponent override")
    tc.add_argument("--nmax", type=int,
                    help="averaging ball radius (abelian solve)")
    tc.add_argument("--k-max", dest="k_max", type=int,
                    help="shell search cap (nilpotent solve)")
    tc.add_argument("--shell-index", dest="shell_index", type=int,
                    help="which admissible shell to average over")
    tc.add_argument("--growth-constant", dest="growth_constant", type=float,
                    help="ball growth constant override (nilpotent solve)")

    pa = sub.add_parser("path",
                        help="sample the conjugacy path of averaging "
                        "solutions and its C1 gaps")
    common(pa)
    pa.add_argument("--nmax", type=int, help="path endpoint (default 24)")
    pa.add_argument("--steps", "--path-steps", dest="steps", type=int,
                    help="samples per unit of t (default 8)")

    de = sub.add_parser("detect",
                        help="search short words for a resilient "
                        "crossed-interval pattern")
    common(de)
    de.add_argument("--resilient", action="store_true",
                    help="look for a resilient pair (the default and only "
                    "detector)")
    de.add_argument("-L", dest="max_word_len", type=int, metavar="LEN",
                    help="maximum word length (default 4)")
    de.add_argument("--resolution", type=float,
                    help="minimum chain margin (default 0.01)")

    fl = sub.add_parser("flatten",
                        help="conjugate hyperbolic periodic multipliers "
                        "down to a per-period budget")
    common(fl)
    fl.add_argument("--delta", type=float,
                    help="per-period multiplier budget (default 0.1)")
    fl.add_argument("--alpha", type=float,
                    help="flattening exponent override")
    fl.add_argument("--nmax", type=int,
                    help="least-period search bound (default 3)")

    rp = sub.add_parser("report",
                        help="diagnostics only: norms, relations, periodic "
                        "inventory, rotation numbers")
    common(rp)

    return parser


def _summary_lines(report: dict) -> List[str]:
    command = report["command"]
    status = ""
    if command in ("tame-lipschitz", "tame-c1"):
        status = " (certified)" if report.get("certified") else " (NOT certified)"
    lines = [f"{command}: wrote report.json{status}"]
    if command == "tame-lipschitz" and "taming" in report:
        t = report["taming"]
        worst = max(max(g["lip"], g["lip_inv"]) for g in t["per_generator"].values())
        lines.append(f"  lip bound {t['lip_bound']:.6g}, worst generator "
                     f"{worst:.6g}, slack {t['slack']:.4g}")
    elif command == "tame-c1" and "certify" in report:
        c = report["certify"]
        lines.append(f"  final sup|log D| {c['final_sup_log_deriv']:.6g} vs "
                     f"epsilon {c['epsilon']:.6g} + slack {c['slack']:.6g}")
    elif command == "path" and "path" in report:
        p = report["path"]
        lines.append(f"  {p['samples']} samples, final c1 gap "
                     f"{p['final_c1_gap']:.6g}")
    elif command == "detect" and "detect" in report:
        d = report["detect"]
        if d["found"]:
            w = d["witness"]
            lines.append(f"  witness: f={w['word_f']} g={w['word_g']} "
                         f"x={w['x']:.6g} y={w['y']:.6g} "
                         f"margin {w['margin']:.4g}")
        else:
            lines.append(f"  no witness up to length {d['max_word_len']}")
    elif command == "flatten" and "flatten" in report:
        f = report["flatten"]
        if f.get("skipped"):
            lines.append("  skipped: no hyperbolic periodic points")
        else:
            lines.append(f"  alpha {float(f['alpha']):.6g}, "
                         f"{len(f['flagged'])} flagged point(s)")
    return lines


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        dest: getattr(args, attr)
        for attr, dest in _OVERRIDE_ATTRS.items()
        if getattr(args, attr, None) is not None
    }
    try:
        spec = load_action_spec(args.spec)
        if args.grid is not None:
            spec.grid_size = args.grid
        report = run_pipeline(
            args.command,
            spec,
            args.out,
            base_dir=os.path.dirname(os.path.abspath(args.spec)),
            overrides=overrides,
        )
    except OSError as exc:
        print(f"conjtamer: {exc}", file=sys.stderr)
        return 2
    except SpecError as exc:
        print(f"conjtamer: spec error: {exc}", file=sys.stderr)
        return 2
    except CertificationFailure as exc:
        print(f"conjtamer: certification failure: {exc}", file=sys.stderr)
        return 3
    except ConjTamerError as exc:
        print(f"conjtamer: {exc}", file=sys.stderr)
        return 1
    for line in _summary_lines(report):
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
