"""Parsing of action spec files.

A spec is UTF-8 text with sections [space], [group], [generators] and
[pipeline].  Example::

    [space]
    kind = circle
    grid_size = 4096

    [group]
    type = abelian
    generators = g1 g2

    [generators]
    g1 = conj(x + 0.1*sin(2*pi*x), 0.618034)
    g2 = conj(x + 0.1*sin(2*pi*x), 0.414214)

    [pipeline]
    nmax = 24
    steps = 8

Generator definitions are expressions in x, conj(h, angle) for h∘R_angle∘h⁻¹,
pwl(x0:y0, x1:y1, ...) for piecewise-linear interpolation, or @file.json for
a serialized diffeomorphism.  Nilpotent groups list rewriting rules like
"b a -> a b c^-1" plus a bounded_generation constant.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .action import Action, validate_relations
from .diffeo import Diffeo, build_diffeo, conjugated_rotation, pwl_diffeo
from .errors import ConjTamerError, SpecError, UnknownGenerator
from .expressions import compile_expression
from .space import Space
from .words import ABELIAN, FREE, NILPOTENT, Presentation

_SECTIONS = ("space", "group", "generators", "pipeline")


@dataclass
class GeneratorDef:
    form: str  # expression | conj | pwl | file
    text: str
    line: int
    col: int = 1  # 1-based column of the definition text within its spec line


@dataclass
class PipelineParams:
    lam: Optional[float] = None
    radius: Optional[int] = None
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    alpha: Optional[float] = None
    nmax: Optional[int] = None
    steps: Optional[int] = None
    max_word_len: int = 4
    resolution: Optional[float] = None
    growth_constant: Optional[float] = None
    k_max: int = 8
    shell_index: Optional[int] = None

    def merged(self, **overrides) -> "PipelineParams":
        out = PipelineParams(**self.__dict__)
        for k, v in overrides.items():
            if v is not None:
                setattr(out, k, v)
        return out


@dataclass
class ActionSpec:
    space_kind: str
    grid_size: int
    group_type: str
    generator_names: Tuple[str, ...]
    generator_defs: Dict[str, GeneratorDef]
    rules: List[Tuple[Tuple, Tuple]] = field(default_factory=list)
    bounded_generation: Optional[int] = None
    metric_generators: Optional[Tuple[int, ...]] = None
    relation_tolerance: float = 1e-6
    params: PipelineParams = field(default_factory=PipelineParams)


def _split_top_level(text: str, sep: str = ",") -> List[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _parse_rule(rule: str, names: Sequence[str], line: int):
    """'b a -> a b c^-1' as a pair of letter tuples."""
    if "->" not in rule:
        raise SpecError(f"rule needs '->': {rule!r}", line=line)
    lhs_text, rhs_text = rule.split("->", 1)

    def side(txt: str):
        letters = []
        for tok in txt.split():
            name, _, exp = tok.partition("^")
            if name not in names:
                raise SpecError(f"unknown generator {name!r} in rule", line=line)
            try:
                e = int(exp) if exp else 1
            except ValueError:
                raise SpecError(f"bad exponent in rule token {tok!r}", line=line)
            if e == 0:
                continue
            sign = 1 if e > 0 else -1
            letters.extend([(names.index(name), sign)] * abs(e))
        return tuple(letters)

    return side(lhs_text), side(rhs_text)


def parse_action_spec(text: str) -> ActionSpec:
    """Parses spec text; errors carry the offending line (and column for
    expression syntax errors)."""
    section = None
    space_kv: Dict[str, str] = {}
    group_kv: Dict[str, Tuple[str, int]] = {}
    gen_defs: Dict[str, GeneratorDef] = {}
    gen_order: List[str] = []
    pipe_kv: Dict[str, Tuple[str, int]] = {}
    rule_lines: List[Tuple[str, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise SpecError(f"unknown section [{name}]", line=lineno)
            section = name
            continue
        if section is None:
            raise SpecError("content before any [section]", line=lineno)
        if "=" not in stripped:
            raise SpecError(f"expected key = value, got {stripped!r}", line=lineno)
        key, value = (s.strip() for s in stripped.split("=", 1))
        if not key:
            raise SpecError("empty key", line=lineno)
        if section == "space":
            space_kv[key.lower()] = value
        elif section == "group":
            if key.lower() == "rules":
                for chunk in value.split('"'):
                    chunk = chunk.strip()
                    if chunk and chunk != ",":
                        rule_lines.append((chunk, lineno))
            else:
                group_kv[key.lower()] = (value, lineno)
        elif section == "generators":
            if key in gen_defs:
                raise SpecError(f"duplicate generator {key!r}", line=lineno)
            if value.startswith("@"):
                form = "file"
            elif value.startswith("conj(") and value.endswith(")"):
                form = "conj"
            elif value.startswith("pwl(") and value.endswith(")"):
                form = "pwl"
            else:
                form = "expression"
            col = raw.index(value, raw.index("=") + 1) + 1
            gen_defs[key] = GeneratorDef(form, value, lineno, col)
            gen_order.append(key)
        else:
            pipe_kv[key.lower()] = (value, lineno)

    kind = space_kv.get("kind", "interval").lower()
    if kind not in ("interval", "circle"):
        raise SpecError(f"space kind must be interval or circle, got {kind!r}")
    try:
        grid_size = int(space_kv.get("grid_size", "4096"))
    except ValueError:
        raise SpecError(f"bad grid_size {space_kv['grid_size']!r}")

    gtype = group_kv.get("type", ("abelian", 0))[0].lower()
    if gtype not in (ABELIAN, NILPOTENT, FREE):
        raise SpecError(f"group type must be abelian, nilpotent or free: {gtype!r}")
    if "generators" in group_kv:
        names = tuple(group_kv["generators"][0].split())
    else:
        names = tuple(gen_order)
    if not names:
        raise SpecError("no generators declared")
    for n in names:
        if n not in gen_defs:
            raise SpecError(f"generator {n!r} declared but not defined")
    for n in gen_defs:
        if n not in names:
            raise SpecError(f"generator {n!r} defined but not declared")

    rules = [_parse_rule(r, names, ln) for r, ln in rule_lines]
    if gtype == NILPOTENT and not rules:
        raise SpecError("nilpotent groups need rules")
    if gtype == ABELIAN and not rules:
        rules = list(Presentation.zd(len(names), names).rules)

    bounded = None
    if "bounded_generation" in group_kv:
        v, ln = group_kv["bounded_generation"]
        try:
            bounded = int(v)
        except ValueError:
            raise SpecError(f"bad bounded_generation {v!r}", line=ln)
    metric: Optional[Tuple[int, ...]] = None
    if "metric_generators" in group_kv:
        v, ln = group_kv["metric_generators"]
        idxs = []
        for tok in v.split():
            if tok not in names:
                raise SpecError(f"unknown metric generator {tok!r}", line=ln)
            idxs.append(names.index(tok))
        metric = tuple(idxs)
    rel_tol = 1e-6
    if "relation_tolerance" in group_kv:
        v, ln = group_kv["relation_tolerance"]
        try:
            rel_tol = float(v)
        except ValueError:
            raise SpecError(f"bad relation_tolerance {v!r}", line=ln)

    params = PipelineParams()
    casts = {
        "lambda": ("lam", float),
        "radius": ("radius", int),
        "epsilon": ("epsilon", float),
        "delta": ("delta", float),
        "alpha": ("alpha", float),
        "nmax": ("nmax", int),
        "steps": ("steps", int),
        "max_word_len": ("max_word_len", int),
        "resolution": ("resolution", float),
        "growth_constant": ("growth_constant", float),
        "k_max": ("k_max", int),
        "shell_index": ("shell_index", int),
    }
    for key, (value, ln) in pipe_kv.items():
        if key not in casts:
            raise SpecError(f"unknown pipeline parameter {key!r}", line=ln)
        attr, cast = casts[key]
        try:
            setattr(params, attr, cast(value))
        except ValueError:
            raise SpecError(f"bad value for {key}: {value!r}", line=ln)

    return ActionSpec(
        space_kind=kind,
        grid_size=grid_size,
        group_type=gtype,
        generator_names=names,
        generator_defs=gen_defs,
        rules=rules,
        bounded_generation=bounded,
        metric_generators=metric,
        relation_tolerance=rel_tol,
        params=params,
    )


def _const_value(text: str, line: int) -> float:
    expr = compile_expression(text)
    if expr.has_x:
        raise SpecError(f"expected a constant, got {text!r}", line=line)
    return float(expr.value(0.0))


def _build_generator(d: GeneratorDef, space: Space, base_dir: str) -> Diffeo:
    if d.form == "file":
        path = d.text[1:].strip()
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except OSError as exc:
            raise SpecError(f"cannot read {path}: {exc}", line=d.line)
        g = Diffeo.from_payload(payload)
        if g.space == space:
            return g
        if g.space.kind != space.kind:
            raise SpecError(
                f"{path} is a {g.space.kind} map, spec space is {space.kind}",
                line=d.line,
            )
        # Grid mismatch (e.g. --grid override): resample the stored
        # log-derivative track onto the requested grid.
        return Diffeo.from_log_deriv(
            space, g.log_deriv.interp(space.track_nodes()), g.offset
        )
    if d.form == "conj":
        inner = d.text[len("conj(") : -1]
        parts = _split_top_level(inner)
        if len(parts) != 2:
            raise SpecError(
                f"conj needs (h, angle), got {len(parts)} arguments", line=d.line
            )
        try:
            h = build_diffeo(parts[0].strip(), space)
        except SpecError as exc:
            raise SpecError(f"in conj h: {exc.message}", line=d.line, col=exc.col)
        return conjugated_rotation(space, h, _const_value(parts[1], d.line))
    if d.form == "pwl":
        inner = d.text[len("pwl(") : -1]
        pts = []
        for chunk in _split_top_level(inner):
            x_txt, sep, y_txt = chunk.partition(":")
            if not sep:
                raise SpecError(f"pwl point needs x:y, got {chunk!r}", line=d.line)
            try:
                pts.append((float(x_txt), float(y_txt)))
            except ValueError:
                raise SpecError(f"bad pwl point {chunk!r}", line=d.line)
        return pwl_diffeo(space, pts)
    try:
        return build_diffeo(d.text, space)
    except SpecError as exc:
        col = d.col + exc.col - 1 if exc.col is not None else None
        raise SpecError(exc.message, line=d.line, col=col)


# Rule sets whose rewriting already passed the exhaustive confluence check
# this session (the check costs seconds on three-generator presentations).
_CONFLUENT: set = set()


def build_action(
    spec: ActionSpec,
    grid_override: Optional[int] = None,
    base_dir: str = ".",
) -> Action:
    """Builds and validates the action: every generator passes diffeo
    validation, user-supplied rewriting rules are confluent, and every
    relation holds within relation_tolerance."""
    space = Space(spec.space_kind, grid_override or spec.grid_size)
    presentation = Presentation(
        spec.generator_names,
        spec.rules,
        kind=spec.group_type,
        bounded_generation=spec.bounded_generation,
        metric_generators=spec.metric_generators,
    )
    if spec.group_type == NILPOTENT:
        key = (presentation.generators, presentation.rules)
        if key not in _CONFLUENT:
            try:
                presentation.check_confluence()
            except ConjTamerError as exc:
                raise SpecError(f"group rules: {exc}")
            _CONFLUENT.add(key)
    gens = {}
    for name in spec.generator_names:
        try:
            gens[name] = _build_generator(spec.generator_defs[name], space, base_dir)
        except UnknownGenerator:
            raise
        except SpecError:
            raise
    action = Action(space, presentation, gens)
    validate_relations(action, tol=spec.relation_tolerance, raise_on_fail=True)
    return action


def load_action_spec(path: str) -> ActionSpec:
    with open(path) as fh:
        return parse_action_spec(fh.read())
