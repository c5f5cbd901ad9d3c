"""Words, presentations, rewriting to normal form, and ball enumeration.

A word is a sequence of (generator index, sign) letters.  A presentation
carries the generator names, a terminating rewriting system (free cancellation
is always active), and optional bounded-generation data.  Normal forms use
deterministic leftmost-first rewriting; a local-confluence check over all
short words guards against inconsistent rule sets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConjTamerError, SizeOverflow, UnknownGenerator

Letter = Tuple[int, int]  # (generator index, +1 or -1)

DEFAULT_BALL_CAP = 10**7

ABELIAN = "abelian"
NILPOTENT = "nilpotent"
FREE = "free"


@dataclass(frozen=True)
class Word:
    letters: Tuple[Letter, ...] = ()

    @property
    def length(self) -> int:
        return len(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple((g, -s) for g, s in reversed(self.letters)))

    def exponent_vector(self, d: int) -> Tuple[int, ...]:
        v = [0] * d
        for g, s in self.letters:
            v[g] += s
        return tuple(v)

    def display(self, names: Sequence[str]) -> str:
        if not self.letters:
            return "1"
        parts = []
        for g, s in self.letters:
            parts.append(names[g] if s > 0 else names[g] + "^-1")
        return " ".join(parts)


def word_from_exponents(exponents: Sequence[int]) -> Word:
    """f_1^{k_1} ... f_d^{k_d} with the generators in index order."""
    letters: List[Letter] = []
    for g, k in enumerate(exponents):
        sign = 1 if k >= 0 else -1
        letters.extend([(g, sign)] * abs(k))
    return Word(tuple(letters))


class Presentation:
    """Generator names + rewriting rules (+ optional bounded generation)."""

    def __init__(
        self,
        generators: Sequence[str],
        rules: Iterable[Tuple[Sequence[Letter], Sequence[Letter]]] = (),
        kind: str = FREE,
        bounded_generation: Optional[int] = None,
        metric_generators: Optional[Sequence[int]] = None,
    ):
        self.generators = tuple(generators)
        self.rules = tuple((tuple(l), tuple(r)) for l, r in rules)
        self.kind = kind
        self.bounded_generation = bounded_generation
        # Generators that count for word length / ball radius.  Derived
        # normal-form letters (e.g. the commutator in the Heisenberg group)
        # appear in words but are not applied during ball BFS.
        if metric_generators is None:
            metric_generators = range(len(self.generators))
        self.metric_generators = tuple(metric_generators)
        self._nf_cache: Dict[Tuple[Letter, ...], Tuple[Letter, ...]] = {}
        for lhs, rhs in self.rules:
            for g, s in lhs + rhs:
                if not (0 <= g < len(self.generators)) or s not in (-1, 1):
                    raise UnknownGenerator(f"rule letter ({g},{s}) out of range")

    @property
    def rank(self) -> int:
        return len(self.generators)

    # -- rewriting ----------------------------------------------------------

    def _step(self, w: Tuple[Letter, ...]) -> Optional[Tuple[Letter, ...]]:
        """Applies the leftmost applicable reduction (cancellation first at
        each position, then declared rules in order); None when irreducible."""
        n = len(w)
        for i in range(n):
            if i + 1 < n and w[i][0] == w[i + 1][0] and w[i][1] == -w[i + 1][1]:
                return w[:i] + w[i + 2 :]
            for lhs, rhs in self.rules:
                m = len(lhs)
                if i + m <= n and w[i : i + m] == lhs:
                    return w[:i] + rhs + w[i + m :]
        return None

    def normal_form(self, word: Word, max_steps: int = 100000) -> Word:
        key = word.letters
        cached = self._nf_cache.get(key)
        if cached is not None:
            return Word(cached)
        if self.kind == ABELIAN:
            nf = word_from_exponents(word.exponent_vector(self.rank)).letters
        else:
            w = key
            for _ in range(max_steps):
                nxt = self._step(w)
                if nxt is None:
                    break
                w = nxt
            else:
                raise ConjTamerError("rewriting did not terminate")
            nf = w
        if len(self._nf_cache) < 1_000_000:
            self._nf_cache[key] = nf
        return Word(nf)

    def _successors(self, w: Tuple[Letter, ...]) -> List[Tuple[Letter, ...]]:
        out = []
        n = len(w)
        for i in range(n):
            if i + 1 < n and w[i][0] == w[i + 1][0] and w[i][1] == -w[i + 1][1]:
                out.append(w[:i] + w[i + 2 :])
            for lhs, rhs in self.rules:
                m = len(lhs)
                if i + m <= n and w[i : i + m] == lhs:
                    out.append(w[:i] + rhs + w[i + m :])
        return out

    def check_confluence(self, max_len: int = 6) -> None:
        """Local confluence on all words up to max_len: every one-step
        successor must reduce to the same normal form."""
        alphabet = [(g, s) for g in range(self.rank) for s in (1, -1)]
        for length in range(2, max_len + 1):
            for combo in itertools.product(alphabet, repeat=length):
                succ = self._successors(combo)
                if len(succ) <= 1:
                    continue
                forms = {self.normal_form(Word(s)).letters for s in succ}
                if len(forms) > 1:
                    raise ConjTamerError(
                        f"rewriting not confluent at {combo}: {forms}"
                    )

    # -- stock presentations -------------------------------------------------

    @classmethod
    def zd(cls, d: int, names: Optional[Sequence[str]] = None) -> "Presentation":
        """Z^d: letters commute, normal form f1^k1 ... fd^kd."""
        names = tuple(names) if names else tuple(f"g{i+1}" for i in range(d))
        rules = []
        for j in range(d):
            for i in range(j):
                for sj in (1, -1):
                    for si in (1, -1):
                        rules.append((((j, sj), (i, si)), ((i, si), (j, sj))))
        return cls(names, rules, kind=ABELIAN)

    @classmethod
    def free(cls, names: Sequence[str]) -> "Presentation":
        return cls(tuple(names), (), kind=FREE)

    @classmethod
    def heisenberg(
        cls, names: Sequence[str] = ("a", "b", "c"), bounded_generation: int = 7
    ) -> "Presentation":
        """The integer Heisenberg group <a,b,c | [a,b]=c, c central> with
        normal form a^x b^y c^z."""
        a, b, c = 0, 1, 2
        rules = [
            # collect a's to the left of b's, tracking the commutator
            (((b, 1), (a, 1)), ((a, 1), (b, 1), (c, -1))),
            (((b, 1), (a, -1)), ((a, -1), (b, 1), (c, 1))),
            (((b, -1), (a, 1)), ((a, 1), (b, -1), (c, 1))),
            (((b, -1), (a, -1)), ((a, -1), (b, -1), (c, -1))),
        ]
        # c is central: push every c to the right end
        for sj in (1, -1):
            for i in (a, b):
                for si in (1, -1):
                    rules.append((((c, sj), (i, si)), ((i, si), (c, sj))))
        return cls(
            tuple(names),
            rules,
            kind=NILPOTENT,
            bounded_generation=bounded_generation,
            metric_generators=(a, b),
        )


# ---------------------------------------------------------------------------
# Balls.


@dataclass(frozen=True)
class Ball:
    """An ordered, duplicate-free list of normal-form words.

    tree[i] = (parent index, letter) reconstructs element i by appending one
    letter to an earlier element (identity has parent -1); consumers use it to
    extend orbit computations one generator application at a time.
    """

    radius: int
    elements: Tuple[Word, ...]
    kind: str  # "full" | "positive"
    sphere_sizes: Tuple[int, ...] = ()
    tree: Tuple[Tuple[int, Letter], ...] = ()
    exponents: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.elements)


def enumerate_positive_ball(d: int, n: int, cap: int = DEFAULT_BALL_CAP) -> Ball:
    """{f1^k1 ... fd^kd : 0 <= ki < n} in lexicographic exponent order."""
    if d < 0 or n < 1:
        raise ValueError("need d >= 0 and n >= 1")
    total = n**d
    if total > cap:
        raise SizeOverflow(f"positive ball would have {total} > {cap} elements")
    grids = np.indices((n,) * d).reshape(d, total).T if d else np.zeros((1, 0), int)
    words = tuple(word_from_exponents(row) for row in grids)
    return Ball(
        radius=n, elements=words, kind="positive", exponents=grids.astype(np.int64)
    )


def enumerate_ball(
    presentation: Presentation, k: int, cap: int = DEFAULT_BALL_CAP
) -> Ball:
    """The full ball of radius k over the metric generators and their
    inverses, BFS layer by layer with normal-form deduplication;
    deterministic ordering."""
    alphabet = [(g, s) for g in presentation.metric_generators for s in (1, -1)]
    seen: Dict[Tuple[Letter, ...], int] = {(): 0}
    elements: List[Word] = [Word()]
    tree: List[Tuple[int, Letter]] = [(-1, (0, 0))]
    sphere_sizes = [1]
    frontier: List[Tuple[Letter, ...]] = [()]
    for _ in range(k):
        layer: Dict[Tuple[Letter, ...], Tuple[int, Letter]] = {}
        for w in frontier:
            parent_idx = seen[w]
            for letter in alphabet:
                nf = presentation.normal_form(Word(w + (letter,))).letters
                if nf not in seen and nf not in layer:
                    layer[nf] = (parent_idx, letter)
        new_words = sorted(layer)
        if len(elements) + len(new_words) > cap:
            raise SizeOverflow(f"ball exceeds cap {cap} at radius {len(sphere_sizes)}")
        for nf in new_words:
            seen[nf] = len(elements)
            elements.append(Word(nf))
            tree.append(layer[nf])
        sphere_sizes.append(len(new_words))
        frontier = new_words
    return Ball(
        radius=k,
        elements=tuple(elements),
        kind="full",
        sphere_sizes=tuple(sphere_sizes),
        tree=tuple(tree),
    )


@dataclass(frozen=True)
class ShellSelection:
    """Radii whose shell growth passes |B(k+1)| - |B(k)| <= C|B(k)|/k, plus
    the smallest constant that would admit at least one radius."""

    radii: Tuple[int, ...]
    minimal_c: float
    measured: Tuple[float, ...]
    sizes: Tuple[int, ...]


def select_shell_radii(
    presentation: Presentation, k_max: int, growth_constant: float
) -> ShellSelection:
    ball = enumerate_ball(presentation, k_max + 1)
    sizes = np.cumsum(ball.sphere_sizes)  # |B(0)| .. |B(k_max+1)|
    measured = []
    radii = []
    for k in range(1, k_max + 1):
        c_k = k * (sizes[k + 1] - sizes[k]) / sizes[k]
        measured.append(float(c_k))
        if c_k <= growth_constant:
            radii.append(k)
    minimal_c = float(min(measured)) if measured else float("inf")
    return ShellSelection(
        radii=tuple(radii),
        minimal_c=minimal_c,
        measured=tuple(measured),
        sizes=tuple(int(s) for s in sizes),
    )
