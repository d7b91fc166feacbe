"""Words in the coloured involution group, the wreath product, and entropy.

Group elements have no decidable normal form here; equality is always
relative to a truncation depth D (the action on the ball B(o, D)), and
every report states D.  Words multiply on the right and act on the right:
letters apply left to right.

The wreath product is the lamp group over the product graph twisted by the
coloured group times the integer shift.  Its switch-or-move generators are
the moves (one letter or shift, lamps untouched) plus the switch, which
toggles the lamp at the position currently carried onto the marked origin,
i.e. at o . (g, m)^{-1}.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DepthError, ValidationError
from .growth import BranchingProfile
from .tree import (
    AZURE,
    BORDEAUX,
    Color,
    ProductVertex,
    TreeVertex,
    apply_letter,
    chartreuse,
    origin,
    root,
    tree_index,
)

__all__ = [
    "Word",
    "WreathElement",
    "DihedralElement",
    "SwitchOrMove",
    "SWITCH",
    "switch_or_move_generators",
    "generator_letters",
    "act_word",
    "act_product",
    "wreath_apply_generator",
    "marker_position",
    "equal_on_ball",
    "dihedral_image",
    "entropy_estimate",
    "EntropyEstimate",
    "parse_word",
    "reduce_word",
]


def parse_word(text: str) -> tuple[Color, ...]:
    """Parse letters like "ab c2 a"; bare "c" means c1."""
    out = []
    for tok in re.findall(r"[ab]|c\d*", text.replace(" ", "")):
        if tok == "a":
            out.append(AZURE)
        elif tok == "b":
            out.append(BORDEAUX)
        else:
            out.append(chartreuse(int(tok[1:]) if len(tok) > 1 else 1))
    return tuple(out)


def reduce_word(letters) -> tuple[Color, ...]:
    """Cancel adjacent equal letters (each letter is an involution)."""
    out: list[Color] = []
    for letter in letters:
        if out and out[-1] == letter:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


@dataclass(frozen=True)
class Word:
    """A free word over the colour letters, with an optional integer shift."""

    letters: tuple[Color, ...] = ()
    zshift: int = 0

    @classmethod
    def of(cls, text: str, zshift: int = 0) -> "Word":
        return cls(parse_word(text), zshift)

    def __len__(self) -> int:
        return len(self.letters)

    def inverse(self) -> "Word":
        # letters are involutions, so reversing inverts the product
        return Word(tuple(reversed(self.letters)), -self.zshift)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters, self.zshift + other.zshift)

    def __str__(self) -> str:
        body = "".join(str(c) for c in self.letters) or "e"
        return body if self.zshift == 0 else f"({body}, {self.zshift:+d})"


def act_word(profile: BranchingProfile, w: Word | tuple, v: TreeVertex) -> TreeVertex:
    """Right action of the letter part on a tree vertex."""
    letters = w.letters if isinstance(w, Word) else tuple(w)
    for letter in letters:
        v = apply_letter(profile, v, letter)
    return v


def act_product(profile: BranchingProfile, w: Word, p: ProductVertex) -> ProductVertex:
    """Right action of (g, m) on the product graph: tree part by g, z by +m."""
    return ProductVertex(act_word(profile, w, p.t), p.z + w.zshift)


# ---------------------------------------------------------------------------
# wreath product


@dataclass(frozen=True)
class WreathElement:
    """(lamp set, word, shift): an element of the lamplighter wreath product.

    Lamps live on product vertices (Z/2 valued, stored as the on-set).  The
    word is kept freely reduced only by adjacent-involution cancellation;
    exact group equality is undecidable and never needed.
    """

    lamps: frozenset = frozenset()
    word: Word = Word()

    @classmethod
    def identity(cls) -> "WreathElement":
        return cls()

    def with_lamp_toggled(self, p: ProductVertex) -> "WreathElement":
        return WreathElement(self.lamps ^ {p}, self.word)


@dataclass(frozen=True)
class SwitchOrMove:
    """A switch-or-move generator: lamp toggle at the marked point, or a move."""

    kind: str  # "switch" | "letter" | "shift"
    letter: Color | None = None
    delta: int = 0

    def __str__(self) -> str:
        if self.kind == "switch":
            return "switch"
        if self.kind == "letter":
            return str(self.letter)
        return f"z{self.delta:+d}"


SWITCH = SwitchOrMove("switch")


def generator_letters(profile: BranchingProfile) -> list[Color]:
    """The letter generators of the coloured involution group for this tree."""
    return [AZURE, BORDEAUX] + [chartreuse(j) for j in range(1, profile.max_chartreuse + 1)]


def switch_or_move_generators(profile: BranchingProfile) -> list[SwitchOrMove]:
    gens = [SWITCH]
    gens += [SwitchOrMove("letter", letter=c) for c in generator_letters(profile)]
    gens += [SwitchOrMove("shift", delta=+1), SwitchOrMove("shift", delta=-1)]
    return gens


def marker_position(profile: BranchingProfile, x: WreathElement) -> ProductVertex:
    """o . (g, m): where the element carries the marked origin."""
    return act_product(profile, x.word, origin)


def wreath_apply_generator(profile: BranchingProfile, x: WreathElement,
                           s: SwitchOrMove) -> WreathElement:
    """Right multiplication by a switch-or-move generator.

    The switch toggles the lamp at the unique position v with
    v.(g, m) = o, found by acting the inverse word on the origin.
    """
    if s.kind == "letter":
        return WreathElement(x.lamps, Word(reduce_word(x.word.letters + (s.letter,)),
                                           x.word.zshift))
    if s.kind == "shift":
        return WreathElement(x.lamps, Word(x.word.letters, x.word.zshift + s.delta))
    if s.kind == "switch":
        v = act_product(profile, x.word.inverse(), origin)
        return x.with_lamp_toggled(v)
    raise ValidationError(f"unknown generator kind {s.kind!r}")


def equal_on_ball(profile: BranchingProfile, w1: Word, w2: Word, D: int) -> bool:
    """Truncated equality: same shift and same action on every level <= D."""
    if w1.zshift != w2.zshift:
        return False
    depth = D + max(len(w1), len(w2))
    if depth > profile.max_level:
        raise DepthError(f"equality test needs depth {depth} > {profile.max_level}")
    index = tree_index(profile, depth)
    lim = int(index.offsets[D + 1])
    img1 = np.arange(lim)
    img2 = np.arange(lim)
    for letter in w1.letters:
        img1 = index.apply(letter, img1)
    for letter in w2.letters:
        img2 = index.apply(letter, img2)
    return bool(np.array_equal(img1, img2))


# ---------------------------------------------------------------------------
# infinite dihedral quotient


@dataclass(frozen=True)
class DihedralElement:
    """The affine map x -> eps*x + k on the integers; eps = +-1."""

    eps: int = 1
    k: int = 0

    def __post_init__(self):
        if self.eps not in (1, -1):
            raise ValidationError("eps must be +-1")

    def __mul__(self, other: "DihedralElement") -> "DihedralElement":
        return DihedralElement(self.eps * other.eps, self.eps * other.k + self.k)

    def apply(self, x: int) -> int:
        return self.eps * x + self.k

    @property
    def is_identity(self) -> bool:
        return self.eps == 1 and self.k == 0

    def __str__(self) -> str:
        sign = "+" if self.eps == 1 else "-"
        return f"x -> {sign}x{self.k:+d}"


_DIHEDRAL_IMAGES = {
    "a": DihedralElement(-1, 0),
    "b": DihedralElement(-1, 1),
    "c": DihedralElement(1, 0),
}


def dihedral_image(w: Word | tuple) -> DihedralElement:
    """The quotient killing every chartreuse letter: a, b map to involutions."""
    letters = w.letters if isinstance(w, Word) else tuple(w)
    out = DihedralElement()
    for letter in letters:
        out = out * _DIHEDRAL_IMAGES[letter.kind]
    return out


# ---------------------------------------------------------------------------
# Monte Carlo entropy


@dataclass(frozen=True)
class EntropyEstimate:
    """Plug-in entropy of the empirical element distribution (nats).

    Elements are identified by their exact action on the ball B(o, depth_cap),
    so the estimate is truncation-merged as well as plug-in-biased: both
    effects push it down, making it lower-bound flavoured.
    """

    h_hat: float
    stderr: float
    n: int
    samples: int
    depth_cap: int
    seed: int
    distinct: int


def _plugin_entropy(counts: np.ndarray, total: int) -> float:
    c = counts[counts > 0].astype(float)
    return float(math.log(total) - np.sum(c * np.log(c)) / total)


def entropy_estimate(profile: BranchingProfile, n: int, samples: int,
                     depth_cap: int, seed: int,
                     bootstrap: int = 200) -> EntropyEstimate:
    """Sample uniform length-n words and estimate the entropy of X_n.

    Each sample is identified by the canonical code of its action table on
    B(o, depth_cap); the plug-in entropy of the empirical distribution is
    returned with a bootstrap standard error.
    """
    if samples < 100:
        raise ValidationError("entropy estimation needs at least 100 samples")
    if n < 0:
        raise ValidationError("word length must be >= 0")
    rng = np.random.default_rng(seed)
    if n == 0:
        return EntropyEstimate(0.0, 0.0, n, samples, depth_cap, seed, 1)
    if depth_cap + n > profile.max_level:
        raise DepthError(
            f"entropy at n={n}, depth_cap={depth_cap} needs depth {depth_cap + n} "
            f"> {profile.max_level}"
        )
    index = tree_index(profile, depth_cap + n)
    letters = generator_letters(profile)
    perms = np.stack([index.perm[c] for c in letters]).astype(np.int32)
    window = int(index.offsets[depth_cap + 1])
    positions = np.broadcast_to(np.arange(window, dtype=np.int32),
                                (samples, window)).copy()
    for _ in range(n):
        step = rng.integers(0, len(letters), size=samples)
        positions = perms[step[:, None], positions]
    _, counts = np.unique(positions, axis=0, return_counts=True)

    h = _plugin_entropy(counts, samples)
    probs = counts / samples
    hb = np.empty(bootstrap)
    for i in range(bootstrap):
        hb[i] = _plugin_entropy(rng.multinomial(samples, probs), samples)
    return EntropyEstimate(h, float(np.std(hb)), n, samples, depth_cap, seed,
                           int(counts.size))
