"""The spherically symmetric tree, its edge 3-colouring, and coloured balls.

Vertices are coordinates (level, branch choices), never stored globally;
all probes are bounded by the profile's max_level.  The colouring rule:
the edge joining level d-1 to level d is azure when d is odd and bordeaux
when d is even, except that the non-principal children of a branch point
get chartreuse(j) edges in child order.  This is proper, assigns equal
colours at equal distances from the root, and gives every vertex at most
one edge of each colour, so each colour induces an involution of the
vertex set (vertices missing the colour are fixed).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .errors import DepthError, ValidationError
from .growth import BranchingProfile

__all__ = [
    "Color",
    "AZURE",
    "BORDEAUX",
    "chartreuse",
    "TreeVertex",
    "ProductVertex",
    "root",
    "origin",
    "parity_color",
    "neighbors",
    "apply_letter",
    "ball",
    "Ball",
    "BallType",
    "ball_code",
    "count_ball_types",
    "scan_ball_types",
    "enumerate_level",
    "TreeIndex",
]


@dataclass(frozen=True, order=True)
class Color:
    """An edge colour; also a generator letter of the involution group."""

    kind: str  # "a" (azure), "b" (bordeaux) or "c" (chartreuse)
    index: int = 0  # chartreuse child slot, >= 1; 0 for a/b

    def __post_init__(self):
        if self.kind not in ("a", "b", "c"):
            raise ValidationError(f"bad colour kind {self.kind!r}")
        if (self.kind == "c") != (self.index >= 1):
            raise ValidationError("chartreuse requires index >= 1, a/b require 0")

    def __str__(self) -> str:
        if self.kind == "c":
            return f"c{self.index}" if self.index > 1 else "c"
        return self.kind

    def key(self) -> int:
        """Total order used by canonical codes: a=0, b=1, c_j=1+j."""
        return {"a": 0, "b": 1}.get(self.kind, 1 + self.index)


AZURE = Color("a")
BORDEAUX = Color("b")


def chartreuse(j: int = 1) -> Color:
    return Color("c", j)


def parity_color(depth: int) -> Color:
    """Colour of non-chartreuse edges at a given depth (odd=azure)."""
    return AZURE if depth % 2 == 1 else BORDEAUX


@dataclass(frozen=True, order=True)
class TreeVertex:
    """Coordinates in T: distance from the root plus child choices.

    ``bits`` has one entry per branch level strictly below ``level``; entry 0
    is the principal child, entries j >= 1 pick the chartreuse(j) child.
    """

    level: int
    bits: tuple[int, ...] = ()

    def __str__(self) -> str:
        return f"({self.level};{''.join(map(str, self.bits))})"


@dataclass(frozen=True, order=True)
class ProductVertex:
    """A vertex of the product of T with the integer line."""

    t: TreeVertex
    z: int = 0

    def __str__(self) -> str:
        return f"({self.t}, {self.z})"


root = TreeVertex(0, ())
origin = ProductVertex(root, 0)


def _check_vertex(profile: BranchingProfile, v: TreeVertex) -> None:
    if not 0 <= v.level <= profile.max_level:
        raise DepthError(
            f"vertex level {v.level} beyond materialized depth {profile.max_level}; "
            f"rebuild the profile with a larger max_level"
        )
    expected = sum(1 for b in profile.branch_levels if b < v.level)
    if len(v.bits) != expected:
        raise ValidationError(
            f"vertex at level {v.level} needs {expected} branch choices, got {len(v.bits)}"
        )
    for bit, b in zip(v.bits, (b for b in profile.branch_levels if b < v.level)):
        if not 0 <= bit < profile.children(b):
            raise ValidationError(f"branch choice {bit} out of range at branch level {b}")


def _parent(profile: BranchingProfile, v: TreeVertex) -> tuple[TreeVertex, Color]:
    """Parent vertex and the colour of the edge towards it."""
    n = v.level
    if profile.is_branch(n - 1):
        last = v.bits[-1]
        parent = TreeVertex(n - 1, v.bits[:-1])
        colour = parity_color(n) if last == 0 else chartreuse(last)
    else:
        parent = TreeVertex(n - 1, v.bits)
        colour = parity_color(n)
    return parent, colour


def _children(profile: BranchingProfile, v: TreeVertex) -> list[tuple[TreeVertex, Color]]:
    n = v.level
    if profile.is_branch(n):
        k = profile.children(n)
        out = []
        for j in range(k):
            colour = parity_color(n + 1) if j == 0 else chartreuse(j)
            out.append((TreeVertex(n + 1, v.bits + (j,)), colour))
        return out
    return [(TreeVertex(n + 1, v.bits), parity_color(n + 1))]


def neighbors(profile: BranchingProfile, v: TreeVertex) -> list[tuple[TreeVertex, Color]]:
    """All tree edges at v with their colours (parent edge first)."""
    _check_vertex(profile, v)
    if v.level >= profile.max_level:
        raise DepthError(
            f"neighbors at level {v.level} need depth {v.level + 1}; "
            f"rebuild the profile with a larger max_level"
        )
    out = []
    if v.level > 0:
        out.append(_parent(profile, v))
    out.extend(_children(profile, v))
    return out


def apply_letter(profile: BranchingProfile, v: TreeVertex, letter: Color) -> TreeVertex:
    """Involution action: cross the unique letter-coloured edge, else stay.

    Moving to a child beyond max_level raises DepthError since the edge
    exists in T but is not materialized.
    """
    _check_vertex(profile, v)
    n = v.level
    if n > 0:
        parent, colour = _parent(profile, v)
        if colour == letter:
            return parent
    # child edge of the letter's colour, if any
    if profile.is_branch(n):
        k = profile.children(n)
        j = None
        if letter == parity_color(n + 1):
            j = 0
        elif letter.kind == "c" and 1 <= letter.index < k:
            j = letter.index
        if j is not None:
            if n + 1 > profile.max_level:
                raise DepthError(
                    f"letter {letter} at level {n} crosses beyond depth "
                    f"{profile.max_level}; rebuild with a larger max_level"
                )
            return TreeVertex(n + 1, v.bits + (j,))
    elif letter == parity_color(n + 1):
        if n + 1 > profile.max_level:
            raise DepthError(
                f"letter {letter} at level {n} crosses beyond depth "
                f"{profile.max_level}; rebuild with a larger max_level"
            )
        return TreeVertex(n + 1, v.bits)
    return v


def enumerate_level(profile: BranchingProfile, n: int) -> Iterator[TreeVertex]:
    """All vertices at level n in rank order."""
    if not 0 <= n <= profile.max_level:
        raise DepthError(f"level {n} beyond materialized depth {profile.max_level}")
    radices = [profile.children(b) for b in profile.branch_levels if b < n]
    total = 1
    for r in radices:
        total *= r
    for rank in range(total):
        bits, rem = [], rank
        for r in reversed(radices):
            bits.append(rem % r)
            rem //= r
        yield TreeVertex(n, tuple(reversed(bits)))


# ---------------------------------------------------------------------------
# balls and their canonical codes


@dataclass(frozen=True)
class Ball:
    """A rooted coloured ball, stored as an adjacency map."""

    root: TreeVertex
    radius: int
    adj: dict  # TreeVertex -> tuple[(TreeVertex, Color), ...]

    @property
    def vertices(self):
        return self.adj.keys()

    def edge_count(self) -> int:
        return sum(len(v) for v in self.adj.values()) // 2


@dataclass(frozen=True, order=True)
class BallType:
    """Canonical code of a rooted coloured ball up to rooted isomorphism."""

    canonical_code: bytes
    radius: int


def ball(profile: BranchingProfile, v: TreeVertex, r: int) -> Ball:
    """Induced coloured subgraph on the radius-r ball around v."""
    _check_vertex(profile, v)
    if r < 0:
        raise ValidationError("radius must be >= 0")
    if v.level + r > profile.max_level:
        raise DepthError(
            f"ball(level={v.level}, r={r}) probes depth {v.level + r} beyond "
            f"{profile.max_level}; rebuild the profile with a larger max_level"
        )
    adj: dict[TreeVertex, list] = {v: []}
    frontier = [v]
    for _ in range(r):
        nxt = []
        for u in frontier:
            for w, colour in neighbors(profile, u):
                if w not in adj:
                    adj[w] = []
                    nxt.append(w)
                    adj[u].append((w, colour))
                    adj[w].append((u, colour))
                elif (u, colour) not in adj[w]:
                    # seen vertex reached again: in a tree this only happens
                    # for the edge we came from, already recorded
                    pass
        frontier = nxt
    return Ball(root=v, radius=r, adj={k: tuple(val) for k, val in adj.items()})


def _encode(ball_: Ball, u: TreeVertex, parent: TreeVertex | None) -> bytes:
    parts = sorted(
        bytes([2 + c.key()]) + _encode(ball_, w, u)
        for w, c in ball_.adj[u]
        if w != parent
    )
    return b"(" + b"".join(parts) + b")"


def ball_code(ball_: Ball) -> BallType:
    """Recursive minimal encoding; equal codes iff rooted-colour-isomorphic."""
    return BallType(canonical_code=_encode(ball_, ball_.root, None), radius=ball_.radius)


def scan_ball_types(
    profile: BranchingProfile, r: int, scan_depth: int
) -> dict[BallType, tuple[int, TreeVertex]]:
    """Ball types over all v with level <= scan_depth: type -> (count, witness)."""
    if scan_depth + r > profile.max_level:
        raise DepthError(
            f"scan_depth {scan_depth} + r {r} exceeds depth {profile.max_level}; "
            f"rebuild the profile with a larger max_level"
        )
    out: dict[BallType, tuple[int, TreeVertex]] = {}
    for n in range(scan_depth + 1):
        for v in enumerate_level(profile, n):
            code = ball_code(ball(profile, v, r))
            if code in out:
                cnt, wit = out[code]
                out[code] = (cnt + 1, wit)
            else:
                out[code] = (1, v)
    return out


def count_ball_types(
    profile: BranchingProfile, r: int, scan_depth: int
) -> tuple[int, list[BallType]]:
    """Distinct coloured r-ball types at levels <= scan_depth, catalog sorted."""
    scan = scan_ball_types(profile, r, scan_depth)
    catalog = sorted(scan.keys(), key=lambda t: t.canonical_code)
    return len(catalog), catalog


# ---------------------------------------------------------------------------
# fast index: vectorized letter actions on a depth-truncated vertex table


class TreeIndex:
    """Integer indexing of all vertices up to a depth, with letter permutations.

    Index order is by level, then branch-choice rank (mixed radix, earliest
    branch most significant).  Letter permutation arrays map vertex index to
    image index; child moves off the bottom of the table are marked -1 and
    must be kept unreachable by the caller's depth guards.
    """

    def __init__(self, profile: BranchingProfile, depth: int):
        if depth > profile.max_level:
            raise DepthError(f"index depth {depth} exceeds profile depth {profile.max_level}")
        self.profile = profile
        self.depth = depth
        ell = profile.ell_array[: depth + 1].astype(np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(ell)])
        self.size = int(self.offsets[depth + 1])
        self.levels = np.repeat(np.arange(depth + 1), ell)
        letters = [AZURE, BORDEAUX] + [chartreuse(j) for j in range(1, profile.max_chartreuse + 1)]
        self.letters = letters
        self.perm = {letter: self._build_perm(letter) for letter in letters}

    def _build_perm(self, letter: Color) -> np.ndarray:
        prof = self.profile
        perm = np.arange(self.size, dtype=np.int64)
        for n in range(self.depth + 1):
            lo, hi = int(self.offsets[n]), int(self.offsets[n + 1])
            rank = np.arange(hi - lo, dtype=np.int64)
            idx = lo + rank
            k_par = prof.children(n - 1) if n >= 1 else 1
            last = rank % k_par if n >= 1 else None
            images = perm[lo:hi]
            if letter.kind in ("a", "b"):
                if n >= 1 and parity_color(n) == letter:
                    mask = last == 0
                    images[mask] = self.offsets[n - 1] + (rank[mask] // k_par)
                elif parity_color(n + 1) == letter:
                    if n < self.depth:
                        k_ch = prof.children(n)
                        images[:] = self.offsets[n + 1] + rank * k_ch
                    else:
                        images[:] = -1
            else:
                j = letter.index
                if n >= 1 and prof.is_branch(n - 1) and j < k_par:
                    mask = last == j
                    images[mask] = self.offsets[n - 1] + (rank[mask] // k_par)
                if prof.is_branch(n) and j < prof.children(n):
                    if n < self.depth:
                        k_ch = prof.children(n)
                        images[:] = self.offsets[n + 1] + rank * k_ch + j
                    else:
                        images[:] = -1
            perm[lo:hi] = images
        return perm

    # -- conversions ----------------------------------------------------

    def index_of(self, v: TreeVertex) -> int:
        _check_vertex(self.profile, v)
        if v.level > self.depth:
            raise DepthError(f"vertex level {v.level} beyond index depth {self.depth}")
        radices = [self.profile.children(b) for b in self.profile.branch_levels if b < v.level]
        rank = 0
        for bit, k in zip(v.bits, radices):
            rank = rank * k + bit
        return int(self.offsets[v.level] + rank)

    def vertex_at(self, i: int) -> TreeVertex:
        if not 0 <= i < self.size:
            raise ValidationError(f"index {i} out of range")
        n = int(self.levels[i])
        rank = i - int(self.offsets[n])
        radices = [self.profile.children(b) for b in self.profile.branch_levels if b < n]
        bits = []
        for k in reversed(radices):
            bits.append(rank % k)
            rank //= k
        return TreeVertex(n, tuple(reversed(bits)))

    def apply(self, letter: Color, idx):
        """Vectorised letter action on an index array (sentinel asserts)."""
        out = self.perm[letter][idx]
        if np.any(out < 0):
            raise DepthError(
                f"letter {letter} crossed the index depth {self.depth}; "
                f"build a deeper TreeIndex"
            )
        return out

    def tree_neighbor_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded neighbour table (parent first, then children) and degrees.

        Children of bottom-row vertices are omitted (pruned ball semantics).
        """
        prof = self.profile
        width = 1 + max(prof.children(n) for n in range(self.depth + 1))
        nbrs = np.full((self.size, width), -1, dtype=np.int64)
        deg = np.zeros(self.size, dtype=np.int64)
        for n in range(self.depth + 1):
            lo, hi = int(self.offsets[n]), int(self.offsets[n + 1])
            rank = np.arange(hi - lo, dtype=np.int64)
            col = 0
            if n >= 1:
                k_par = prof.children(n - 1)
                nbrs[lo:hi, 0] = self.offsets[n - 1] + rank // k_par
                col = 1
            if n < self.depth:
                k_ch = prof.children(n)
                for j in range(k_ch):
                    nbrs[lo:hi, col + j] = self.offsets[n + 1] + rank * k_ch + j
                col += k_ch
            deg[lo:hi] = col
        return nbrs, deg


@lru_cache(maxsize=16)
def tree_index(profile: BranchingProfile, depth: int) -> TreeIndex:
    """Memoised TreeIndex (profiles are frozen, so safe to key on)."""
    return TreeIndex(profile, depth)
