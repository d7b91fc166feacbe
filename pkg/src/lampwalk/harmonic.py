"""The explicit harmonic function on the wreath product, evaluated pointwise.

The function sends an element (lamps, g, m) to the lamp sign at the marked
origin times the potential at the carried origin position:
h(x) = sign * a(o.(g, m)) with sign +1 when the origin lamp is off and -1
when it is on, and a the spherically symmetric potential normalized to
a(origin) = -1/2.  With that normalization the switch-or-move Laplacian of
h vanishes identically, up to the linear-solver residual; toggling any lamp
away from the origin cannot change h at all.

Evaluations are guarded by a safe radius two below the solved field radius
(one extra step of slack for Laplacian neighbours), standing in for the
pointwise limit of growing-radius fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DepthError, ValidationError
from .growth import BranchingProfile
from .group import (
    SwitchOrMove,
    Word,
    WreathElement,
    marker_position,
    switch_or_move_generators,
    wreath_apply_generator,
)
from .network import FlattenedNetwork, PotentialField, effective_resistance
from .tree import ProductVertex, TreeVertex, parity_color, chartreuse

__all__ = [
    "HarmonicEvaluator",
    "harmonic_value",
    "wreath_laplacian",
    "growth_envelope_check",
    "EnvelopeRow",
    "EnvelopeReport",
    "descend_word",
    "random_admissible_element",
]


@dataclass(frozen=True)
class HarmonicEvaluator:
    """Bundles the solved potential with the tree it was solved on."""

    field: PotentialField
    profile: BranchingProfile

    def __post_init__(self):
        if self.field.normalization != "aminushalf":
            raise ValidationError("harmonic evaluation needs the a(o)=-1/2 normalization")
        if self.field.mode != "ball":
            raise ValidationError("harmonic evaluation needs a ball-mode field")
        if self.field.profile_digest != self.profile.digest():
            raise ValidationError("field was solved on a different profile")

    @property
    def safe_radius(self) -> int:
        return self.field.radius - 2


def harmonic_value(ev: HarmonicEvaluator, x: WreathElement) -> float:
    """sign(origin lamp) times the potential at the carried origin position."""
    p = marker_position(ev.profile, x)
    dist = p.t.level + abs(p.z)
    if dist > ev.safe_radius:
        raise DepthError(
            f"orbit point at distance {dist} exceeds the safe radius "
            f"{ev.safe_radius}; solve the field with radius >= {dist + 2}"
        )
    sign = -1.0 if ProductVertex(TreeVertex(0, ()), 0) in x.lamps else 1.0
    return sign * ev.field.potential(p.t.level, p.z)


def wreath_laplacian(ev: HarmonicEvaluator, x: WreathElement) -> float:
    """sum over switch-or-move generators s of h(x) - h(x*s).

    Contract: |result| <= 10 * solver tolerance at every admissible x
    (one extra step of slack is required so all neighbours stay in radius).
    """
    p = marker_position(ev.profile, x)
    if p.t.level + abs(p.z) > ev.safe_radius - 1:
        raise DepthError(
            f"Laplacian at orbit distance {p.t.level + abs(p.z)} needs one step of "
            f"slack below the safe radius {ev.safe_radius}"
        )
    h0 = harmonic_value(ev, x)
    total = 0.0
    for s in switch_or_move_generators(ev.profile):
        total += h0 - harmonic_value(ev, wreath_apply_generator(ev.profile, x, s))
    return total


# ---------------------------------------------------------------------------
# sampling and the growth envelope


def descend_word(profile: BranchingProfile, level: int, rng) -> Word:
    """A word walking the origin straight down to a random level-`level` vertex."""
    letters = []
    for j in range(level):
        if profile.is_branch(j):
            pick = int(rng.integers(0, profile.children(j)))
            letters.append(parity_color(j + 1) if pick == 0 else chartreuse(pick))
        else:
            letters.append(parity_color(j + 1))
    return Word(tuple(letters))


def random_admissible_element(profile: BranchingProfile, rng, orbit_distance: int,
                              n_lamps: int = 3, toggle_origin: bool | None = None) -> WreathElement:
    """A wreath element whose carried origin sits at the given l1 distance.

    The word descends the tree; the shift supplies the rest of the distance;
    lamps are scattered at uniformly chosen nearby product vertices.
    """
    z = int(rng.integers(-orbit_distance, orbit_distance + 1))
    level = orbit_distance - abs(z)
    word = Word(descend_word(profile, level, rng).letters, z)
    lamps = set()
    if toggle_origin is None:
        toggle_origin = bool(rng.integers(0, 2))
    if toggle_origin:
        lamps.add(ProductVertex(TreeVertex(0, ()), 0))
    for _ in range(int(rng.integers(0, n_lamps + 1))):
        lvl = int(rng.integers(0, max(orbit_distance, 1)))
        vs = [v for v in _sample_level(profile, lvl, rng)]
        lamps.add(ProductVertex(vs[0], int(rng.integers(-orbit_distance, orbit_distance + 1))))
    return WreathElement(frozenset(lamps), word)


def _sample_level(profile: BranchingProfile, level: int, rng):
    bits = []
    for b in profile.branch_levels:
        if b < level:
            bits.append(int(rng.integers(0, profile.children(b))))
    yield TreeVertex(level, tuple(bits))


@dataclass(frozen=True)
class EnvelopeRow:
    rho: int
    samples: int
    max_abs_h: float
    res_rho: float
    sphere_min_abs: float
    sphere_max_abs: float

    @property
    def ratio(self) -> float:
        return self.max_abs_h / self.res_rho

    @property
    def harnack_ratio(self) -> float:
        return self.sphere_max_abs / self.sphere_min_abs


@dataclass(frozen=True)
class EnvelopeReport:
    rows: tuple[EnvelopeRow, ...]

    def ratio_spread(self) -> float:
        ratios = [r.ratio for r in self.rows]
        return max(ratios) / min(ratios)


def growth_envelope_check(ev: HarmonicEvaluator, radii, net: FlattenedNetwork,
                          samples: int = 64, seed: int = 0,
                          tol: float = 1e-10) -> EnvelopeReport:
    """max |h| over sampled orbit spheres, against the ball resistance.

    Also records the spread of |h| over each sampled sphere, a discrete
    Harnack proxy for the spherically symmetric potential.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for rho in radii:
        if rho > ev.safe_radius:
            raise DepthError(f"radius {rho} exceeds the safe radius {ev.safe_radius}")
        vals = []
        for _ in range(samples):
            x = random_admissible_element(ev.profile, rng, rho)
            vals.append(abs(harmonic_value(ev, x)))
        rows.append(EnvelopeRow(
            rho=rho, samples=samples, max_abs_h=max(vals),
            res_rho=effective_resistance(net, rho, tol),
            sphere_min_abs=min(vals), sphere_max_abs=max(vals),
        ))
    return EnvelopeReport(tuple(rows))
