"""Growth functions and synthesis of tree branching profiles.

A growth target is a positive C^1 function f on [1, inf) with f -> inf and
x*f'(x) non-increasing.  From it we synthesize the branch counts ell(n)
(powers of two, non-decreasing, ell(2n) <= 2*ell(n)) and the branch-point
levels b_i (b_{i+1} > 2*b_i) of a spherically symmetric tree whose
tree-times-line resistance profile sum(1/(n*ell(n))) tracks f.

Everything uses natural logarithms; log^2(8n) means (ln 8n)^2.  Below x=1
every growth function is extended as f(x) = f(1) + f'(1)*ln(x), which keeps
x*f'(x) non-increasing and makes the k-minimisation below well posed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import digamma

from .errors import EvaluationError, ValidationError

_EULER_GAMMA = 0.5772156649015328606

__all__ = [
    "GrowthSpec",
    "BranchingProfile",
    "ProfileReport",
    "eval_w2",
    "synthesize_branching",
    "analytic_resistance_sum",
    "validate_profile",
    "extend_branch_levels",
    "analytic_sum_from_levels",
    "default_k_max",
]


# ---------------------------------------------------------------------------
# growth specs


def _log_f(x):
    return np.log(x)


def _log_fp(x):
    return 1.0 / x


def _make_logpower(alpha: float):
    # (1 + ln x)^alpha: the +1 shift keeps f positive and f'(1) finite for
    # alpha < 1, while x*f'(x) = alpha*(1+ln x)^(alpha-1) stays non-increasing.
    def f(x):
        return np.power(1.0 + np.log(x), alpha)

    def fp(x):
        return alpha * np.power(1.0 + np.log(x), alpha - 1.0) / x

    return f, fp


def _loglog_f(x):
    return np.log1p(np.log(x))


def _loglog_fp(x):
    return 1.0 / (x * (1.0 + np.log(x)))


@dataclass(frozen=True)
class GrowthSpec:
    """A growth function family with evaluable f and f'.

    ``family`` is one of ``log``, ``logpower``, ``loglog``, ``custom``;
    ``scale`` multiplies both f and f'.  Custom specs supply f' tabulated
    (no differentiation is ever attempted).
    """

    family: str
    alpha: float = 1.0
    scale: float = 1.0
    table: tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self):
        if self.family not in ("log", "logpower", "loglog", "custom"):
            raise ValidationError(f"unknown growth family {self.family!r}")
        if self.family == "logpower" and not 0.0 < self.alpha <= 1.0:
            raise ValidationError("logpower exponent must lie in (0, 1]")
        if self.scale <= 0.0:
            raise ValidationError("scale must be positive")
        if self.family == "custom" and self.table is None:
            raise ValidationError("custom specs must supply a (x, f, f') table")

    @classmethod
    def log(cls, scale: float = 1.0) -> "GrowthSpec":
        return cls(family="log", scale=scale)

    @classmethod
    def logpower(cls, alpha: float, scale: float = 1.0) -> "GrowthSpec":
        return cls(family="logpower", alpha=alpha, scale=scale)

    @classmethod
    def loglog(cls, scale: float = 1.0) -> "GrowthSpec":
        return cls(family="loglog", scale=scale)

    @classmethod
    def custom(
        cls,
        xs: Sequence[float],
        fs: Sequence[float],
        fps: Sequence[float],
        scale: float = 1.0,
    ) -> "GrowthSpec":
        """Tabulated spec; f and f' are interpolated linearly in ln(x)."""
        xs = tuple(float(v) for v in xs)
        if len(xs) < 2 or any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValidationError("custom table needs >= 2 strictly increasing x values")
        if xs[0] > 1.0:
            raise ValidationError("custom table must start at x <= 1")
        return cls(
            family="custom",
            scale=scale,
            table=(xs, tuple(float(v) for v in fs), tuple(float(v) for v in fps)),
        )

    def _base_callables(self) -> tuple[Callable, Callable]:
        if self.family == "log":
            return _log_f, _log_fp
        if self.family == "logpower":
            return _make_logpower(self.alpha)
        if self.family == "loglog":
            return _loglog_f, _loglog_fp
        xs, fs, fps = self.table
        lx = np.log(np.asarray(xs))
        fa = np.asarray(fs)
        fpa = np.asarray(fps)

        def f(x):
            return np.interp(np.log(x), lx, fa)

        def fp(x):
            return np.interp(np.log(x), lx, fpa)

        return f, fp

    def f(self, x):
        """Evaluate the scaled growth function, with the sub-1 extension."""
        x = np.asarray(x, dtype=float)
        base_f, base_fp = self._base_callables()
        f1 = float(base_f(np.asarray(1.0)))
        fp1 = float(base_fp(np.asarray(1.0)))
        out = np.where(x >= 1.0, base_f(np.maximum(x, 1.0)), f1 + fp1 * np.log(np.minimum(x, 1.0)))
        return self.scale * out if out.ndim else float(self.scale * out)

    def fprime(self, x):
        """Evaluate the scaled derivative, with the sub-1 extension f'(1)/x."""
        x = np.asarray(x, dtype=float)
        _, base_fp = self._base_callables()
        fp1 = float(base_fp(np.asarray(1.0)))
        out = np.where(x >= 1.0, base_fp(np.maximum(x, 1.0)), fp1 / x)
        return self.scale * out if out.ndim else float(self.scale * out)

    def check_grid(self, n_max: int) -> list[str]:
        """Grid validation of the spec invariants on [1, n_max].

        Checks f strictly increasing and x*f'(x) non-increasing on a
        log-spaced integer grid; returns a list of human-readable problems
        (empty when the spec passes).
        """
        grid = np.unique(np.round(np.geomspace(1, max(n_max, 2), 4097)).astype(np.int64))
        grid = grid[grid >= 1]
        fv = np.asarray(self.f(grid), dtype=float)
        fpv = np.asarray(self.fprime(grid), dtype=float)
        problems = []
        if not np.all(np.isfinite(fv)):
            n_bad = int(grid[np.flatnonzero(~np.isfinite(fv))[0]])
            problems.append(f"f is not finite at n={n_bad}")
        if not np.all(np.isfinite(fpv)) or np.any(fpv <= 0):
            bad = ~np.isfinite(fpv) | (fpv <= 0)
            n_bad = int(grid[np.flatnonzero(bad)[0]])
            problems.append(f"f' is not finite and positive at n={n_bad}")
        if problems:
            return problems
        df = np.diff(fv)
        if np.any(df <= 0):
            n_bad = int(grid[np.flatnonzero(df <= 0)[0]])
            problems.append(f"f is not strictly increasing at n={n_bad}")
        xfp = grid * fpv
        rise = np.diff(xfp) > 1e-12 * np.abs(xfp[:-1])
        if np.any(rise):
            n_bad = int(grid[np.flatnonzero(rise)[0]])
            problems.append(f"x*f'(x) increases after n={n_bad}")
        return problems

    def label(self) -> str:
        if self.family == "logpower":
            s = f"logpower({self.alpha:g})"
        else:
            s = self.family
        if self.scale != 1.0:
            s += f"*{self.scale:g}"
        return s


#: presets used throughout the test and report suites
PRESETS: dict[str, GrowthSpec] = {
    "log": GrowthSpec.log(),
    "logpower_half": GrowthSpec.logpower(0.5),
    "logpower_one": GrowthSpec.logpower(1.0),
    "loglog": GrowthSpec.loglog(),
}


# ---------------------------------------------------------------------------
# w, w2 and the branching synthesis


def default_k_max(n: int) -> int:
    # beyond the sub-1 extension threshold the objective grows like 2^k,
    # so ceil(log2 n) + 60 safely brackets the minimiser
    return int(math.ceil(math.log2(max(n, 2)))) + 60


def _w2_array(spec: GrowthSpec, ns: np.ndarray, k_max: int) -> np.ndarray:
    """Vectorised min(w(n), ln(8n)^2) over an integer array of n values."""
    ns = np.asarray(ns, dtype=float)
    best = np.full(ns.shape, np.inf)
    for k in range(k_max + 1):
        x = ns * (0.5**k)
        fp = np.asarray(spec.fprime(x), dtype=float)
        bad = ~np.isfinite(fp) | (fp <= 0.0)
        if np.any(bad):
            n_bad = int(ns[np.flatnonzero(bad)[0]])
            raise EvaluationError(
                f"f' evaluation failed at n={n_bad}, k={k} (non-finite or non-positive)"
            )
        np.minimum(best, (4.0**k) / (ns * fp), out=best)
    return np.minimum(best, np.log(8.0 * ns) ** 2)


def eval_w2(spec: GrowthSpec, n: int, k_max: int | None = None) -> float:
    """min( min_k 4^k / (n f'(n 2^-k)), ln(8n)^2 ) over 0 <= k <= k_max."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if k_max is None:
        k_max = default_k_max(n)
    if k_max < 1:
        raise ValidationError("k_max must be >= 1")
    return float(_w2_array(spec, np.asarray([n]), k_max)[0])


@dataclass(frozen=True)
class BranchingProfile:
    """Branch levels and per-level branch counts of a spherically symmetric tree.

    ``branch_levels[i]`` is the distance of the i-th branch-point level from
    the root and ``degree_seq[i]`` its degree (default 3, i.e. binary
    splits).  A level-0 entry models a degree-2 root.  ``ell(n)`` counts the
    vertices at level n and multiplies by (degree - 1) one level above every
    branch level.
    """

    branch_levels: tuple[int, ...]
    max_level: int
    degree_seq: tuple[int, ...] = ()
    _ell: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.max_level < 1:
            raise ValidationError("max_level must be >= 1")
        levels = tuple(int(b) for b in self.branch_levels)
        if any(b < 0 for b in levels):
            raise ValidationError("branch levels must be >= 0")
        if any(b2 <= b1 for b1, b2 in zip(levels, levels[1:])):
            raise ValidationError("branch levels must be strictly increasing")
        degrees = tuple(int(d) for d in self.degree_seq) or (3,) * len(levels)
        if len(degrees) != len(levels):
            raise ValidationError("degree_seq length must match branch_levels")
        for b, d in zip(levels, degrees):
            if b == 0:
                if d != 2:
                    raise ValidationError("a root branch point must have degree 2")
            elif d < 3:
                raise ValidationError(f"branch point at level {b} needs degree >= 3")
        object.__setattr__(self, "branch_levels", levels)
        object.__setattr__(self, "degree_seq", degrees)
        ell = np.ones(self.max_level + 1, dtype=np.int64)
        mult = {b: (d if b == 0 else d - 1) for b, d in zip(levels, degrees)}
        for n in range(1, self.max_level + 1):
            ell[n] = ell[n - 1] * mult.get(n - 1, 1)
        object.__setattr__(self, "_ell", ell)

    # -- geometry queries ---------------------------------------------------

    def ell(self, n: int) -> int:
        """Number of vertices (equivalently branches) at level n, ell(0)=1."""
        if not 0 <= n <= self.max_level:
            raise ValidationError(f"level {n} outside [0, {self.max_level}]")
        return int(self._ell[n])

    @property
    def ell_array(self) -> np.ndarray:
        """Read-only view of ell(0..max_level)."""
        v = self._ell.view()
        v.flags.writeable = False
        return v

    def children(self, n: int) -> int:
        """Number of children of a level-n vertex (ignoring materialisation)."""
        if n in self._branch_set:
            d = dict(zip(self.branch_levels, self.degree_seq))[n]
            return d if n == 0 else d - 1
        return 1

    @property
    def _branch_set(self) -> frozenset:
        return frozenset(self.branch_levels)

    def is_branch(self, n: int) -> bool:
        return n in self._branch_set

    def degree_at(self, b: int) -> int:
        return dict(zip(self.branch_levels, self.degree_seq))[b]

    @property
    def max_chartreuse(self) -> int:
        """Largest chartreuse index used anywhere (>= 1 even for ray trees)."""
        return max((d - 2 for b, d in zip(self.branch_levels, self.degree_seq) if b > 0),
                   default=1) or 1

    def ball_volume(self, r: int) -> int:
        """|B(o, r)| counted without the root: sum of ell(n), 1 <= n <= r."""
        if not 0 <= r <= self.max_level:
            raise ValidationError(f"radius {r} outside [0, {self.max_level}]")
        return int(self._ell[1 : r + 1].sum())

    def digest(self) -> str:
        """Stable content hash, used as a cache key component."""
        payload = repr((self.branch_levels, self.degree_seq, self.max_level))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    # -- serialization ------------------------------------------------------

    def to_csv(self, path) -> None:
        """CSV with columns (n, ell) and a JSON header carrying branch data."""
        import json

        header = json.dumps(
            {
                "branch_levels": list(self.branch_levels),
                "degree_seq": list(self.degree_seq),
                "max_level": self.max_level,
            }
        )
        with open(path, "w") as fh:
            fh.write(f"# {header}\n")
            fh.write("n,ell\n")
            for n in range(1, self.max_level + 1):
                fh.write(f"{n},{self._ell[n]}\n")

    @classmethod
    def from_csv(cls, path) -> "BranchingProfile":
        import json

        with open(path) as fh:
            header = fh.readline()
        if not header.startswith("# "):
            raise ValidationError(f"{path}: missing JSON profile header")
        meta = json.loads(header[2:])
        return cls(
            branch_levels=tuple(meta["branch_levels"]),
            max_level=int(meta["max_level"]),
            degree_seq=tuple(meta["degree_seq"]),
        )


def synthesize_branching(spec: GrowthSpec, N: int) -> BranchingProfile:
    """Branching profile realizing the growth target on levels 1..N.

    ell is the power-of-two floor of the running maximum of w2 (the envelope
    makes ell non-decreasing without breaking ell(2n) <= 2 ell(n)); branch
    levels are the first levels where the envelope crosses each power of
    two, pushed up to keep b_{i+1} >= 2 b_i + 1.
    """
    if N < 2:
        raise ValidationError("N must be >= 2")
    problems = spec.check_grid(N)
    if problems:
        raise ValidationError(f"growth spec invalid on [1, {N}]: {problems[0]}")
    k_max = default_k_max(N)
    ns = np.arange(1, N + 1, dtype=np.int64)
    w2 = _w2_array(spec, ns, k_max)
    env = np.maximum.accumulate(w2)
    ell_raw = np.exp2(np.floor(np.log2(env)))
    ell_raw = np.maximum(ell_raw, 1.0)

    levels = []
    i = 1
    while True:
        idx = np.flatnonzero(ell_raw >= 2.0**i)
        if idx.size == 0:
            break
        levels.append(int(ns[idx[0]]))
        i += 1
    repaired = _repair_levels(levels, N)
    profile = BranchingProfile(branch_levels=tuple(repaired), max_level=N)
    report = validate_profile(profile)
    if not report.ok:
        raise ValidationError(f"synthesized profile failed validation: {report.failures()}")
    return profile


def _repair_levels(levels: list[int], N: int) -> list[int]:
    """Push branch levels up to b_{i+1} >= 2*b_i + 1 and drop overflow."""
    out: list[int] = []
    for b in levels:
        if out:
            b = max(b, 2 * out[-1] + 1)
        if b >= N:
            break
        out.append(b)
    return out


def analytic_resistance_sum(profile: BranchingProfile, N: int) -> float:
    """sum_{n=1}^{N} 1 / (n * ell(n)), the resistance-scale proxy."""
    if not 1 <= N <= profile.max_level:
        raise ValidationError(f"N={N} outside [1, {profile.max_level}]")
    ns = np.arange(1, N + 1, dtype=float)
    return float(np.sum(1.0 / (ns * profile.ell_array[1 : N + 1])))


# ---------------------------------------------------------------------------
# analytic extension beyond the materialized range


def _harmonic(n: int) -> float:
    """H_n = sum_{k<=n} 1/k via digamma (exact to ~1e-15 for all n)."""
    if n <= 0:
        return 0.0
    return float(digamma(n + 1) + _EULER_GAMMA)


def extend_branch_levels(spec: GrowthSpec, big_N: int, k_max: int | None = None) -> list[int]:
    """Branch levels up to big_N found by bisection, with the same repair rule.

    Relies on w2 being non-decreasing, which follows from x*f'(x)
    non-increasing; a sampled monotonicity check guards custom tables.
    """
    if k_max is None:
        k_max = default_k_max(big_N)
    sample = np.unique(np.round(np.geomspace(1, big_N, 512)).astype(np.int64))
    w2s = _w2_array(spec, sample, k_max)
    if np.any(np.diff(w2s) < -1e-9 * np.abs(w2s[:-1])):
        raise ValidationError("w2 is not non-decreasing; analytic extension unavailable")

    def w2_at(n: int) -> float:
        return float(_w2_array(spec, np.asarray([n]), k_max)[0])

    levels = []
    i = 1
    while True:
        target = 2.0**i
        if w2_at(big_N) < target:
            break
        # least n with floor-pow2(w2) >= 2^i  <=>  w2(n) >= 2^i
        lo, hi = 1, big_N
        while lo < hi:
            mid = (lo + hi) // 2
            if w2_at(mid) >= target:
                hi = mid
            else:
                lo = mid + 1
        levels.append(lo)
        i += 1
    return _repair_levels(levels, big_N)


def analytic_sum_from_levels(levels: Sequence[int], N: int) -> float:
    """sum_{n<=N} 1/(n*ell(n)) for ell determined by degree-3 branch levels.

    Piecewise-constant ell lets each stretch be a harmonic-number difference,
    so this is exact (to float precision) for astronomically large N.
    """
    total = 0.0
    prev = 0  # levels (prev, b] have ell = 2^i
    for i, b in enumerate([b for b in levels if b < N] + [N]):
        lo, hi = prev + 1, min(b, N)
        if lo <= hi:
            total += (_harmonic(hi) - _harmonic(lo - 1)) / (2.0**i)
        prev = b
        if b >= N:
            break
    return total


# ---------------------------------------------------------------------------
# validation report


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ProfileReport:
    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [f"{c.name}: {c.detail}" for c in self.checks if not c.passed]

    def __str__(self) -> str:
        lines = [f"[{'PASS' if c.passed else 'FAIL'}] {c.name}" + (f" ({c.detail})" if c.detail else "")
                 for c in self.checks]
        return "\n".join(lines)


def validate_profile(profile: BranchingProfile) -> ProfileReport:
    """Pass/fail report for every profile invariant plus the volume check."""
    checks: list[CheckResult] = []
    ell = profile.ell_array
    N = profile.max_level
    binary = all(d == 3 for b, d in zip(profile.branch_levels, profile.degree_seq) if b > 0)

    ok = bool(np.all(ell[1:] >= 1))
    checks.append(CheckResult("ell positive", ok))

    if binary:
        pow2 = bool(np.all(ell[1:] & (ell[1:] - 1) == 0))
        checks.append(CheckResult("ell is a power of two", pow2))
    else:
        checks.append(CheckResult("ell is a power of two", True, "skipped: non-binary degree_seq"))

    ok = bool(np.all(np.diff(ell[1:]) >= 0))
    checks.append(CheckResult("ell non-decreasing", ok))

    if binary:
        ns = np.arange(1, N // 2 + 1)
        ok = bool(np.all(ell[2 * ns] <= 2 * ell[ns]))
        detail = ""
        if not ok:
            n_bad = int(ns[np.flatnonzero(ell[2 * ns] > 2 * ell[ns])[0]])
            detail = f"ell(2n) > 2 ell(n) at n={n_bad}"
        checks.append(CheckResult("ell(2n) <= 2 ell(n)", ok, detail))
    else:
        checks.append(CheckResult("ell(2n) <= 2 ell(n)", True, "skipped: non-binary degree_seq"))

    ok, detail = True, ""
    bl = profile.branch_levels
    for b1, b2 in zip(bl, bl[1:]):
        if b2 <= 2 * b1 or (b1 == 0 and b2 < 2):
            ok, detail = False, f"pair ({b1}, {b2})"
            break
    checks.append(CheckResult("branch spacing b_{i+1} > 2 b_i", ok, detail))

    ok = True
    for n in range(0, N):
        if ell[n + 1] != ell[n] * profile.children(n):
            ok = False
            break
    checks.append(CheckResult("ell multiplies only at branch levels", ok))

    ns = np.arange(1, N + 1, dtype=float)
    bound = np.log(8.0 * ns) ** 2
    ok = bool(np.all(ell[1:] <= bound))
    detail = ""
    if not ok:
        n_bad = int(ns[np.flatnonzero(ell[1:] > bound)[0]])
        detail = f"ell({n_bad}) > ln(8n)^2"
    checks.append(CheckResult("subpolynomial ell(n) <= ln(8n)^2", ok, detail))

    vol = np.cumsum(ell[1:].astype(float))
    ok = bool(np.all(vol <= ns * bound))
    checks.append(CheckResult("volume |B(o,r)| <= r ln(8r)^2", ok))

    return ProfileReport(tuple(checks))
