"""Flattened weighted network of the tree-times-line graph and resistances.

Collapsing all tree vertices at equal depth maps the product graph onto a
half-plane lattice F whose edge weights count collapsed edges: the edge
joining depths d-1 and d at height z has weight ell(d), the vertical edge
at depth n has weight ell(n).  Spherically symmetric Dirichlet problems on
the product graph reduce exactly to weighted solves on F, which this module
performs with a further z -> -z symmetry reduction (the z=0 vertical edge
weight is doubled and only z >= 0 is materialized, so the symmetry of the
solution is structural).

Sign convention: the stored potential abar has abar(origin) = 0 and
increases outward, i.e. the weighted Laplacian of abar is -1 at the origin
(unit current flowing from the fused boundary into the origin).  With this
orientation the effective resistance is abar(fused) - abar(origin) > 0 and
the exit identity E[abar at exit | exit before return] = Res(s) holds
exactly.  The harmonic-function normalization (origin value -1/2) negates
and shifts, which restores a weighted Laplacian of +1 at the origin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DepthError, SolverError, ValidationError
from .growth import BranchingProfile, analytic_sum_from_levels, extend_branch_levels

__all__ = [
    "FlattenedNetwork",
    "PotentialField",
    "ResistanceRow",
    "ResistanceProfile",
    "build_flattened",
    "solve_potential",
    "effective_resistance",
    "effective_resistance_square",
    "shorting_lower_bound",
    "square_shell_edge_count",
    "flow_upper_bound",
    "flow_paths",
    "resistance_report",
    "subsequence_witness",
    "save_field",
    "load_field",
]

FIELD_CACHE_VERSION = 1
DEFAULT_TOL = 1e-10
MAX_CG_ITER = 1_000_000


class FlattenedNetwork:
    """The weighted half-plane lattice F with levels 0..N and heights -M..M."""

    def __init__(self, profile: BranchingProfile, N: int, M: int | None = None,
                 node_cap: int = 8_000_000):
        if N > profile.max_level:
            raise DepthError(f"N={N} exceeds profile depth {profile.max_level}")
        M = N if M is None else M
        if (N + 1) * (2 * M + 1) > node_cap:
            raise ValidationError(
                f"network would have {(N + 1) * (2 * M + 1)} nodes, above the cap {node_cap}"
            )
        self.profile = profile
        self.N = N
        self.M = M
        self._ell = profile.ell_array[: N + 1].astype(np.float64)
        self._cache: dict = {}

    def horizontal_weight(self, d: int) -> int:
        """Weight of the edge joining depths d-1 and d (any height)."""
        if not 1 <= d <= self.N:
            raise DepthError(f"horizontal depth {d} outside [1, {self.N}]")
        return self.profile.ell(d)

    def vertical_weight(self, n: int) -> int:
        """Weight of the vertical edge at depth n (any height)."""
        if not 0 <= n <= self.N:
            raise DepthError(f"depth {n} outside [0, {self.N}]")
        return self.profile.ell(n)

    def vertex_weight(self, n: int, z: int) -> int:
        """Total incident edge weight at (n, z)."""
        if not (0 <= n <= self.N and -self.M <= z <= self.M):
            raise DepthError(f"({n}, {z}) outside the network")
        w = 0
        if n >= 1:
            w += self.profile.ell(n)
        if n < self.N:
            w += self.profile.ell(n + 1)
        w += self.profile.ell(n) * (2 if -self.M < z < self.M else 1)
        return w

    def node_count(self) -> int:
        return (self.N + 1) * (2 * self.M + 1)


def build_flattened(profile: BranchingProfile, N: int, M: int | None = None,
                    node_cap: int = 8_000_000) -> FlattenedNetwork:
    return FlattenedNetwork(profile, N, M, node_cap)


# ---------------------------------------------------------------------------
# Dirichlet solves


@dataclass
class PotentialField:
    """Spherically symmetric potential on F, one value per (level, |z|).

    ``values[n, z]`` (z >= 0) holds abar as described in the module
    docstring; entries outside the solved region are NaN.  The fused
    boundary carries the single value ``boundary_value`` (= the effective
    resistance for the a(o)=0 normalization).
    """

    radius: int
    mode: str  # "ball" (l1 sphere fused) or "square"
    normalization: str  # "a0" or "aminushalf"
    values: np.ndarray
    boundary_value: float
    tol: float
    residual: float
    profile_digest: str

    def abar(self, n: int, z: int) -> float:
        v = self.values[n, abs(z)] if 0 <= n < self.values.shape[0] \
            and abs(z) < self.values.shape[1] else np.nan
        if not np.isfinite(v):
            raise DepthError(f"({n}, {z}) outside the solved region of radius {self.radius}")
        return float(v)

    def potential(self, n: int, z: int) -> float:
        """Field value in the requested normalization."""
        v = self.abar(n, z)
        if self.normalization == "a0":
            return v
        return -v - 0.5

    def origin_value(self) -> float:
        return self.potential(0, 0)


def _assemble_ball(net: FlattenedNetwork, r: int):
    """Half-domain (z>=0) grounded Laplacian for the fused l1 sphere n+z=r.

    Folding z -> -z keeps the z=0 node equations verbatim (where the two
    mirror vertical edges merge into one of weight 2w) and scales the z>=1
    rows by 2, which restores symmetry: every vertical edge gets weight 2w,
    horizontal edges keep w at z=0 and get 2w at z>=1.  The origin row is
    unscaled, so the unit-current right-hand side is unchanged.
    """
    ell = net._ell
    counts = np.array([r - n for n in range(r)], dtype=np.int64)  # z in [0, r-1-n]
    off = np.concatenate([[0], np.cumsum(counts)])
    size = int(off[-1])
    rows, cols, vals = [], [], []
    diag = np.zeros(size)

    for n in range(r):
        zt = r - 1 - n  # largest interior z at this level
        base = off[n]
        # horizontal to (n+1, z): weight ell(n+1), doubled off the axis
        w = ell[n + 1]
        if n + 1 < r:
            zi = np.arange(0, r - 1 - n)  # (n+1, z) interior for z <= r-2-n
            wvec = np.where(zi == 0, w, 2.0 * w)
            rows.append(base + zi)
            cols.append(off[n + 1] + zi)
            vals.append(-wvec)
            diag[base + zi] += wvec
            diag[off[n + 1] + zi] += wvec
        diag[base + zt] += w if zt == 0 else 2.0 * w  # (n+1, r-1-n) fused
        # vertical to (n, z+1): always weight 2*ell(n) in the folded system
        wv = 2.0 * ell[n]
        zi = np.arange(0, zt)
        if zi.size:
            rows.append(base + zi)
            cols.append(base + zi + 1)
            vals.append(np.full(zi.size, -wv))
            diag[base + zi] += wv
            diag[base + zi + 1] += wv
        diag[base + zt] += wv  # (n, r-n) fused

    def idx(n, z):
        return int(off[n] + z)

    return _finish_assembly(size, rows, cols, vals, diag), idx, off, counts


def _assemble_square(net: FlattenedNetwork, m: int):
    """Half-domain grounded Laplacian with the square side n=m / |z|=m fused.

    Same folded-weight scheme as the ball assembly: vertical edges weigh
    2*ell(n), horizontal edges ell(n+1) on the axis and 2*ell(n+1) off it.
    """
    ell = net._ell
    size = m * m  # (n, z) for 0 <= n, z <= m-1
    rows, cols, vals = [], [], []
    diag = np.zeros(size)

    def block(n):
        return n * m

    for n in range(m):
        base = block(n)
        w = ell[n + 1]
        zi = np.arange(m)
        wh = np.where(zi == 0, w, 2.0 * w)
        if n + 1 < m:
            rows.append(base + zi)
            cols.append(block(n + 1) + zi)
            vals.append(-wh)
            diag[base + zi] += wh
            diag[block(n + 1) + zi] += wh
        else:
            diag[base + zi] += wh  # n+1 = m fused
        wv = 2.0 * ell[n]
        zj = np.arange(m - 1)
        if zj.size:
            rows.append(base + zj)
            cols.append(base + zj + 1)
            vals.append(np.full(zj.size, -wv))
            diag[base + zj] += wv
            diag[base + zj + 1] += wv
        diag[base + m - 1] += wv  # z = m fused

    def idx(n, z):
        return int(block(n) + z)

    return _finish_assembly(size, rows, cols, vals, diag), idx, None, None


def _finish_assembly(size, rows, cols, vals, diag):
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
        rows_all = np.concatenate([r, c, np.arange(size)])
        cols_all = np.concatenate([c, r, np.arange(size)])
        vals_all = np.concatenate([v, v, diag])
    else:
        rows_all = cols_all = np.arange(size)
        vals_all = diag
    return sp.csr_matrix((vals_all, (rows_all, cols_all)), shape=(size, size))


def _solve_grounded(L: sp.csr_matrix, b: np.ndarray, tol: float, method: str) -> np.ndarray:
    size = L.shape[0]
    if method == "auto":
        method = "dense" if size <= 400 else "direct"
    if method == "dense":
        u = np.linalg.solve(L.toarray(), b)
    elif method == "direct":
        u = spla.spsolve(L.tocsc(), b)
    elif method == "cg":
        dinv = 1.0 / L.diagonal()
        precond = spla.LinearOperator(L.shape, matvec=lambda x: dinv * x)
        u, info = spla.cg(L, b, rtol=0.0, atol=0.25 * tol, maxiter=MAX_CG_ITER, M=precond)
        if info > 0:
            res = float(np.linalg.norm(b - L @ u))
            raise SolverError(f"CG did not converge within {MAX_CG_ITER} iterations "
                              f"(residual {res:.3e} > tol {tol:.3e})")
    else:
        raise ValidationError(f"unknown solve method {method!r}")
    res = float(np.linalg.norm(b - L @ u))
    if not np.isfinite(res) or res > tol:
        raise SolverError(f"solve residual {res:.3e} exceeds tolerance {tol:.3e}")
    return u


def solve_potential(net: FlattenedNetwork, r: int, normalization: str = "a0",
                    tol: float = DEFAULT_TOL, mode: str = "ball",
                    method: str = "auto") -> PotentialField:
    """Solve the fused-boundary Dirichlet problem at radius (or half-side) r."""
    if normalization not in ("a0", "aminushalf"):
        raise ValidationError(f"unknown normalization {normalization!r}")
    if mode not in ("ball", "square"):
        raise ValidationError(f"unknown mode {mode!r}")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if not 1 <= r <= min(net.N, net.M):
        raise DepthError(f"radius {r} outside [1, {min(net.N, net.M)}]")

    key = ("field", mode, r, tol, method)
    if key not in net._cache:
        if mode == "ball":
            L, idx, off, counts = _assemble_ball(net, r)
        else:
            L, idx, _, _ = _assemble_square(net, r)
        b = np.zeros(L.shape[0])
        b[idx(0, 0)] = 1.0
        u = _solve_grounded(L, b, tol, method)
        res_norm = float(np.linalg.norm(b - L @ u))
        u0 = u[idx(0, 0)]

        vals = np.full((r + 1, r + 1), np.nan)
        if mode == "ball":
            for n in range(r):
                zt = r - 1 - n
                vals[n, : zt + 1] = u0 - u[idx(n, 0): idx(n, zt) + 1]
                vals[n, zt + 1] = u0  # fused sphere
            vals[r, 0] = u0
        else:
            for n in range(r):
                vals[n, :r] = u0 - u[idx(n, 0): idx(n, r - 1) + 1]
                vals[n, r] = u0
            vals[r, :] = u0
        net._cache[key] = (vals, float(u0), res_norm)

    vals, boundary, res_norm = net._cache[key]
    return PotentialField(
        radius=r, mode=mode, normalization=normalization, values=vals,
        boundary_value=boundary, tol=tol, residual=res_norm,
        profile_digest=net.profile.digest(),
    )


def effective_resistance(net: FlattenedNetwork, r: int, tol: float = DEFAULT_TOL,
                         method: str = "auto") -> float:
    """Resistance between the origin and the fused l1 sphere n+|z|=r."""
    return solve_potential(net, r, "a0", tol, "ball", method).boundary_value


def effective_resistance_square(net: FlattenedNetwork, m: int, tol: float = DEFAULT_TOL,
                                method: str = "auto") -> float:
    """Resistance between the origin and the fused square shell S_m."""
    return solve_potential(net, m, "a0", tol, "square", method).boundary_value


# ---------------------------------------------------------------------------
# rigorous two-sided bounds


def square_shell_edge_count(profile: BranchingProfile, n: int) -> int:
    """Exact number of product-graph edges between shells S_{n-1} and S_n.

    Tree-direction edges: one per level-n tree vertex per height |z| <= n-1,
    i.e. (2n-1)*ell(n).  Line-direction edges: one per tree vertex of depth
    <= n-1 on each of the two crossings z = +-(n-1) -> +-n, i.e.
    2*sum_{d<=n-1} ell(d) (the root counts, ell(0)=1).
    """
    if not 1 <= n <= profile.max_level:
        raise DepthError(f"shell index {n} outside [1, {profile.max_level}]")
    ell = profile.ell_array
    return int((2 * n - 1) * ell[n] + 2 * ell[:n].sum())


def shorting_lower_bound(profile: BranchingProfile, m: int) -> float:
    """sum_{n<=m} 1/E_n: shorting every shell only decreases the resistance."""
    if not 1 <= m <= profile.max_level:
        raise DepthError(f"m={m} outside [1, {profile.max_level}]")
    ell = profile.ell_array.astype(np.float64)
    ns = np.arange(1, m + 1, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(ell)])  # csum[n] = sum_{d<n} ell(d)
    e = (2 * ns - 1) * ell[1 : m + 1] + 2.0 * csum[1 : m + 1]
    return float(np.sum(1.0 / e))


def _staircase(m: int, k: int) -> list[tuple[int, int]]:
    """Monotone lattice discretization of the segment (0,0)->(m,k), |k|<=m.

    Column heights minimize the distance to the line, ties resolved downward;
    between columns the vertical step comes first.  Integer arithmetic only.
    """
    pts = [(0, 0)]
    y_prev = 0
    for x in range(1, m + 1):
        q, rem = divmod(k * x, m)
        # candidates q and q+1; pick the closer, ties to the smaller
        y = q if 2 * rem <= m else q + 1
        if y != y_prev:
            pts.append((x - 1, y))
        pts.append((x, y))
        y_prev = y
    return pts


def flow_paths(profile: BranchingProfile, m: int) -> list[list[tuple[int, int]]]:
    """The 2m+1 staircase paths of the explicit unit flow to the square S_m."""
    return [_staircase(m, k) for k in range(-m, m + 1)]


def flow_upper_bound(profile: BranchingProfile, m: int) -> float:
    """Energy of the explicit unit flow from the origin to the square S_m.

    Mass 1/(2m+1) flows along each staircase; on the flattened graph the
    even split across the ell parallel tree edges gives energy
    sum_e flow(e)^2 / weight(e).  Conservation is verified exactly in
    rational arithmetic before the energy is returned.
    """
    if not 1 <= m <= profile.max_level:
        raise DepthError(f"m={m} outside [1, {profile.max_level}]")
    mass = Fraction(1, 2 * m + 1)
    flow: dict[tuple[tuple[int, int], tuple[int, int]], Fraction] = {}
    div: dict[tuple[int, int], Fraction] = {}
    for path in flow_paths(profile, m):
        for a, b in zip(path, path[1:]):
            key, sign = ((a, b), 1) if a <= b else ((b, a), -1)
            flow[key] = flow.get(key, Fraction(0)) + sign * mass
            div[a] = div.get(a, Fraction(0)) + mass
            div[b] = div.get(b, Fraction(0)) - mass

    def on_target(p):
        return p[0] == m and abs(p[1]) <= m

    sink_total = Fraction(0)
    for p, d in div.items():
        if p == (0, 0):
            if d != 1:
                raise SolverError(f"flow source emits {d}, not 1 (construction bug)")
        elif on_target(p):
            sink_total += -d
        elif d != 0:
            raise SolverError(f"flow not conserved at {p}: divergence {d} (construction bug)")
    if sink_total != 1:
        raise SolverError(f"flow sinks absorb {sink_total}, not 1 (construction bug)")

    ell = profile.ell_array
    energy = Fraction(0)
    for (a, b), phi in flow.items():
        if phi == 0:
            continue
        w = int(ell[b[0]]) if a[0] == b[0] else int(ell[max(a[0], b[0])])
        energy += phi * phi / w
    return float(energy)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ResistanceRow:
    m: int
    res_exact: float
    lower_shorting: float
    upper_flow: float
    analytic_sum: float

    @property
    def ratio(self) -> float:
        return self.res_exact / self.analytic_sum


@dataclass(frozen=True)
class ResistanceProfile:
    rows: tuple[ResistanceRow, ...]

    def ratios(self) -> list[float]:
        return [r.ratio for r in self.rows]


def resistance_report(profile: BranchingProfile, m_list, tol: float = DEFAULT_TOL,
                      method: str = "auto", bracket_tol: float = 1e-8) -> ResistanceProfile:
    """Exact square resistances with shorting/flow brackets and the analytic sum."""
    from .growth import analytic_resistance_sum

    m_list = sorted(set(int(m) for m in m_list))
    if not m_list:
        raise ValidationError("m_list must be nonempty")
    net = build_flattened(profile, max(m_list))
    rows = []
    for m in m_list:
        row = ResistanceRow(
            m=m,
            res_exact=effective_resistance_square(net, m, tol, method),
            lower_shorting=shorting_lower_bound(profile, m),
            upper_flow=flow_upper_bound(profile, m),
            analytic_sum=analytic_resistance_sum(profile, m),
        )
        if not (row.lower_shorting <= row.res_exact + bracket_tol
                and row.res_exact <= row.upper_flow + bracket_tol):
            raise SolverError(
                f"resistance bracket violated at m={m}: "
                f"{row.lower_shorting} <= {row.res_exact} <= {row.upper_flow} fails"
            )
        rows.append(row)
    return ResistanceProfile(tuple(rows))


def subsequence_witness(profile: BranchingProfile, big_N: int, spec=None) -> list[int]:
    """All r = 2^(3^k) <= big_N^(1/3) whose analytic proxy triples gently.

    A candidate r passes when sum(r^3) <= 4*sum(r) for the proxy
    sum_{n<=x} 1/(n*ell(n)); beyond the materialized depth the profile is
    extended analytically from the growth spec (no solves anywhere).
    """
    if any(d != 3 for b, d in zip(profile.branch_levels, profile.degree_seq) if b > 0):
        raise ValidationError("analytic extension requires a degree-3 profile")
    if big_N <= profile.max_level:
        levels = list(profile.branch_levels)
    else:
        if spec is None:
            raise ValidationError("big_N beyond the profile depth needs the growth spec")
        levels = extend_branch_levels(spec, big_N)
        if levels[: len(profile.branch_levels)] != list(profile.branch_levels):
            raise ValidationError("analytic extension disagrees with the profile's levels")

    out = []
    k = 0
    while True:
        r = 2 ** (3**k)
        if r**3 > big_N:
            break
        if analytic_sum_from_levels(levels, r**3) <= 4.0 * analytic_sum_from_levels(levels, r):
            out.append(r)
        k += 1
    return out


# ---------------------------------------------------------------------------
# binary field cache


def _field_path(cache_dir: Path, digest: str, r: int, tol: float, normalization: str,
                mode: str) -> Path:
    return Path(cache_dir) / f"field_{digest}_{mode}_{r}_{tol:.3e}_{normalization}.npz"


def save_field(field: PotentialField, cache_dir) -> Path:
    """Persist a solved field; the header carries a format version."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = _field_path(cache_dir, field.profile_digest, field.radius, field.tol,
                       field.normalization, field.mode)
    header = json.dumps({
        "version": FIELD_CACHE_VERSION,
        "radius": field.radius,
        "mode": field.mode,
        "normalization": field.normalization,
        "boundary_value": field.boundary_value,
        "tol": field.tol,
        "residual": field.residual,
        "profile_digest": field.profile_digest,
    })
    np.savez(path, header=np.frombuffer(header.encode(), dtype=np.uint8),
             values=field.values)
    return path


def load_field(cache_dir, profile_digest: str, r: int, tol: float,
               normalization: str = "a0", mode: str = "ball") -> PotentialField | None:
    """Load a cached field; any header mismatch or corruption returns None."""
    path = _field_path(Path(cache_dir), profile_digest, r, tol, normalization, mode)
    if not path.exists():
        return None
    try:
        with np.load(path) as data:
            header = json.loads(bytes(data["header"]).decode())
            if header.get("version") != FIELD_CACHE_VERSION:
                return None
            if (header["radius"], header["mode"], header["normalization"],
                    header["profile_digest"]) != (r, mode, normalization, profile_digest):
                return None
            return PotentialField(
                radius=r, mode=mode, normalization=normalization,
                values=data["values"], boundary_value=float(header["boundary_value"]),
                tol=float(header["tol"]), residual=float(header["residual"]),
                profile_digest=profile_digest,
            )
    except Exception:
        return None
