"""Star graphs, separated self-adjoint boundary conditions, traces, splitting.

A star graph is an ordered list of edges, each parameterized as [0, length]
with coordinate 0 at the shared origin vertex.  Boundary conditions are the
pair of n x n matrices (alpha1, alpha2) acting on origin data plus diagonal
pairs (beta1, beta2) acting on the outer endpoints, subject to the usual
rank and self-adjointness constraints.

Splitting a graph at interior points produces interval subproblems and a
residual star, each equipped with Dirichlet or Neumann conditions at the
cut.  Cut conditions always use the pair (1, 0) for Dirichlet and (0, 1)
for Neumann, whether they land in an alpha slot (cut at a local origin) or
a beta slot (cut at a local outer endpoint).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    pass


class RankDeficient(GraphError):
    pass


class NotSelfAdjoint(GraphError):
    pass


class DegenerateDiagonalPair(GraphError):
    pass


class DimensionMismatch(GraphError):
    pass


class CutOnVertex(GraphError):
    pass


class CutsOutOfOrder(GraphError):
    pass


RANK_TOL = 1e-10          # sigma_min/sigma_max threshold on the n x 2n blocks
SELFADJ_TOL = 1e-10       # scaled by (1 + max |entry|^2)


@dataclass(frozen=True)
class PiecewiseConstant:
    """Potential that is constant on each sub-interval of a partition of [0, L]."""

    pieces: tuple  # ((start, end, value), ...) sorted, contiguous

    def __post_init__(self):
        pieces = tuple((float(a), float(b), float(v)) for a, b, v in self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if not pieces:
            raise ValueError("empty piecewise potential")
        for a, b, _ in pieces:
            if not b > a:
                raise ValueError(f"empty or reversed piece ({a}, {b})")
        for (_, b0, _), (a1, _, _) in zip(pieces[:-1], pieces[1:]):
            if abs(a1 - b0) > 1e-12 * max(1.0, abs(b0)):
                raise ValueError("pieces must partition the edge without gaps or overlap")

    @property
    def span(self):
        return self.pieces[0][0], self.pieces[-1][1]

    def value_at(self, x):
        for a, b, v in self.pieces:
            if a <= x <= b:
                return v
        raise ValueError(f"x={x} outside potential domain {self.span}")

    def restrict(self, a, b):
        """Clip to [a, b] and shift so the result spans [0, b-a]."""
        out = []
        for p0, p1, v in self.pieces:
            lo, hi = max(p0, a), min(p1, b)
            if hi > lo:
                out.append((lo - a, hi - a, v))
        if not out:
            raise ValueError(f"restriction [{a}, {b}] misses the potential domain")
        # snap endpoints so the restriction exactly spans [0, b-a]
        out[0] = (0.0, out[0][1], out[0][2])
        out[-1] = (out[-1][0], b - a, out[-1][2])
        return PiecewiseConstant(tuple(out))


@dataclass(frozen=True)
class Sampled:
    """Potential given on a strictly increasing grid, linearly interpolated."""

    xs: tuple
    vs: tuple

    def __post_init__(self):
        xs = tuple(float(x) for x in self.xs)
        vs = tuple(float(v) for v in self.vs)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "vs", vs)
        if len(xs) != len(vs) or len(xs) < 2:
            raise ValueError("sampled potential needs matching grids of length >= 2")
        if any(x1 <= x0 for x0, x1 in zip(xs[:-1], xs[1:])):
            raise ValueError("sample grid must be strictly increasing")

    @property
    def span(self):
        return self.xs[0], self.xs[-1]

    def value_at(self, x):
        return float(np.interp(x, self.xs, self.vs))

    def restrict(self, a, b):
        inner = [x for x in self.xs if a < x < b]
        xs = np.array([a] + inner + [b])
        vs = np.interp(xs, self.xs, self.vs)
        return Sampled(tuple(xs - a), tuple(vs))


@dataclass(frozen=True)
class EdgeSpec:
    length: float
    potential: object  # PiecewiseConstant or Sampled

    def __post_init__(self):
        object.__setattr__(self, "length", float(self.length))
        if not self.length > 0:
            raise ValueError("edge length must be positive")
        lo, hi = self.potential.span
        if abs(lo) > 1e-12 or abs(hi - self.length) > 1e-12 * max(1.0, self.length):
            raise ValueError(f"potential spans [{lo}, {hi}], edge needs [0, {self.length}]")


def free_edge(length):
    """Edge with zero potential; the common case in examples."""
    return EdgeSpec(length, PiecewiseConstant(((0.0, length, 0.0),)))


@dataclass(frozen=True)
class StarGraph:
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        if not self.edges:
            raise ValueError("a star graph needs at least one edge")

    @property
    def n(self):
        return len(self.edges)

    @property
    def lengths(self):
        return np.array([e.length for e in self.edges])

    @property
    def total_length(self):
        return float(sum(e.length for e in self.edges))


@dataclass(frozen=True)
class BoundaryConditions:
    """alpha1 u(0) + alpha2 u'(0) = 0 at the origin, g_i u_i(l_i) + h_i u_i'(l_i) = 0 outside."""

    alpha1: np.ndarray
    alpha2: np.ndarray
    beta1: np.ndarray  # diagonal entries g_i
    beta2: np.ndarray  # diagonal entries h_i

    def __post_init__(self):
        a1 = np.atleast_2d(np.asarray(self.alpha1, dtype=complex))
        a2 = np.atleast_2d(np.asarray(self.alpha2, dtype=complex))
        b1 = np.atleast_1d(np.asarray(self.beta1, dtype=complex))
        b2 = np.atleast_1d(np.asarray(self.beta2, dtype=complex))
        object.__setattr__(self, "alpha1", a1)
        object.__setattr__(self, "alpha2", a2)
        object.__setattr__(self, "beta1", b1)
        object.__setattr__(self, "beta2", b2)
        n = a1.shape[0]
        if a1.shape != (n, n) or a2.shape != (n, n) or b1.shape != (n,) or b2.shape != (n,):
            raise DimensionMismatch("alpha matrices must be n x n, beta diagonals length n")
        real = all(np.max(np.abs(m.imag)) <= 1e-14 for m in (a1, a2, b1, b2))
        object.__setattr__(self, "_real", bool(real))

    @property
    def n(self):
        return self.alpha1.shape[0]

    def is_real(self):
        return self._real


@dataclass(frozen=True)
class BoundaryData:
    values_at_ell: np.ndarray
    derivs_at_ell: np.ndarray
    values_at_0: np.ndarray
    derivs_at_0: np.ndarray

    def __post_init__(self):
        for name in ("values_at_ell", "derivs_at_ell", "values_at_0", "derivs_at_0"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=complex)))
        n = self.values_at_ell.shape[0]
        if any(getattr(self, f).shape != (n,) for f in
               ("derivs_at_ell", "values_at_0", "derivs_at_0")):
            raise DimensionMismatch("boundary data vectors must share length n")

    @property
    def n(self):
        return self.values_at_ell.shape[0]


SINGLE = "single"
SAME_WIRE = "same_wire"
TWO_WIRES = "two_wires"


@dataclass(frozen=True)
class SplitSpec:
    """Cut positions: (edge index, coordinate), strictly interior.

    same_wire expects cuts ((j, s1), (j, s2)) with s2 < s1, matching the
    convention that the detached interval is [s2, s1].
    """

    cuts: tuple
    mode: str

    def __post_init__(self):
        cuts = tuple((int(j), float(s)) for j, s in self.cuts)
        object.__setattr__(self, "cuts", cuts)
        if self.mode not in (SINGLE, SAME_WIRE, TWO_WIRES):
            raise ValueError(f"unknown split mode {self.mode!r}")
        want = 1 if self.mode == SINGLE else 2
        if len(cuts) != want:
            raise CutsOutOfOrder(f"mode {self.mode} needs {want} cut(s), got {len(cuts)}")
        if self.mode == SAME_WIRE:
            (j1, s1), (j2, s2) = cuts
            if j1 != j2:
                raise CutsOutOfOrder("same_wire cuts must share an edge")
            if not s2 < s1:
                raise CutsOutOfOrder("same_wire cuts must satisfy s2 < s1")
        if self.mode == TWO_WIRES:
            (j1, _), (j2, _) = cuts
            if j1 == j2:
                raise CutsOutOfOrder("two_wires cuts must lie on distinct edges")


@dataclass(frozen=True)
class BcReport:
    ok: bool
    failures: tuple  # (error class name, message) pairs

    def __bool__(self):
        return self.ok


def _block_rank_ok(m1, m2):
    block = np.hstack([m1, m2])
    sv = np.linalg.svd(block, compute_uv=False)
    return sv[-1] > RANK_TOL * sv[0] if sv[0] > 0 else False


def validate_bc(bc: BoundaryConditions) -> BcReport:
    """Check rank, self-adjointness and nondegeneracy; name every failure."""
    failures = []
    a1, a2 = bc.alpha1, bc.alpha2
    if not _block_rank_ok(a1, a2):
        failures.append(("RankDeficient", "rank([alpha1 alpha2]) < n"))
    if not _block_rank_ok(np.diag(bc.beta1), np.diag(bc.beta2)):
        failures.append(("RankDeficient", "rank([beta1 beta2]) < n"))
    scale = 1.0 + max(np.abs(a1).max(), np.abs(a2).max()) ** 2
    herm = a1 @ a2.conj().T - a2 @ a1.conj().T
    if np.abs(herm).max() > SELFADJ_TOL * scale:
        failures.append(("NotSelfAdjoint", "alpha1 alpha2* != alpha2 alpha1*"))
    pair_scale = 1.0 + max(np.abs(bc.beta1).max(), np.abs(bc.beta2).max())
    for i, (g, h) in enumerate(zip(bc.beta1, bc.beta2)):
        if np.hypot(abs(g), abs(h)) <= 1e-12 * pair_scale:
            failures.append(("DegenerateDiagonalPair", f"(g_{i}, h_{i}) = (0, 0)"))
        elif abs((g * np.conj(h)).imag) > SELFADJ_TOL * pair_scale**2:
            failures.append(("NotSelfAdjoint", f"g_{i} conj(h_{i}) not real"))
    return BcReport(ok=not failures, failures=tuple(failures))


_BC_ERRORS = {
    "RankDeficient": RankDeficient,
    "NotSelfAdjoint": NotSelfAdjoint,
    "DegenerateDiagonalPair": DegenerateDiagonalPair,
}


def require_valid_bc(bc: BoundaryConditions):
    if getattr(bc, "_validated", False):  # immutable, so one pass settles it
        return bc
    report = validate_bc(bc)
    if not report.ok:
        kind, msg = report.failures[0]
        raise _BC_ERRORS[kind](msg)
    object.__setattr__(bc, "_validated", True)
    return bc


def gamma_trace(bc: BoundaryConditions, bd: BoundaryData) -> np.ndarray:
    """Stacked [beta1 u(l) + beta2 u'(l); alpha1 u(0) + alpha2 u'(0)]."""
    if bc.n != bd.n:
        raise DimensionMismatch(f"bc has n={bc.n}, data has n={bd.n}")
    top = bc.beta1 * bd.values_at_ell + bc.beta2 * bd.derivs_at_ell
    bot = bc.alpha1 @ bd.values_at_0 + bc.alpha2 @ bd.derivs_at_0
    return np.concatenate([top, bot])


def neumann_trace(bd: BoundaryData) -> np.ndarray:
    """[u'(l); -u'(0)]; the origin sign follows the outward normal."""
    return np.concatenate([bd.derivs_at_ell, -bd.derivs_at_0])


def build_preset(kind: str, n: int, theta=0.0) -> BoundaryConditions:
    """Standard condition sets.

    dirichlet / neumann apply the same condition at every endpoint.
    kirchhoff couples the origin by continuity plus flux balance and puts
    Dirichlet conditions at the outer ends.  robin imposes u'(v) + theta u(v) = 0
    at every endpoint (theta scalar, or one value per vertex with the origin
    first); theta = 0 recovers neumann.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    eye = np.eye(n)
    zero = np.zeros((n, n))
    ones = np.ones(n)
    zeros = np.zeros(n)
    kind = kind.lower()
    if kind == "dirichlet":
        bc = BoundaryConditions(eye, zero, ones, zeros)
    elif kind == "neumann":
        bc = BoundaryConditions(zero, eye, zeros, ones)
    elif kind == "kirchhoff":
        a1 = np.zeros((n, n))
        a2 = np.zeros((n, n))
        for i in range(n - 1):
            a1[i, i], a1[i, i + 1] = 1.0, -1.0
        a2[n - 1, :] = 1.0
        bc = BoundaryConditions(a1, a2, ones, zeros)
    elif kind == "robin":
        if np.ndim(theta) == 0:
            th = np.full(n + 1, float(theta))
        else:
            th = np.asarray(theta, dtype=float)
            if th.shape != (n + 1,):
                raise DimensionMismatch("robin theta must be scalar or length n+1 (origin first)")
        bc = BoundaryConditions(th[0] * eye, eye, th[1:], ones)
    else:
        raise ValueError(f"unknown preset {kind!r}")
    return require_valid_bc(bc)


DIRICHLET_PAIR = (1.0, 0.0)
NEUMANN_PAIR = (0.0, 1.0)
_CUT_PAIRS = {"D": DIRICHLET_PAIR, "N": NEUMANN_PAIR}


def _check_cut(graph, j, s):
    if not 0 <= j < graph.n:
        raise DimensionMismatch(f"edge index {j} out of range")
    ell = graph.edges[j].length
    if not 0.0 < s < ell:
        raise CutOnVertex(f"cut at {s} not interior to (0, {ell})")


def _interval_part(edge, a, b, origin_pair, far_pair):
    """One-edge star over [a, b] of `edge`, local coordinate x - a."""
    sub = StarGraph((EdgeSpec(b - a, edge.potential.restrict(a, b)),))
    c1, c2 = origin_pair
    g, h = far_pair
    bc = BoundaryConditions([[c1]], [[c2]], [g], [h])
    return sub, bc


def _shortened_star(graph, cuts):
    """Truncate each cut edge j to [0, s]; cuts is {j: s}."""
    edges = []
    for j, edge in enumerate(graph.edges):
        if j in cuts:
            s = cuts[j]
            edges.append(EdgeSpec(s, edge.potential.restrict(0.0, s)))
        else:
            edges.append(edge)
    return StarGraph(tuple(edges))


def _replace_outer(bc, replacements):
    """New bc with (g_j, h_j) overridden for each j in replacements."""
    b1, b2 = bc.beta1.copy(), bc.beta2.copy()
    for j, (g, h) in replacements.items():
        b1[j], b2[j] = g, h
    return BoundaryConditions(bc.alpha1, bc.alpha2, b1, b2)


def split_graph(graph: StarGraph, bc: BoundaryConditions, spec: SplitSpec) -> dict:
    """All subgraph problems generated by a split, keyed by piece and cut condition.

    single:    omega1:{D,N}   interval [s1, l_j], cut at local 0, outer Gamma kept
               omega2:{D,N}   star with edge j shortened to s1, cut in the beta slot
    same_wire: omega1:{D,N}, tilde1:{DD,DN,ND,NN}, tilde2:{D,N}
               tilde1 spans [s2, s1] with local 0 at s2; its first superscript
               letter is the condition at s1 (far slot), the second at s2
    two_wires: omega1:{D,N} on edge j1, tilde1:{D,N} on edge j2,
               tilde2:{DD,DN,ND,NN} with first letter at s1, second at s2
    """
    require_valid_bc(bc)
    if graph.n != bc.n:
        raise DimensionMismatch(f"graph has {graph.n} edges, bc has n={bc.n}")
    for j, s in spec.cuts:
        _check_cut(graph, j, s)
    parts = {}
    if spec.mode == SINGLE:
        (j, s1), = spec.cuts
        edge = graph.edges[j]
        far = (bc.beta1[j], bc.beta2[j])
        for c, pair in _CUT_PAIRS.items():
            parts[f"omega1:{c}"] = _interval_part(edge, s1, edge.length, pair, far)
            parts[f"omega2:{c}"] = (_shortened_star(graph, {j: s1}),
                                    _replace_outer(bc, {j: pair}))
    elif spec.mode == SAME_WIRE:
        (j, s1), (_, s2) = spec.cuts
        edge = graph.edges[j]
        far = (bc.beta1[j], bc.beta2[j])
        for c, pair in _CUT_PAIRS.items():
            parts[f"omega1:{c}"] = _interval_part(edge, s1, edge.length, pair, far)
            parts[f"tilde2:{c}"] = (_shortened_star(graph, {j: s2}),
                                    _replace_outer(bc, {j: pair}))
        for c1, pair1 in _CUT_PAIRS.items():      # condition at s1 (far slot)
            for c2, pair2 in _CUT_PAIRS.items():  # condition at s2 (origin slot)
                parts[f"tilde1:{c1}{c2}"] = _interval_part(edge, s2, s1, pair2, pair1)
    else:
        (j1, s1), (j2, s2) = spec.cuts
        e1, e2 = graph.edges[j1], graph.edges[j2]
        for c, pair in _CUT_PAIRS.items():
            parts[f"omega1:{c}"] = _interval_part(e1, s1, e1.length, pair,
                                                  (bc.beta1[j1], bc.beta2[j1]))
            parts[f"tilde1:{c}"] = _interval_part(e2, s2, e2.length, pair,
                                                  (bc.beta1[j2], bc.beta2[j2]))
        star = _shortened_star(graph, {j1: s1, j2: s2})
        for c1, pair1 in _CUT_PAIRS.items():
            for c2, pair2 in _CUT_PAIRS.items():
                parts[f"tilde2:{c1}{c2}"] = (star, _replace_outer(bc, {j1: pair1, j2: pair2}))
    for sub, sub_bc in parts.values():
        require_valid_bc(sub_bc)
    return parts
