"""Fundamental solution frames and the Evans determinant.

The frame stacks two solution families: Y columns launched from the origin
with data (-alpha2*, alpha1*), and the diagonal Z family launched from the
outer endpoints with data (-conj h_i, conj g_i).  The Evans function is the
determinant of the 2n x 2n frame matrix; it does not depend on where the
frame is evaluated, so the default evaluation point is the origin, where
the Y blocks are exact initial data and only Z propagates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import BoundaryConditions, StarGraph, require_valid_bc
from .propagate import EdgeSolution


@dataclass(frozen=True)
class FundamentalFrame:
    Y: np.ndarray
    Z: np.ndarray
    Yp: np.ndarray
    Zp: np.ndarray
    lam: complex
    eval_point: np.ndarray


@dataclass(frozen=True)
class EvansValue:
    value: complex
    lam: complex


def _frame_dtype(bc, lam):
    return complex if (complex(lam).imag != 0.0 or not bc.is_real()) else float


def z_solutions(g: StarGraph, bc: BoundaryConditions, lam):
    """Per-edge solutions z_i with z_i(l_i) = -conj(h_i), z_i'(l_i) = conj(g_i)."""
    out = []
    for j, edge in enumerate(g.edges):
        z0 = -np.conj(bc.beta2[j])
        zp0 = np.conj(bc.beta1[j])
        if _frame_dtype(bc, lam) is float:
            z0, zp0 = z0.real, zp0.real
        out.append(EdgeSolution(edge, lam, z0, zp0, anchor=edge.length))
    return out


def y_solutions(g: StarGraph, bc: BoundaryConditions, lam):
    """n x n grid of solutions; [j][i] lives on edge j inside origin family i."""
    y0 = -bc.alpha2.conj().T
    yp0 = bc.alpha1.conj().T
    if _frame_dtype(bc, lam) is float:
        y0, yp0 = y0.real, yp0.real
    n = g.n
    return [[EdgeSolution(g.edges[j], lam, y0[j, i], yp0[j, i]) for i in range(n)]
            for j in range(n)]


def fundamental_frame(g: StarGraph, bc: BoundaryConditions, lam,
                      eval_point=None) -> FundamentalFrame:
    require_valid_bc(bc)
    n = g.n
    if bc.n != n:
        raise ValueError(f"graph has {n} edges, bc has n={bc.n}")
    xs = np.zeros(n) if eval_point is None else np.asarray(eval_point, dtype=float)
    if xs.shape != (n,):
        raise ValueError("eval_point needs one coordinate per edge")
    dt = _frame_dtype(bc, lam)
    Z = np.zeros((n, n), dtype=dt)
    Zp = np.zeros((n, n), dtype=dt)
    for j, z in enumerate(z_solutions(g, bc, lam)):
        s = z.at(xs[j])
        Z[j, j], Zp[j, j] = s.value, s.deriv
    if np.all(xs == 0.0):
        Y = -bc.alpha2.conj().T
        Yp = bc.alpha1.conj().T
        if dt is float:
            Y, Yp = Y.real, Yp.real
    else:
        Y = np.zeros((n, n), dtype=dt)
        Yp = np.zeros((n, n), dtype=dt)
        for j, row in enumerate(y_solutions(g, bc, lam)):
            for i, sol in enumerate(row):
                s = sol.at(xs[j])
                Y[j, i], Yp[j, i] = s.value, s.deriv
    return FundamentalFrame(Y=Y, Z=Z, Yp=Yp, Zp=Zp, lam=lam, eval_point=xs)


def frame_matrix(frame: FundamentalFrame) -> np.ndarray:
    return np.block([[frame.Y, frame.Z], [frame.Yp, frame.Zp]])


def evans(g: StarGraph, bc: BoundaryConditions, lam,
          eval_point=None) -> EvansValue:
    frame = fundamental_frame(g, bc, lam, eval_point)
    return EvansValue(value=np.linalg.det(frame_matrix(frame)), lam=lam)


def c_matrix(frame: FundamentalFrame, bc: BoundaryConditions) -> np.ndarray:
    """alpha1 Z(0) + alpha2 Z'(0); only defined on origin-evaluated frames."""
    if np.any(frame.eval_point != 0.0):
        raise ValueError("c_matrix needs a frame evaluated at the origin")
    a1, a2 = bc.alpha1, bc.alpha2
    if frame.Z.dtype.kind != "c":
        a1, a2 = a1.real, a2.real  # keep real data real for root bracketing
    return a1 @ frame.Z + a2 @ frame.Zp


class FrameBundle:
    """Both solution families of one (graph, bc, lambda), kept evaluatable.

    Callers that only need determinants use evans(); this object serves the
    boundary-value solves, where the families act as a basis and their
    gamma-trace matrix is block diagonal: Y columns satisfy the origin
    conditions exactly and Z columns the outer ones, so only the beta-trace
    of Y and the alpha-trace of Z (the C block) survive.
    """

    def __init__(self, g: StarGraph, bc: BoundaryConditions, lam):
        require_valid_bc(bc)
        if g.n != bc.n:
            raise ValueError(f"graph has {g.n} edges, bc has n={bc.n}")
        self.graph = g
        self.bc = bc
        self.lam = lam
        self.ys = y_solutions(g, bc, lam)
        self.zs = z_solutions(g, bc, lam)
        n = g.n
        dt = _frame_dtype(bc, lam)
        Z = np.zeros((n, n), dtype=dt)
        Zp = np.zeros((n, n), dtype=dt)
        for j, z in enumerate(self.zs):
            s = z.at(0.0)
            Z[j, j], Zp[j, j] = s.value, s.deriv
        Y = -bc.alpha2.conj().T
        Yp = bc.alpha1.conj().T
        if dt is float:
            Y, Yp = Y.real, Yp.real
        self.frame0 = FundamentalFrame(Y=Y, Z=Z, Yp=Yp, Zp=Zp, lam=lam,
                                       eval_point=np.zeros(n))
        Yl = np.zeros((n, n), dtype=dt)
        Ylp = np.zeros((n, n), dtype=dt)
        for j in range(n):
            for i in range(n):
                s = self.ys[j][i].at(g.edges[j].length)
                Yl[j, i], Ylp[j, i] = s.value, s.deriv
        self.Yl, self.Ylp = Yl, Ylp

    @property
    def n(self):
        return self.graph.n

    def c_block(self):
        return c_matrix(self.frame0, self.bc)

    def beta_trace_y(self):
        b1, b2 = self.bc.beta1, self.bc.beta2
        if self.Yl.dtype.kind != "c":
            b1, b2 = b1.real, b2.real
        return b1[:, None] * self.Yl + b2[:, None] * self.Ylp

    def trace_matrix(self):
        n = self.n
        dt = self.Yl.dtype
        s = np.zeros((2 * n, 2 * n), dtype=np.promote_types(dt, self.c_block().dtype))
        s[:n, :n] = self.beta_trace_y()
        s[n:, n:] = self.c_block()
        return s

    def evans_value(self):
        return np.linalg.det(frame_matrix(self.frame0))

    def solve_trace(self, rhs):
        """Coefficients d of a combination whose gamma-trace equals rhs."""
        return np.linalg.solve(self.trace_matrix(), np.asarray(rhs))

    def component(self, d, j, xs):
        """(values, derivs) on edge j of the combination with coefficients d."""
        n = self.n
        xs = np.asarray(xs, dtype=float)
        dt = np.promote_types(np.asarray(d).dtype, self.Yl.dtype)
        u = np.zeros(xs.shape, dtype=dt)
        up = np.zeros(xs.shape, dtype=dt)
        for k in range(n):
            if d[k] != 0:
                v, vp = self.ys[j][k].on(xs)
                u += d[k] * v
                up += d[k] * vp
        if d[n + j] != 0:
            v, vp = self.zs[j].on(xs)
            u += d[n + j] * v
            up += d[n + j] * vp
        return u, up

    def component_at(self, d, j, x):
        u, up = self.component(d, j, np.array([float(x)]))
        return u[0], up[0]


def x_independence_check(g: StarGraph, bc: BoundaryConditions, lam,
                         trial_points) -> float:
    """Max relative spread of the determinant over the trial evaluation points."""
    trial_points = list(trial_points)
    if len(trial_points) < 2:
        raise ValueError("need at least two trial points")
    vals = [evans(g, bc, lam, eval_point=xs).value for xs in trial_points]
    ref = vals[0]
    return float(max(abs(v - ref) for v in vals[1:]) / (1.0 + abs(ref)))
