"""Per-edge initial value problems for -u'' + V u = lam u.

Piecewise-constant potentials propagate through exact constant-coefficient
transfer matrices; sampled potentials integrate the 2x2 fundamental system
with an adaptive Runge-Kutta method and dense output.  Both paths build a
solution object once per (edge, lam, initial data) and evaluate anywhere
on the edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .graphs import EdgeSpec, PiecewiseConstant, Sampled


class OutOfDomain(ValueError):
    pass


class MismatchedEvaluationPoint(ValueError):
    pass


@dataclass(frozen=True)
class StateVector:
    value: complex
    deriv: complex
    x: float
    lam: complex


_SERIES_CUT = 1e-8  # on |omega d|^2; below this sin(omega d)/omega needs the series


def transfer_matrix(d, lam, nu=0.0):
    """Map (u, u') at x to (u, u') at x + d for constant potential nu.

    d may be negative; the formulas are parity-consistent so the result is
    the exact inverse of the forward step.  Entries stay real for real
    inputs (hyperbolic regime included), complex otherwise.
    """
    w = lam - nu
    z = w * d * d
    if abs(z) < _SERIES_CUT:
        c = 1.0 - z / 2.0 + z * z / 24.0
        s = d * (1.0 - z / 6.0 + z * z / 120.0)
    else:
        wc = complex(w)
        if wc.imag == 0.0:
            wr = wc.real
            om = math.sqrt(abs(wr))
            if wr > 0:
                c, s = math.cos(om * d), math.sin(om * d) / om
            else:
                c, s = math.cosh(om * d), math.sinh(om * d) / om
        else:
            om = np.sqrt(wc)
            c, s = np.cos(om * d), np.sin(om * d) / om
    return np.array([[c, s], [-w * s, c]])


def _domain_x(edge, x, slack=None):
    if slack is None:
        slack = 1e-12 * (1.0 + edge.length)
    if not -slack <= x <= edge.length + slack:
        raise OutOfDomain(f"x={x} outside [0, {edge.length}]")
    return min(max(x, 0.0), edge.length)


def _cs_arrays(w, d):
    """cos(omega d) and sin(omega d)/omega for scalar w = lam - nu, array d."""
    if w == 0:
        return np.ones_like(d), d.astype(float)
    wc = complex(w)
    if wc.imag == 0.0:
        om = math.sqrt(abs(wc.real))
        if wc.real > 0:
            return np.cos(om * d), np.sin(om * d) / om
        return np.cosh(om * d), np.sinh(om * d) / om
    om = np.sqrt(wc)
    return np.cos(om * d), np.sin(om * d) / om


class _PiecewiseEngine:
    """Breakpoint cache: exact states at every node, one transfer per query."""

    def __init__(self, edge, lam, value, deriv, anchor):
        pieces = edge.potential.pieces
        nodes = [pieces[0][0]] + [b for _, b, _ in pieces]
        seg_nu = [v for _, _, v in pieces]
        ia = None
        for k, (a, b, v) in enumerate(pieces):
            if a <= anchor <= b:
                ia = k
                break
        if anchor not in nodes:
            nodes.insert(ia + 1, anchor)
            seg_nu.insert(ia, seg_nu[ia])
            ia += 1
        else:
            ia = nodes.index(anchor)
        self.nodes = np.array(nodes)
        self.seg_nu = seg_nu
        self.lam = lam
        states = [None] * len(nodes)
        states[ia] = np.array([value, deriv])
        for k in range(ia + 1, len(nodes)):
            m = transfer_matrix(nodes[k] - nodes[k - 1], lam, seg_nu[k - 1])
            states[k] = m @ states[k - 1]
        for k in range(ia - 1, -1, -1):
            m = transfer_matrix(nodes[k] - nodes[k + 1], lam, seg_nu[k])
            states[k] = m @ states[k + 1]
        self.states = states
        self.anchor = anchor

    def at(self, x):
        k = int(np.searchsorted(self.nodes, x, side="right")) - 1
        k = min(max(k, 0), len(self.seg_nu) - 1)
        # step away from the anchor to keep growing modes from cancelling
        base = k if x >= self.anchor else k + 1
        m = transfer_matrix(x - self.nodes[base], self.lam, self.seg_nu[k])
        return m @ self.states[base]

    def on(self, xs):
        xs = np.asarray(xs, dtype=float)
        k = np.clip(np.searchsorted(self.nodes, xs, side="right") - 1,
                    0, len(self.seg_nu) - 1)
        base = np.where(xs >= self.anchor, k, k + 1)
        states = np.array(self.states)
        d = xs - self.nodes[base]
        u0, up0 = states[base, 0], states[base, 1]
        dt = complex if (states.dtype.kind == "c" or np.iscomplexobj(self.lam)) else float
        u = np.zeros(xs.shape, dtype=dt)
        up = np.zeros(xs.shape, dtype=dt)
        for kk in np.unique(k):
            m = k == kk
            w = self.lam - self.seg_nu[kk]
            c, s = _cs_arrays(w, d[m])
            u[m] = c * u0[m] + s * up0[m]
            up[m] = -w * s * u0[m] + c * up0[m]
        return u, up


class _AdaptiveEngine:
    """Dense-output fundamental matrix from 0, integrated as 8 real ODEs."""

    def __init__(self, edge, lam, value, deriv, anchor,
                 rtol=1e-10, atol=1e-12):
        xs = np.asarray(edge.potential.xs)
        vs = np.asarray(edge.potential.vs)
        lam = complex(lam)

        def rhs(x, y):
            m = (y[:4] + 1j * y[4:]).reshape(2, 2)
            dm = np.array([[0.0, 1.0], [np.interp(x, xs, vs) - lam, 0.0]]) @ m
            return np.concatenate([dm.real.ravel(), dm.imag.ravel()])

        y0 = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        for tols in ((rtol, atol), (1e-12, 1e-14)):
            sol = solve_ivp(rhs, (0.0, edge.length), y0, method="DOP853",
                            dense_output=True, rtol=tols[0], atol=tols[1])
            if not sol.success:
                raise RuntimeError(f"edge integration failed: {sol.message}")
            drift = abs(np.linalg.det(self._unpack(sol.sol(edge.length))) - 1.0)
            if drift <= 1e-9:
                break
        else:
            raise RuntimeError(f"Wronskian drift {drift:.2e} after tightening tolerances")
        self._sol = sol
        init = np.array([value, deriv])
        self._coef = np.linalg.solve(self._unpack(sol.sol(anchor)), init) \
            if anchor != 0.0 else init

    @staticmethod
    def _unpack(y):
        return (y[:4] + 1j * y[4:]).reshape(2, 2)

    def at(self, x):
        return self._unpack(self._sol.sol(x)) @ self._coef

    def on(self, xs):
        y = self._sol.sol(np.asarray(xs, dtype=float))
        m = (y[:4] + 1j * y[4:]).reshape(2, 2, -1)
        u = m[0, 0] * self._coef[0] + m[0, 1] * self._coef[1]
        up = m[1, 0] * self._coef[0] + m[1, 1] * self._coef[1]
        return u, up


class EdgeSolution:
    """Solution of -u'' + V u = lam u on one edge with data (value, deriv) at anchor."""

    def __init__(self, edge: EdgeSpec, lam, value, deriv, anchor=0.0):
        anchor = _domain_x(edge, anchor)
        self.edge = edge
        self.lam = lam
        if isinstance(edge.potential, PiecewiseConstant):
            self._engine = _PiecewiseEngine(edge, lam, value, deriv, anchor)
        elif isinstance(edge.potential, Sampled):
            self._engine = _AdaptiveEngine(edge, lam, value, deriv, anchor)
        else:
            raise TypeError(f"unsupported potential type {type(edge.potential).__name__}")

    def at(self, x) -> StateVector:
        x = _domain_x(self.edge, x)
        u, up = self._engine.at(x)
        return StateVector(value=u, deriv=up, x=x, lam=self.lam)

    def value_at(self, x):
        return self.at(x).value

    def deriv_at(self, x):
        return self.at(x).deriv

    def on(self, xs):
        """Vectorized (values, derivatives) over an array of positions."""
        xs = np.asarray(xs, dtype=float)
        slack = 1e-12 * (1.0 + self.edge.length)
        if xs.size and (xs.min() < -slack or xs.max() > self.edge.length + slack):
            raise OutOfDomain("evaluation points outside the edge")
        return self._engine.on(np.clip(xs, 0.0, self.edge.length))


def propagate(edge: EdgeSpec, lam, state: StateVector, to_x) -> StateVector:
    """Advance the given state along the edge to to_x."""
    sol = EdgeSolution(edge, lam, state.value, state.deriv, anchor=state.x)
    return sol.at(to_x)


@dataclass(frozen=True)
class BasisPair:
    phi: EdgeSolution    # phi(anchor) = 0, phi'(anchor) = 1
    theta: EdgeSolution  # theta(anchor) = 1, theta'(anchor) = 0
    anchor: float


def basis_pair(edge: EdgeSpec, lam, anchor=0.0) -> BasisPair:
    anchor = _domain_x(edge, anchor)
    return BasisPair(phi=EdgeSolution(edge, lam, 0.0, 1.0, anchor),
                     theta=EdgeSolution(edge, lam, 1.0, 0.0, anchor),
                     anchor=anchor)


def wronskian(a: StateVector, b: StateVector):
    """a.value b.deriv - a.deriv b.value; both states must sit at one point."""
    if abs(a.x - b.x) > 1e-12 * (1.0 + abs(a.x)) or a.lam != b.lam:
        raise MismatchedEvaluationPoint(
            f"states at (x={a.x}, lam={a.lam}) and (x={b.x}, lam={b.lam})")
    return a.value * b.deriv - a.deriv * b.value


def adaptive_reference(edge: EdgeSpec, lam, value, deriv, anchor=0.0):
    """Run the adaptive integrator on any profile; cross-check path for the
    exact piecewise propagation."""
    pot = edge.potential
    if isinstance(pot, PiecewiseConstant):
        # sample just inside each piece so the step function survives interp
        xs, vs = [], []
        for a, b, v in pot.pieces:
            eps = 1e-13 * (1.0 + b - a)
            xs.extend([a + eps, b - eps])
            vs.extend([v, v])
        xs[0], xs[-1] = pot.pieces[0][0], pot.pieces[-1][1]
        pot = Sampled(tuple(xs), tuple(vs))
        edge = EdgeSpec(edge.length, pot)
    return _AdaptiveEngine(edge, lam, value, deriv, anchor)
