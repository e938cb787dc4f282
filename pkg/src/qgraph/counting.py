"""Real-interval counting of eigenvalues, map zeros and map poles.

Everything here is sign-change based: the operators are self-adjoint, so
eigenvalues are zeros of a real-valued Evans function on the real axis and
the counting identity

    N_full = sum over pieces of N_piece + delta_N

holds with delta_N = (zeros - poles) of the two-sided map on the interval.
Zeros where the function dips without changing sign are probed and counted
with multiplicity two; the paper-scale examples produce at most order-two
coincidences.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import maps
from .evans import evans
from .graphs import SAME_WIRE, SINGLE, split_graph

REFINE_TOL = 1e-10
GRID_PER_UNIT = 512       # grid points per unit of sqrt(lambda) span
MIN_GRID = 64
DIP_PREFILTER = 1e-4      # |f| below this times scale: candidate tangency
DIP_ACCEPT = 1e-9         # refined |f| minimum below this times scale: double zero
POLE_MERGE_TOL = 1e-7     # poles of different denominators closer than this merge


class GridTooCoarse(UserWarning):
    pass


class EndpointNudged(UserWarning):
    pass


class PoleOnBoundary(ValueError):
    pass


class EndpointOnSpectrum(ValueError):
    pass


@dataclass(frozen=True)
class CountReport:
    interval: tuple
    zeros: tuple       # sorted ((location, multiplicity), ...)
    poles: tuple       # sorted ((location, order), ...)
    count: int         # sum of zero multiplicities
    delta_N: object    # zeros - poles for map reports, None otherwise


def lambda_grid(interval, grid=None):
    """Scan abscissae: uniform in sqrt(lambda) when the interval allows it.

    Zeros of trig-type secular functions are ~pi-spaced in sqrt(lambda), so
    equal spacing there keeps a fixed number of points per oscillation.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if grid is None:
        span = math.sqrt(hi) - math.sqrt(lo) if lo >= 0 else math.sqrt(hi - lo)
        grid = math.ceil(GRID_PER_UNIT * span)
    grid = max(MIN_GRID, int(grid))
    if lo >= 0:
        xs = np.linspace(math.sqrt(lo), math.sqrt(hi), grid + 1) ** 2
        xs[0], xs[-1] = lo, hi  # squaring may round the ends off the interval
        return xs
    return np.linspace(lo, hi, grid + 1)


def _refine_dip(f, a, b, refine_tol):
    res = minimize_scalar(lambda x: abs(f(x)), bounds=(a, b), method="bounded",
                          options={"xatol": refine_tol})
    return float(res.x), float(res.fun)


def _scan_zeros(f, xs, refine_tol):
    """Sign-change zeros plus tangency (multiplicity 2) probing on given abscissae.

    Non-finite values (poles screened out by the caller) are skipped; sign
    changes are only read between consecutive finite samples.
    """
    with np.errstate(all="ignore"):
        vs = np.array([f(x) for x in xs], dtype=float)
    finite = np.isfinite(vs)
    fxs, fvs = xs[finite], vs[finite]
    if fxs.size < 2:
        return [], 1.0
    scale = float(np.median(np.abs(fvs)))
    if scale == 0.0:
        scale = float(np.max(np.abs(fvs))) or 1.0
    zeros = []
    for i in range(fxs.size - 1):
        if fvs[i] == 0.0:
            # grid point exactly on a zero; neighbors then show no sign change
            zeros.append((float(fxs[i]), 1))
        elif fvs[i] * fvs[i + 1] < 0.0:
            loc = brentq(f, fxs[i], fxs[i + 1], xtol=refine_tol)
            zeros.append((float(loc), 1))
    if fvs[-1] == 0.0:
        zeros.append((float(fxs[-1]), 1))
    # dips: local minima of |f| with no sign change can hide a double zero
    taken = np.array([z for z, _ in zeros]) if zeros else np.empty(0)
    for i in range(1, fxs.size - 1):
        a, b, c = fvs[i - 1], fvs[i], fvs[i + 1]
        if not (abs(b) <= abs(a) and abs(b) <= abs(c) and a * b > 0 and b * c > 0):
            continue
        if abs(b) > DIP_PREFILTER * scale:
            continue
        if taken.size and np.min(np.abs(taken - fxs[i])) < 2 * (fxs[i + 1] - fxs[i - 1]):
            continue
        loc, fmin = _refine_dip(f, fxs[i - 1], fxs[i + 1], refine_tol)
        if fmin >= DIP_ACCEPT * scale:
            continue
        h = 0.125 * (fxs[i + 1] - fxs[i - 1])
        fm, fp = f(loc - h), f(loc + h)
        if fm * fp <= 0 or (f(loc) - fm) * (fp - f(loc)) >= 0:
            warnings.warn(f"tangency near lambda={loc:.6g} has an unexpected "
                          "derivative pattern; counting it as multiplicity 2",
                          GridTooCoarse)
        zeros.append((loc, 2))
    zeros.sort()
    return zeros, scale


def _warn_if_coarse(zeros, xs):
    locs = [z for z, _ in zeros]
    for a, b in zip(locs[:-1], locs[1:]):
        i = np.clip(np.searchsorted(xs, a) - 1, 0, xs.size - 2)
        if b - a < 2 * (xs[i + 1] - xs[i]):
            warnings.warn(f"zeros at {a:.9g} and {b:.9g} closer than two grid "
                          "cells; consider a finer grid", GridTooCoarse)


def count_zeros(f, interval, grid=None, refine_tol=REFINE_TOL) -> CountReport:
    """Zeros of a real-valued function on [lo, hi], endpoints excluded."""
    xs = lambda_grid(interval, grid)
    zeros, _ = _scan_zeros(f, xs, refine_tol)
    zeros = [(z, m) for z, m in zeros if interval[0] < z < interval[1]]
    _warn_if_coarse(zeros, xs)
    return CountReport(interval=(float(interval[0]), float(interval[1])),
                       zeros=tuple(zeros), poles=(),
                       count=sum(m for _, m in zeros), delta_N=None)


def count_eigenvalues(g, bc, interval, grid=None, refine_tol=REFINE_TOL) -> CountReport:
    """Eigenvalue count as zeros of the canonical Evans function."""
    if not bc.is_real():
        raise ValueError("sign-change counting needs real boundary data")
    return count_zeros(lambda t: float(evans(g, bc, t).value),
                       interval, grid, refine_tol)


def _merge_poles(reports, pole_merge_tol):
    events = sorted((z, m) for r in reports for z, m in r.zeros)
    merged = []
    for loc, order in events:
        if merged and loc - merged[-1][0] <= pole_merge_tol * (1 + abs(loc)):
            prev_loc, prev_order = merged[-1]
            merged[-1] = (prev_loc, prev_order + order)
        else:
            merged.append((loc, order))
    return merged


def map_delta(map_fn, denominators, interval, grid=None, refine_tol=REFINE_TOL,
              pole_merge_tol=POLE_MERGE_TOL, denominator_reports=None) -> CountReport:
    """Zeros minus poles of a meromorphic map on an interval.

    Poles are not probed on the map itself: they are the zeros of the
    denominator Evans functions, merged when coincident with orders summed.
    The map's own zeros are then counted by sign change on the pole-free
    subintervals, skipping samples where evaluation blew up.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if denominator_reports is None:
        denominator_reports = [count_zeros(d, interval, grid, refine_tol)
                               for d in denominators]
    poles = _merge_poles(denominator_reports, pole_merge_tol)
    for p, _ in poles:
        if min(abs(p - lo), abs(p - hi)) <= refine_tol:
            raise PoleOnBoundary(f"map pole at lambda={p} sits on the interval boundary")

    def safe(x):
        try:
            with np.errstate(all="ignore"):
                return float(map_fn(x))
        except (maps.PoleAtLambda, ZeroDivisionError, np.linalg.LinAlgError):
            return math.nan

    total = lambda_grid(interval, grid).size - 1
    span = (math.sqrt(hi) - math.sqrt(lo)) if lo >= 0 else (hi - lo)
    zeros = []
    bounds = [(lo, False)] + [(p, True) for p, _ in poles] + [(hi, False)]
    for (a, pole_a), (b, pole_b) in zip(bounds[:-1], bounds[1:]):
        # stay just clear of each refined pole: a sample landing on its far
        # side would fake a sign change.  The margin only needs to beat the
        # bisection uncertainty; zeros interlace arbitrarily close to poles,
        # so anything larger risks swallowing one.
        trim_a = 10 * refine_tol * (1 + abs(a))
        trim_b = 10 * refine_tol * (1 + abs(b))
        a_eff = a + trim_a if pole_a else a
        b_eff = b - trim_b if pole_b else b
        if b_eff - a_eff <= 4 * refine_tol:
            continue
        share = ((math.sqrt(b) - math.sqrt(a)) / span) if lo >= 0 else ((b - a) / span)
        sub = lambda_grid((a_eff, b_eff), max(MIN_GRID, math.ceil(total * share)))
        found, _ = _scan_zeros(safe, sub, refine_tol)
        zeros.extend((z, m) for z, m in found if a_eff < z < b_eff)
    zeros = [(z, m) for z, m in sorted(zeros) if lo < z < hi]
    n_zeros = sum(m for _, m in zeros)
    n_poles = sum(o for _, o in poles)
    return CountReport(interval=(lo, hi), zeros=tuple(zeros), poles=tuple(poles),
                       count=n_zeros, delta_N=n_zeros - n_poles)


@dataclass(frozen=True)
class CountingIdentityReport:
    interval: tuple
    full: CountReport
    pieces: dict           # piece key -> CountReport, factor order
    map_report: CountReport
    holds: bool

    @property
    def pieces_total(self):
        return sum(r.count for r in self.pieces.values())

    @property
    def delta_N(self):
        return self.map_report.delta_N

    def summary(self):
        terms = " + ".join(str(r.count) for r in self.pieces.values())
        verdict = "PASS" if self.holds else "FAIL"
        return f"{self.full.count} = {terms} + {self.delta_N} {verdict}"


def _piece_keys(spec):
    if spec.mode == SINGLE:
        return ("omega1:D", "omega2:D")
    if spec.mode == SAME_WIRE:
        return ("omega1:D", "tilde1:DD", "tilde2:D")
    return ("omega1:D", "tilde1:D", "tilde2:DD")


def verify_counting(g, bc, spec, interval, grid=None,
                    refine_tol=REFINE_TOL) -> CountingIdentityReport:
    """Check N_full = sum of piece counts + delta_N, all terms independent.

    Endpoints sitting on any involved spectrum are nudged inward by
    10 * refine_tol (with a warning); if that does not clear them the
    interval is rejected.
    """
    if not bc.is_real():
        raise ValueError("sign-change counting needs real boundary data")
    parts = split_graph(g, bc, spec)
    keys = _piece_keys(spec)
    dens = {k: (lambda t, p=parts[k]: float(evans(*p, t).value)) for k in keys}
    probes = [lambda t: float(evans(g, bc, t).value)] + list(dens.values())

    def on_spectrum(x):
        return any(f(x - refine_tol) * f(x + refine_tol) <= 0 for f in probes)

    lo, hi = float(interval[0]), float(interval[1])
    for end, step in ((0, 10 * refine_tol), (1, -10 * refine_tol)):
        x = (lo, hi)[end]
        if on_spectrum(x):
            moved = x + step
            warnings.warn(f"interval endpoint {x} sits on a spectrum; "
                          f"nudged to {moved}", EndpointNudged)
            if on_spectrum(moved):
                raise EndpointOnSpectrum(f"endpoint {x} still on a spectrum "
                                         "after nudging")
            if end == 0:
                lo = moved
            else:
                hi = moved
    nudged = (lo, hi)
    full = count_eigenvalues(g, bc, nudged, grid, refine_tol)
    piece_reports = {k: count_zeros(dens[k], nudged, grid, refine_tol) for k in keys}
    map_report = map_delta(
        lambda t: maps.two_sided_value(g, bc, spec, t, parts=parts),
        list(dens.values()), nudged, grid, refine_tol,
        denominator_reports=[piece_reports[k] for k in keys])
    holds = full.count == sum(r.count for r in piece_reports.values()) + map_report.delta_N
    return CountingIdentityReport(interval=nudged, full=full, pieces=piece_reports,
                                  map_report=map_report, holds=holds)
