"""Geodesic flow, closed-orbit finding, Jacobi monodromy, and orbit integrals.

Closed geodesics of a deformed metric are computed as minimizers of the
discrete energy sum_i d_i^T g_t(mid_i) d_i over twisted-periodic polylines
(the last segment closes through the deck transformation), by damped Newton
with a colored finite-difference Hessian and a sparse solve.  The converged
polyline is reparametrized to uniform g_t-speed and refined in resolution
until the continuum geodesic-equation defect passes tolerance.
"""

from __future__ import annotations

import csv
import io
import json
import weakref
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import make_interp_spline

from .cover import Jet, jet_add, jet_scale, _FieldJetTable
from .fields import Field
from .fuchsian import MobiusElement, length_of
from .metric import (
    ConformalChart, ConformalExp, LinearTensor, MetricFamily, gauss_curvature,
)

__all__ = [
    "PhasePoint", "OrbitPolyline", "MonodromyMatrix", "EscapeError",
    "ConvergenceError", "ModelError", "integrate_geodesic", "jacobi_monodromy",
    "find_closed_geodesic", "orbit_length", "line_integral_hTT",
    "integrate_scalar_along", "fd_length_derivative", "axis_orbit",
    "family_jets", "orbit_to_csv", "orbit_from_csv",
]

MetricLike = Union[ConformalChart, Tuple[MetricFamily, float]]


class EscapeError(RuntimeError):
    """Trajectory left the chart domain."""

    def __init__(self, msg, exit_point=None):
        super().__init__(msg)
        self.exit_point = exit_point


class ConvergenceError(RuntimeError):
    """Newton iteration failed to converge; carries the final residual."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class ModelError(RuntimeError):
    """Model assumption violated (e.g. curvature sign)."""


@dataclass
class PhasePoint:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        self.theta = float(np.mod(self.theta, 2.0 * np.pi))


@dataclass
class MonodromyMatrix:
    p: np.ndarray
    L: float

    def __post_init__(self):
        # entries grow like e^L, so the Wronskian check and the I - P
        # determinant are evaluated in extended precision
        self._pld = np.asarray(self.p, dtype=np.longdouble).reshape(2, 2)
        self.p = self._pld.astype(float)
        det = float(self._pld[0, 0] * self._pld[1, 1]
                    - self._pld[0, 1] * self._pld[1, 0])
        if abs(det - 1.0) > 1e-8:
            raise ValueError(f"monodromy determinant {det} != 1")

    @property
    def det_weight(self) -> float:
        """|det(I - P)|"""
        a, b, c, d = self._pld.reshape(4)
        return float(abs((1.0 - a) * (1.0 - d) - b * c))

    def iterate(self, m: int) -> "MonodromyMatrix":
        out = np.eye(2, dtype=np.longdouble)
        for _ in range(m):
            out = out @ self._pld
        return MonodromyMatrix(out, m * self.L)


# ---------------------------------------------------------------------------
# Metric jets of a family (values + derivatives of E, F, G at points)
# ---------------------------------------------------------------------------

_table_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _table(field: Field) -> _FieldJetTable:
    tab = _table_cache.get(field)
    if tab is None:
        tab = _FieldJetTable(field)
        _table_cache[field] = tab
    return tab


def _scalar_jet(field: Field, x, y, order) -> Jet:
    ext = getattr(field, "ext", None)
    if ext is not None and getattr(field, "slot", None) == "f":
        return ext.jets(x, y, order)[field.name]
    return _table(field).jet(x, y, order)


def _jet_exp(c: float, J: Jet) -> Jet:
    f = np.exp(c * J["f"])
    return {
        "f": f,
        "fx": c * J["fx"] * f,
        "fy": c * J["fy"] * f,
        "fxx": (c * J["fxx"] + c * c * J["fx"] ** 2) * f,
        "fxy": (c * J["fxy"] + c * c * J["fx"] * J["fy"]) * f,
        "fyy": (c * J["fyy"] + c * c * J["fy"] ** 2) * f,
    }


def _jet_const(template: Jet) -> Jet:
    return {k: np.zeros_like(template["f"]) for k in template}


def family_jets(family: MetricFamily, t: float, x, y, order=1) -> Dict[str, Jet]:
    """Jets of the metric components E, F, G of g_t at points (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    P = _scalar_jet(family.base.phi, x, y, order)
    if isinstance(family.law, ConformalExp):
        U = _scalar_jet(family.law.u, x, y, order)
        tot = jet_add(P, jet_scale(t, U))
        E = _jet_exp(2.0, tot)
        return {"E": E, "F": _jet_const(E), "G": {k: v.copy() for k, v in E.items()}}
    conf = _jet_exp(2.0, P)
    h = family.law.h
    ext = getattr(h, "_equivariant", None)
    if ext is not None:
        jets = ext.jets(x, y, order)
        H11, H12, H22 = jets["h11"], jets["h12"], jets["h22"]
    else:
        H11 = _scalar_jet(h.h11, x, y, order)
        H12 = _scalar_jet(h.h12, x, y, order)
        H22 = _scalar_jet(h.h22, x, y, order)
    return {
        "E": jet_add(conf, jet_scale(t, H11)),
        "F": jet_scale(t, H12),
        "G": jet_add(conf, jet_scale(t, H22)),
    }


def _metric_like_jets(metric: MetricLike, x, y, order=1) -> Dict[str, Jet]:
    if isinstance(metric, ConformalChart):
        return family_jets(MetricFamily(metric, ConformalExp("0*x")), 0.0, x, y, order)
    fam, t = metric
    return family_jets(fam, t, x, y, order)


def _christoffels(jets: Dict[str, Jet]):
    """Gamma[k, i, j] arrays from first-order metric jets."""
    E, F, G = jets["E"], jets["F"], jets["G"]
    g11, g12, g22 = E["f"], F["f"], G["f"]
    d1 = (E["fx"], F["fx"], G["fx"])
    d2 = (E["fy"], F["fy"], G["fy"])
    det = g11 * g22 - g12 * g12
    i11, i12, i22 = g22 / det, -g12 / det, g11 / det
    # Gamma_{ij,l} = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    G111 = 0.5 * d1[0]
    G112 = d1[1] - 0.5 * d2[0]
    G121 = 0.5 * d2[0]
    G122 = 0.5 * d1[2]
    G221 = d2[1] - 0.5 * d1[2]
    G222 = 0.5 * d2[2]
    out = np.empty((2, 2, 2) + np.shape(g11))
    out[0, 0, 0] = i11 * G111 + i12 * G112
    out[0, 0, 1] = out[0, 1, 0] = i11 * G121 + i12 * G122
    out[0, 1, 1] = i11 * G221 + i12 * G222
    out[1, 0, 0] = i12 * G111 + i22 * G112
    out[1, 0, 1] = out[1, 1, 0] = i12 * G121 + i22 * G122
    out[1, 1, 1] = i12 * G221 + i22 * G222
    return out


def brioschi_from_jets(jets: Dict[str, Jet]):
    E, F, G = jets["E"], jets["F"], jets["G"]
    Ev, Fv, Gv = E["f"], F["f"], G["f"]
    m1 = np.stack([
        np.stack(np.broadcast_arrays(-0.5 * E["fyy"] + F["fxy"] - 0.5 * G["fxx"],
                                     0.5 * E["fx"], F["fx"] - 0.5 * E["fy"]), axis=-1),
        np.stack(np.broadcast_arrays(F["fy"] - 0.5 * G["fx"], Ev, Fv), axis=-1),
        np.stack(np.broadcast_arrays(0.5 * G["fy"], Fv, Gv), axis=-1),
    ], axis=-2)
    zero = np.zeros_like(Ev)
    m2 = np.stack([
        np.stack(np.broadcast_arrays(zero, 0.5 * E["fy"], 0.5 * G["fx"]), axis=-1),
        np.stack(np.broadcast_arrays(0.5 * E["fy"], Ev, Fv), axis=-1),
        np.stack(np.broadcast_arrays(0.5 * G["fx"], Fv, Gv), axis=-1),
    ], axis=-2)
    det = Ev * Gv - Fv * Fv
    return (np.linalg.det(m1) - np.linalg.det(m2)) / det ** 2


# ---------------------------------------------------------------------------
# Geodesic flow integrator (conformal chart, arclength parameter)
# ---------------------------------------------------------------------------

_DP_A = [
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
]
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)


def _flow_rhs(chart: ConformalChart, state):
    x, y, th = state[..., 0], state[..., 1], state[..., 2]
    w = np.exp(-chart.phi.ev(x, y))
    px, py = chart.phi_grad(x, y)
    ct, st = np.cos(th), np.sin(th)
    return np.stack([w * ct, w * st, w * (py * ct - px * st)], axis=-1)


def integrate_geodesic(chart: ConformalChart, z0: PhasePoint, tau: float,
                       steps: Optional[int] = None) -> PhasePoint:
    """Advance the unit-speed geodesic flow by arclength tau (5th-order RK,
    fixed step, at least 512 steps per systole-scale period)."""
    if steps is None:
        steps = max(512, int(np.ceil(abs(tau) * 512 / 3.0)))
    state = np.array([z0.x, z0.y, z0.theta], dtype=float)
    if not chart.domain.contains(state[0], state[1]):
        raise EscapeError(f"start point {state[:2]} outside domain",
                          exit_point=(z0.x, z0.y))
    h = tau / steps
    for _ in range(steps):
        k = []
        for stage in range(6):
            s = state.copy()
            for j, a in enumerate(_DP_A[stage]):
                s += h * a * k[j]
            k.append(_flow_rhs(chart, s))
        state = state + h * sum(b * kk for b, kk in zip(_DP_B5, k))
        if not chart.domain.contains(state[0], state[1]):
            raise EscapeError(f"geodesic left the domain at {state[:2]}",
                              exit_point=tuple(state[:2]))
    return PhasePoint(float(state[0]), float(state[1]), float(state[2]))


# ---------------------------------------------------------------------------
# Orbit polylines
# ---------------------------------------------------------------------------

@dataclass
class OrbitPolyline:
    """Discretized closed geodesic: N uniformly spaced (in arclength) points,
    with twisted-periodic closure through the deck element."""

    pts: np.ndarray                      # (N, 2)
    L: float
    deck: Optional[MobiusElement] = None
    t: float = 0.0
    thetas: Optional[np.ndarray] = None
    residuals: Dict[str, float] = dc_field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.pts)

    def s_grid(self) -> np.ndarray:
        return np.arange(self.n) * (self.L / self.n)

    def _ghosted(self, pad: int = 28):
        # generous padding: spline end effects decay ~0.42 per point into the
        # interior, so the seam needs the data boundary pushed well away
        pts = self.pts
        if self.deck is not None:
            z = pts[:, 0] + 1j * pts[:, 1]
            after = self.deck.apply(z[:pad])
            before = self.deck.inverse().apply(z[-pad:])
        else:
            after = pts[:pad, 0] + 1j * pts[:pad, 1]
            before = pts[-pad:, 0] + 1j * pts[-pad:, 1]
        xs = np.concatenate([before.real, pts[:, 0], after.real])
        ys = np.concatenate([before.imag, pts[:, 1], after.imag])
        h = self.L / self.n
        s = (np.arange(len(xs)) - pad) * h
        return s, xs, ys

    def spline(self, k: int = 5):
        s, xs, ys = self._ghosted()
        return (make_interp_spline(s, xs, k=k), make_interp_spline(s, ys, k=k))

    def positions(self, s):
        sx, sy = self.spline()
        s = np.mod(s, self.L)  # wrap into the fundamental period
        return sx(s), sy(s)

    def velocities(self, s=None):
        sx, sy = self.spline()
        if s is None:
            s = self.s_grid()
        return sx.derivative()(s), sy.derivative()(s)

    def accelerations(self, s=None):
        sx, sy = self.spline()
        if s is None:
            s = self.s_grid()
        return sx.derivative(2)(s), sy.derivative(2)(s)

    def phase_points(self) -> List[PhasePoint]:
        th = self.thetas
        if th is None:
            vx, vy = self.velocities()
            th = np.arctan2(vy, vx)
        return [PhasePoint(float(x), float(y), float(a))
                for (x, y), a in zip(self.pts, th)]

    def reversed(self) -> "OrbitPolyline":
        """Orientation-reversed orbit (deck element inverted)."""
        th = None
        if self.thetas is not None:
            th = np.mod(self.thetas[::-1] + np.pi, 2 * np.pi)
        return OrbitPolyline(self.pts[::-1].copy(), self.L,
                             deck=None if self.deck is None else self.deck.inverse(),
                             t=self.t, thetas=th, residuals=dict(self.residuals))

    def repeat(self, m: int) -> "OrbitPolyline":
        """m-fold concatenation: the iterate orbit with deck^m closure."""
        if m == 1:
            return self
        if self.deck is None:
            raise ValueError("repeat requires a deck element")
        z = self.pts[:, 0] + 1j * self.pts[:, 1]
        blocks, ths = [z], [self.thetas if self.thetas is not None else None]
        cur = z
        curth = ths[0]
        g = self.deck
        for _ in range(m - 1):
            rot = np.angle(g.deriv(cur))
            cur = g.apply(cur)
            blocks.append(cur)
            ths.append(None if curth is None else np.mod(curth + rot, 2 * np.pi))
            curth = ths[-1]
        zz = np.concatenate(blocks)
        th = None if ths[0] is None else np.concatenate(ths)
        return OrbitPolyline(np.column_stack([zz.real, zz.imag]), m * self.L,
                             deck=self.deck.power(m), t=self.t, thetas=th,
                             residuals=dict(self.residuals))


def axis_orbit(elem: MobiusElement, n: int = 1536) -> OrbitPolyline:
    """Exact closed-geodesic polyline at t = 0 from the axis parametrization."""
    from .fuchsian import axis_seed
    pts = axis_seed(elem, n)
    L = length_of(elem)
    orb = OrbitPolyline(pts[:, :2].copy(), L, deck=elem, t=0.0,
                        thetas=pts[:, 2].copy())
    orb.residuals = {"speed": 0.0, "geodesic": 0.0, "closure": 0.0, "source": 0.0}
    return orb


# ---------------------------------------------------------------------------
# Discrete-energy closed-orbit solver
# ---------------------------------------------------------------------------

def _deck_jacobian(deck: MobiusElement, z: complex) -> np.ndarray:
    gp = deck.deriv(np.array([z]))[0]
    return np.array([[gp.real, -gp.imag], [gp.imag, gp.real]])


def _energy_gradient(family, t, pts, deck, pin=None):
    """Discrete energy E = sum_i d_i^T G(m_i) d_i and its gradient.

    ``pin`` = (z_ref, tangent, weight) adds a phase anchor
    weight * (tangent . (z_0 - z_ref))^2 that removes the sliding zero mode
    of the closed orbit (the choice of starting point); the anchored direction
    is flat for the orbit energy, so the geometry is unaffected."""
    n = len(pts)
    z0 = complex(pts[0, 0], pts[0, 1])
    if deck is not None:
        w = deck.apply(np.array([z0]))[0]
        last = np.array([w.real, w.imag])
    else:
        last = pts[0]
    ext = np.vstack([pts, last])
    d = np.diff(ext, axis=0)                       # (n, 2)
    mid = 0.5 * (ext[:-1] + ext[1:])
    jets = family_jets(family, t, mid[:, 0], mid[:, 1], order=1)
    E, F, G = jets["E"], jets["F"], jets["G"]
    Gm = np.empty((n, 2, 2))
    Gm[:, 0, 0] = E["f"]; Gm[:, 0, 1] = Gm[:, 1, 0] = F["f"]; Gm[:, 1, 1] = G["f"]
    Gx = np.empty((n, 2, 2))
    Gx[:, 0, 0] = E["fx"]; Gx[:, 0, 1] = Gx[:, 1, 0] = F["fx"]; Gx[:, 1, 1] = G["fx"]
    Gy = np.empty((n, 2, 2))
    Gy[:, 0, 0] = E["fy"]; Gy[:, 0, 1] = Gy[:, 1, 0] = F["fy"]; Gy[:, 1, 1] = G["fy"]

    Gd = np.einsum("nij,nj->ni", Gm, d)            # G(m_i) d_i
    q = np.einsum("ni,ni->n", d, Gd)
    energy = float(q.sum())
    Dx = np.einsum("ni,nij,nj->n", d, Gx, d)       # d^T dG/dx d
    Dy = np.einsum("ni,nij,nj->n", d, Gy, d)
    D = np.column_stack([Dx, Dy])

    grad = np.zeros((n, 2))
    # left endpoint of segment i is z_i: -2 G d + D/2
    grad += -2.0 * Gd + 0.5 * D
    # right endpoint of segment i is z_{i+1} (i < n-1): +2 G d + D/2
    grad[1:] += 2.0 * Gd[:-1] + 0.5 * D[:-1]
    # seam: right endpoint of segment n-1 is deck(z_0)
    seam = 2.0 * Gd[-1] + 0.5 * D[-1]
    if deck is not None:
        J = _deck_jacobian(deck, z0)
        grad[0] += J.T @ seam
    else:
        grad[0] += seam
    if pin is not None:
        refs, tangs, wgt = pin
        # distributed phase anchor: penalize the mean tangential displacement,
        # so the anchoring force spreads as O(1/n) per point and cannot kink
        # the polyline anywhere
        sbar = float(np.mean(np.einsum("ni,ni->n", tangs, pts - refs)))
        energy += wgt * sbar * sbar
        grad += (2.0 * wgt * sbar / n) * tangs
    return energy, grad.reshape(-1), float(np.abs(q).max())


def _point_scales(family, t, pts):
    """Local coordinate scale 1/sqrt(conformal factor): equalizes the energy
    Hessian across orbits whose lifts span a wide euclidean range."""
    jets = family_jets(family, t, pts[:, 0], pts[:, 1], order=0)
    det = np.maximum(jets["E"]["f"] * jets["G"]["f"] - jets["F"]["f"] ** 2, 1e-30)
    return det ** -0.25


def _hessian_colored(family, t, pts, deck, pin=None, eps=1e-7, dscale=None):
    """Sparse Hessian by central differences of the gradient along a 3-coloring
    of the cyclic chain (requires n divisible by 3); perturbations follow the
    local coordinate scale."""
    n = len(pts)
    if dscale is None:
        dscale = np.ones(n)
    rows, cols, vals = [], [], []
    for color in range(3):
        mask = (np.arange(n) % 3) == color
        for comp in range(2):
            pert = np.zeros_like(pts)
            pert[mask, comp] = eps * dscale[mask]
            _, gp, _ = _energy_gradient(family, t, pts + pert, deck, pin)
            _, gm, _ = _energy_gradient(family, t, pts - pert, deck, pin)
            col_block = (gp - gm) / (2 * eps)
            colg = col_block.reshape(n, 2)
            for i in np.flatnonzero(mask):
                j = int(i)
                col_index = 2 * j + comp
                sc = 1.0 / dscale[j]
                for nb in (j - 1, j, (j + 1) % n):
                    nbm = nb % n
                    for rcomp in range(2):
                        rows.append(2 * nbm + rcomp)
                        cols.append(col_index)
                        vals.append(colg[nbm, rcomp] * sc)
    H = sp.coo_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n)).tocsc()
    return H


def _resample_uniform(orbit: OrbitPolyline, family, t, n_new):
    """Resample an orbit to n_new points uniform in g_t-arclength."""
    sx, sy = orbit.spline()
    fine = 8 * orbit.n
    sf = np.linspace(0.0, orbit.L, fine + 1)
    xf, yf = sx(sf), sy(sf)
    vxf, vyf = sx.derivative()(sf), sy.derivative()(sf)
    Gf = _metric_matrix_values(family, t, xf, yf)
    speed = np.sqrt(np.einsum("ni,nij,nj->n", np.column_stack([vxf, vyf]), Gf,
                              np.column_stack([vxf, vyf])))
    speed_spl = make_interp_spline(sf, speed, k=5)
    arc = speed_spl.antiderivative()
    total = float(arc(orbit.L))
    targets = np.arange(n_new) * (total / n_new)
    # invert arc(s) = target by interpolation + Newton polish
    s_guess = np.interp(targets, arc(sf), sf)
    for _ in range(3):
        s_guess = s_guess - (arc(s_guess) - targets) / speed_spl(s_guess)
    pts = np.column_stack([sx(s_guess), sy(s_guess)])
    return OrbitPolyline(pts, total, deck=orbit.deck, t=t), total


def _metric_matrix_values(family, t, x, y):
    jets = family_jets(family, t, x, y, order=0)
    G = np.empty(np.shape(np.asarray(x)) + (2, 2))
    G[..., 0, 0] = jets["E"]["f"]
    G[..., 0, 1] = G[..., 1, 0] = jets["F"]["f"]
    G[..., 1, 1] = jets["G"]["f"]
    return G


def _geodesic_defect_shooting(orbit: OrbitPolyline, family, t,
                              windows: int = 128, substeps: int = 12) -> float:
    """Geodesic-equation defect measured in integrated form: from a coarse
    subsample of nodes, integrate the exact geodesic ODE over one window and
    compare with the polyline; the defect is 2 |mismatch| / window^2.

    Pointwise second-derivative estimates amplify converged-solution rounding
    noise by 1/h^2, so the window length is chosen well above the grid scale
    (yet far below the scale on which the perturbation varies)."""
    n = orbit.n
    K = max(4, n // windows)
    idx = np.arange(0, n - K + 1, K)
    h = orbit.L / n
    delta = K * h
    s0 = idx * h
    pos = orbit.pts[idx]
    vx, vy = orbit.velocities(s0)
    state = np.column_stack([pos[:, 0], pos[:, 1], vx, vy])

    def rhs(st):
        x, y, ux, uy = st.T
        Gam = _christoffels(family_jets(family, t, x, y, order=1))
        axc = -(Gam[0, 0, 0] * ux * ux + 2 * Gam[0, 0, 1] * ux * uy
                + Gam[0, 1, 1] * uy * uy)
        ayc = -(Gam[1, 0, 0] * ux * ux + 2 * Gam[1, 0, 1] * ux * uy
                + Gam[1, 1, 1] * uy * uy)
        return np.column_stack([ux, uy, axc, ayc])

    hs = delta / substeps
    for _ in range(substeps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * hs * k1)
        k3 = rhs(state + 0.5 * hs * k2)
        k4 = rhs(state + hs * k3)
        state = state + (hs / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    send = s0 + delta                      # stays within the ghosted range
    sx, sy = orbit.spline()
    xe, ye = sx(send), sy(send)
    vxe, vye = sx.derivative()(send), sy.derivative()(send)
    epos = np.hypot(state[:, 0] - xe, state[:, 1] - ye)
    evel = np.hypot(state[:, 2] - vxe, state[:, 3] - vye)
    return float(max(2.0 * epos.max() / delta ** 2, evel.max() / delta))


def _measure_residuals(orbit: OrbitPolyline, family, t):
    s = orbit.s_grid()
    vx, vy = orbit.velocities(s)
    x, y = orbit.pts[:, 0], orbit.pts[:, 1]
    jets = family_jets(family, t, x, y, order=0)
    Gm = np.empty((orbit.n, 2, 2))
    Gm[:, 0, 0] = jets["E"]["f"]
    Gm[:, 0, 1] = Gm[:, 1, 0] = jets["F"]["f"]
    Gm[:, 1, 1] = jets["G"]["f"]
    v = np.column_stack([vx, vy])
    speed2 = np.einsum("ni,nij,nj->n", v, Gm, v)
    speed_res = float(np.abs(speed2 - 1.0).max())
    geo_res = _geodesic_defect_shooting(orbit, family, t)
    # closure: deck of the first point vs spline continuation at s = L
    sx, sy = orbit.spline()
    cont = complex(float(sx(orbit.L)), float(sy(orbit.L)))
    if orbit.deck is not None:
        z0 = complex(orbit.pts[0, 0], orbit.pts[0, 1])
        closure = abs(orbit.deck.apply(np.array([z0]))[0] - cont)
    else:
        closure = abs(complex(orbit.pts[0, 0], orbit.pts[0, 1]) - cont)
    return {"speed": speed_res, "geodesic": geo_res, "closure": float(closure)}


def _sm_solve(fac, v, sigma, b):
    """Solve (A + sigma v v^T) x = b given an splu factor of A."""
    x0 = fac.solve(b)
    x1 = fac.solve(v)
    corr = sigma * float(v @ x0) / (1.0 + sigma * float(v @ x1))
    return x0 - corr * x1


def _newton_phase(family, t, pts, deck, pin, sm, tol_rel, max_iters):
    """Damped Newton on the (optionally anchored) energy gradient.

    The banded Hessian is assembled from the pure orbit energy; the anchor's
    (or regularizer's) rank-one term ``sm = (vector, sigma)`` enters the solve
    exactly through the Sherman-Morrison identity, preserving the band."""
    pts = pts.copy()
    _, grad, qmax = _energy_gradient(family, t, pts, deck, pin)
    scale = max(qmax, 1e-30) * len(pts)
    gnorm = float(np.abs(grad).max())
    fac = None
    fresh = False
    dvec = None
    vs = None
    for it in range(max_iters):
        if gnorm < tol_rel * scale:
            return pts, gnorm
        if fac is None:
            ds = _point_scales(family, t, pts)
            dvec = np.repeat(ds, 2)
            H = _hessian_colored(family, t, pts, deck, None, dscale=ds)
            D = sp.diags(dvec)
            try:
                fac = spla.splu((D @ H @ D).tocsc())
            except RuntimeError as exc:
                raise ConvergenceError(f"sparse solve failed: {exc}", residual=gnorm)
            vs = dvec * sm[0] if sm is not None else None
            fresh = True
        if vs is not None:
            delta = dvec * _sm_solve(fac, vs, sm[1], -(dvec * grad))
        else:
            delta = dvec * fac.solve(-(dvec * grad))
        alpha, gtrial, trial = 1.0, None, None
        for _ in range(40):
            trial = pts + alpha * delta.reshape(-1, 2)
            _, gtrial, _ = _energy_gradient(family, t, trial, deck, pin)
            if np.abs(gtrial).max() <= (1.0 - 0.25 * alpha) * gnorm:
                break
            alpha *= 0.5
            if alpha < 1e-7:
                break
        progressed = np.abs(gtrial).max() < gnorm
        if not progressed:
            if not fresh:
                fac = None      # frozen factorization exhausted; reassemble
                continue
            return pts, gnorm   # stagnated on a fresh Hessian; caller decides
        # keep the factorization while it contracts well: each reuse costs one
        # gradient only and digs below the line-search noise floor
        if np.abs(gtrial).max() > 0.2 * gnorm:
            fac = None
        fresh = False
        pts = trial
        gnorm = float(np.abs(gtrial).max())
    return pts, gnorm


def _newton_solve(family, t, pts, deck, tol=1e-12):
    """Two stages: converge with a distributed phase anchor (penalizing the
    mean tangential displacement, whose reaction spreads O(1/n) per point),
    then polish the anchor-free conditions with the sliding mode regularized
    by the same global rank-one term."""
    n = len(pts)
    d = np.diff(np.vstack([pts, pts[:1]]), axis=0)
    tangs = d / np.linalg.norm(d, axis=1, keepdims=True)
    refs = pts.copy()
    w_pin = 1.0
    pin = (refs, tangs, w_pin)
    Tvec = tangs.reshape(-1)
    _, _, qmax = _energy_gradient(family, t, pts, deck)
    scale = max(qmax, 1e-30) * n

    pts1, g1 = _newton_phase(family, t, pts, deck, pin,
                             (Tvec, 2.0 * w_pin / n ** 2), 1e-11, 40)
    # anchor-free polish; the rank-one term now only regularizes the step
    pts2, g2 = _newton_phase(family, t, pts1, deck, None,
                             (Tvec, 1.0 / n ** 2), tol, 25)
    if g2 > 1e-4 * scale:
        raise ConvergenceError(
            f"Newton did not converge (anchored {g1:.3e}, free {g2:.3e}, "
            f"scale {scale:.3e})", residual=g2)
    return pts2, g2


def _solver_n(L: float, base: int = 1536) -> int:
    mult = max(1, int(np.ceil(L / 3.058)))   # systole-sized chunks
    n = base * mult
    return n + (-n) % 3


def _solve_reparam(family, t, start_pts, L_scale, deck, n):
    """Newton solve from start_pts followed by uniform-speed reparametrization."""
    pts, gnorm = _newton_solve(family, t, start_pts, deck)
    cur = OrbitPolyline(pts, L_scale, deck=deck, t=t)
    cur, total = _resample_uniform(cur, family, t, n)
    cur.deck = deck
    cur.t = t
    cur.L = total
    return cur, gnorm


def _phase_align_shift(coarse: OrbitPolyline, fine: OrbitPolyline) -> float:
    """Arclength shift sigma such that coarse(u - sigma) best matches fine(u)."""
    sx, sy = coarse.spline()
    u = fine.s_grid() * (coarse.L / fine.L)
    zf = fine.pts
    sigma = 0.0
    for _ in range(8):
        su = np.mod(u - sigma, coarse.L)
        cx, cy = sx(su), sy(su)
        vx, vy = sx.derivative()(su), sy.derivative()(su)
        dxv = cx - zf[:, 0]
        dyv = cy - zf[:, 1]
        num = float(np.sum(dxv * vx + dyv * vy))
        den = float(np.sum(vx * vx + vy * vy))
        step = num / den
        sigma += step
        if abs(step) < 1e-15:
            break
    return sigma


def _richardson_orbit(coarse: OrbitPolyline, fine: OrbitPolyline, family, t):
    """Pointwise Richardson extrapolation (4 fine - coarse)/3 after phase
    alignment; cancels the O(h^2) bias of the discrete minimizer.  Returns
    None when the two resolutions cannot be aligned to extrapolation accuracy
    (the caller falls back to the fine solution)."""
    sigma = _phase_align_shift(coarse, fine)
    sx, sy = coarse.spline()
    u = np.mod(fine.s_grid() * (coarse.L / fine.L) - sigma, coarse.L)
    cx, cy = sx(u), sy(u)
    move = np.hypot(fine.pts[:, 0] - cx, fine.pts[:, 1] - cy)
    if not np.all(np.isfinite(move)) or move.max() > 0.5 * coarse.L / coarse.n:
        return None
    pts = np.column_stack([(4.0 * fine.pts[:, 0] - cx) / 3.0,
                           (4.0 * fine.pts[:, 1] - cy) / 3.0])
    orb = OrbitPolyline(pts, fine.L, deck=fine.deck, t=t)
    try:
        orb, total = _resample_uniform(orb, family, t, fine.n)
    except ValueError:
        return None
    orb.deck = fine.deck
    orb.t = t
    orb.L = total
    return orb


def find_closed_geodesic(family: MetricFamily, t: float, seed: OrbitPolyline,
                         n: Optional[int] = None, geo_tol: float = 1e-6,
                         speed_tol: float = 1e-8, closure_tol: float = 1e-8,
                         max_n: int = 24576, dt_continuation: float = 1e-2,
                         check_curvature: bool = True) -> OrbitPolyline:
    """Closed g_t-geodesic in the twisted homotopy class of the seed.

    Continuation in t proceeds from the seed parameter in steps of at most
    dt_continuation.  If the converged polyline's geodesic defect misses the
    tolerance (the discrete minimizer carries an O(h^2) bias whose constant
    grows with the perturbation's derivatives), the solve is repeated at twice
    the resolution and the two polylines are Richardson-extrapolated."""
    if seed.deck is None:
        raise ValueError("seed must carry a deck element")
    n = n or _solver_n(seed.L)
    n += (-n) % 3
    deck = seed.deck

    # localize equivariant data around the seed for speed (exactness margin
    # is the orbit-tube radius plus the localization pad)
    work_family = _localized_family(family, seed)

    steps = max(1, int(np.ceil(abs(t - seed.t) / dt_continuation)))
    ts = seed.t + (np.arange(1, steps + 1) / steps) * (t - seed.t)
    if abs(t - seed.t) < 1e-15:
        ts = np.array([t])

    orbit, _ = _resample_uniform(seed, work_family, seed.t, n)
    orbit.deck = deck
    pts = orbit.pts
    for tk in ts:
        pts, gnorm = _newton_solve(work_family, tk, pts, deck)

    cur, gnorm = _solve_reparam(work_family, t, pts, orbit.L, deck, n)
    res = _measure_residuals(cur, work_family, t)
    best = cur
    while True:
        if res["geodesic"] < geo_tol and res["speed"] < speed_tol \
                and res["closure"] < closure_tol:
            break
        if 2 * cur.n > max_n:
            break
        n2 = 2 * cur.n
        n2 += (-n2) % 3
        start, _ = _resample_uniform(cur, work_family, t, n2)
        fine, gnorm = _solve_reparam(work_family, t, start.pts, start.L, deck, n2)
        extrap = _richardson_orbit(cur, fine, work_family, t)
        res_f = _measure_residuals(fine, work_family, t)
        res_e = _measure_residuals(extrap, work_family, t) if extrap is not None \
            else None
        if res_e is not None and res_e["geodesic"] <= res_f["geodesic"] \
                and res_e["speed"] <= max(res_f["speed"], 1e-9):
            best, res = extrap, res_e
        else:
            best, res = fine, res_f
        cur = fine
        if res["geodesic"] < geo_tol and res["speed"] < speed_tol:
            cur = best
            break
    res["newton_grad"] = float(gnorm)
    best.residuals = res
    cur = best

    if res["geodesic"] > geo_tol or res["speed"] > speed_tol:
        raise ConvergenceError(
            f"orbit residuals exceed tolerance at n={cur.n}: {res}",
            residual=res)
    vx, vy = cur.velocities()
    cur.thetas = np.mod(np.arctan2(vy, vx), 2 * np.pi)
    if check_curvature:
        jets = family_jets(family, t, cur.pts[::8, 0], cur.pts[::8, 1], order=2)
        K = brioschi_from_jets(jets)
        if not np.all(K < 0):
            raise ModelError(f"curvature sign violation along orbit at t={t}")
    return cur


def _localized_family(family: MetricFamily, seed: OrbitPolyline) -> MetricFamily:
    """Restrict equivariant perturbation data to a disk covering the orbit,
    including the ghost continuation through the deck element: the seam
    segment evaluates the metric at deck images of the first points, which
    can sit a full period away from the base point."""
    s, xs, ys = seed._ghosted()
    z = (np.asarray(xs) + 1j * np.asarray(ys))[::8]
    law = family.law
    if isinstance(law, LinearTensor):
        ext = getattr(law.h, "_equivariant", None)
        if ext is not None:
            from .cover import as_tensor_field
            return MetricFamily(family.base, LinearTensor(as_tensor_field(
                ext.localize_to_points(z, 0.35))))
    if isinstance(law, ConformalExp):
        ext = getattr(law.u, "ext", None)
        if ext is not None and getattr(law.u, "slot", "f") == "f":
            from .cover import JetField
            loc = ext.localize_to_points(z, 0.35)
            return MetricFamily(family.base, ConformalExp(JetField(loc, "f")))
    return family


# ---------------------------------------------------------------------------
# Jacobi monodromy
# ---------------------------------------------------------------------------

def jacobi_monodromy(metric: MetricLike, orbit: OrbitPolyline,
                     steps_per_period: Optional[int] = None) -> MonodromyMatrix:
    """Fundamental solution of J'' + K(s) J = 0 over one period, in the
    (J, J') normal frame along the orbit."""
    if orbit.residuals and orbit.residuals.get("geodesic", 0.0) > 1e-4:
        raise ValueError("orbit residuals exceed tolerance for monodromy")
    M = steps_per_period or max(2048, int(1024 * np.ceil(orbit.L / 3.0)))
    s_half = np.arange(2 * M + 1) * (orbit.L / (2 * M))
    sx, sy = orbit.spline()
    sw = np.mod(s_half, orbit.L)
    xs, ys = sx(sw), sy(sw)
    K = _curvature_values(metric, xs, ys)
    h = np.longdouble(orbit.L / M)
    P = np.eye(2, dtype=np.longdouble)
    for j in range(M):
        k0, k1, k2 = K[2 * j], K[2 * j + 1], K[2 * j + 2]
        A0 = np.array([[0.0, 1.0], [-k0, 0.0]], dtype=np.longdouble)
        A1 = np.array([[0.0, 1.0], [-k1, 0.0]], dtype=np.longdouble)
        A2 = np.array([[0.0, 1.0], [-k2, 0.0]], dtype=np.longdouble)
        q1 = A0 @ P
        q2 = A1 @ (P + 0.5 * h * q1)
        q3 = A1 @ (P + 0.5 * h * q2)
        q4 = A2 @ (P + h * q3)
        P = P + (h / 6.0) * (q1 + 2 * q2 + 2 * q3 + q4)
    return MonodromyMatrix(P, orbit.L)


def _curvature_values(metric: MetricLike, x, y):
    if isinstance(metric, ConformalChart):
        return np.asarray(gauss_curvature(metric, x, y), dtype=float)
    fam, t = metric
    if isinstance(fam.law, ConformalExp) or t == 0.0:
        return np.asarray(fam.curvature(t, x, y), dtype=float)
    jets = family_jets(fam, t, x, y, order=2)
    return np.asarray(brioschi_from_jets(jets), dtype=float)


# ---------------------------------------------------------------------------
# Orbit integrals
# ---------------------------------------------------------------------------

def orbit_length(metric: MetricLike, orbit: OrbitPolyline) -> float:
    """Quadrature of the g-speed over the stored parametrization (the speed is
    a smooth periodic function of the parameter, so the periodic trapezoid
    rule converges spectrally)."""
    s = orbit.s_grid()
    vx, vy = orbit.velocities(s)
    G = _metric_like_matrix(metric, orbit.pts[:, 0], orbit.pts[:, 1])
    v = np.column_stack([vx, vy])
    speed = np.sqrt(np.einsum("ni,nij,nj->n", v, G, v))
    return float(speed.mean() * orbit.L)


def _metric_like_matrix(metric: MetricLike, x, y):
    if isinstance(metric, ConformalChart):
        f = metric.conformal_factor(x, y)
        G = np.zeros(np.shape(f) + (2, 2))
        G[..., 0, 0] = G[..., 1, 1] = f
        return G
    fam, t = metric
    return _metric_matrix_values(fam, t, x, y)


def line_integral_hTT(metric: MetricLike, h, orbit: OrbitPolyline) -> float:
    """integral over the orbit of h(T, T) ds, T the unit tangent."""
    vx, vy = orbit.velocities()
    x, y = orbit.pts[:, 0], orbit.pts[:, 1]
    ext = getattr(h, "_equivariant", None)
    if ext is not None:
        vals = ext.values(x, y)
        a, b, c = vals["h11"], vals["h12"], vals["h22"]
        integ = a * vx * vx + 2 * b * vx * vy + c * vy * vy
    else:
        integ = h.contract(vx, vy, x, y)
    return float(integ.mean() * orbit.L)


def integrate_scalar_along(orbit: OrbitPolyline, fn) -> float:
    """integral of a scalar point function over the orbit (arclength measure)."""
    vals = np.asarray(fn(orbit.pts[:, 0], orbit.pts[:, 1]), dtype=float)
    return float(vals.mean() * orbit.L)


def fd_length_derivative(family: MetricFamily, seed: OrbitPolyline,
                         dt: float = 1e-3, richardson: int = 1,
                         **solver_kw) -> Tuple[float, float]:
    """Central finite difference of t -> length(g_t, orbit_t), with an optional
    Richardson level; returns (value, error_estimate)."""

    def length_at(tv: float) -> float:
        orb = find_closed_geodesic(family, tv, seed, **solver_kw)
        return orbit_length((family, tv), orb)

    d1 = (length_at(dt) - length_at(-dt)) / (2 * dt)
    if richardson < 1:
        return d1, abs(d1) * 1e-6
    d2 = (length_at(2 * dt) - length_at(-2 * dt)) / (4 * dt)
    val = (4.0 * d1 - d2) / 3.0
    return val, abs(d1 - d2) / 3.0


# ---------------------------------------------------------------------------
# Orbit serialization
# ---------------------------------------------------------------------------

def orbit_to_csv(orbit: OrbitPolyline, deck_word: str = "") -> Tuple[str, str]:
    """(csv_text, json_sidecar) with columns s, x, y, theta."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["s", "x", "y", "theta"])
    th = orbit.thetas
    if th is None:
        vx, vy = orbit.velocities()
        th = np.mod(np.arctan2(vy, vx), 2 * np.pi)
    for s, (x, y), a in zip(orbit.s_grid(), orbit.pts, th):
        w.writerow([f"{s:.17g}", f"{x:.17g}", f"{y:.17g}", f"{a:.17g}"])
    sidecar = json.dumps({
        "L": float(f"{orbit.L:.17g}"), "t": orbit.t,
        "residuals": {k: float(f"{v:.17g}") for k, v in orbit.residuals.items()},
        "deck_word": deck_word,
    }, sort_keys=True)
    return buf.getvalue(), sidecar


def orbit_from_csv(csv_text: str, sidecar: str,
                   deck: Optional[MobiusElement] = None) -> OrbitPolyline:
    rows = list(csv.reader(io.StringIO(csv_text)))[1:]
    arr = np.array([[float(v) for v in row] for row in rows])
    meta = json.loads(sidecar)
    return OrbitPolyline(arr[:, 1:3].copy(), meta["L"], deck=deck, t=meta["t"],
                         thetas=arr[:, 3].copy(), residuals=meta["residuals"])
