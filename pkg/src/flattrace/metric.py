"""Conformal metric charts, tensor perturbations, and metric families.

A chart carries a conformal metric g = e^{2 phi} (dx^2 + dy^2) on a planar
domain.  The oriented orthonormal frame is e1 = e^{-phi} d/dx, e2 = e^{-phi}
d/dy, and fiber angles are measured from e1 toward e2.  Metric families are
either linear-in-t tensor deformations g_t = g + t h or conformal exponential
families g_t = e^{2 t u} g.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .fields import Field, as_field

__all__ = [
    "DomainError", "Domain", "HalfPlaneDomain", "DiskDomain", "RectDomain",
    "ConformalChart", "SymmetricTensorField", "LinearTensor", "ConformalExp",
    "MetricFamily", "half_plane_chart", "poincare_disk_chart",
    "metric_at", "gauss_curvature", "family_dot_metric", "dot_p",
    "dot_p_mode_coeffs", "brioschi_curvature",
]


class DomainError(ValueError):
    """A point (or a derivative stencil around it) leaves the chart domain."""


class Domain:
    """Open planar domain. ``contains`` broadcasts; ``sample_box`` gives a
    rectangle well inside the domain for grid-based validation."""

    def contains(self, x, y, margin=0.0):
        raise NotImplementedError

    sample_box = (-1.0, 1.0, -1.0, 1.0)

    def require(self, x, y, margin=0.0):
        ok = self.contains(x, y, margin)
        if not np.all(ok):
            bad = np.argwhere(~np.atleast_1d(ok))
            xb = np.atleast_1d(x).flat[bad.flat[0]] if np.ndim(x) else x
            yb = np.atleast_1d(y).flat[bad.flat[0]] if np.ndim(y) else y
            raise DomainError(f"point ({xb}, {yb}) outside domain (margin {margin})")


@dataclass
class HalfPlaneDomain(Domain):
    ymin: float = 0.0
    sample_box = (-2.0, 2.0, 0.3, 3.0)

    def contains(self, x, y, margin=0.0):
        return np.asarray(y) > self.ymin + margin


@dataclass
class DiskDomain(Domain):
    radius: float = 1.0
    sample_box = (-0.65, 0.65, -0.65, 0.65)

    def contains(self, x, y, margin=0.0):
        return np.asarray(x) ** 2 + np.asarray(y) ** 2 < (self.radius - margin) ** 2


@dataclass
class RectDomain(Domain):
    x0: float = -1.0
    x1: float = 1.0
    y0: float = -1.0
    y1: float = 1.0

    def __post_init__(self):
        dx, dy = self.x1 - self.x0, self.y1 - self.y0
        self.sample_box = (self.x0 + 0.1 * dx, self.x1 - 0.1 * dx,
                           self.y0 + 0.1 * dy, self.y1 - 0.1 * dy)

    def contains(self, x, y, margin=0.0):
        x, y = np.asarray(x), np.asarray(y)
        return ((x > self.x0 + margin) & (x < self.x1 - margin) &
                (y > self.y0 + margin) & (y < self.y1 - margin))


@dataclass
class ConformalChart:
    """Conformal chart g = e^{2 phi}(dx^2 + dy^2)."""

    phi: Field
    domain: Domain = field(default_factory=HalfPlaneDomain)
    negatively_curved: bool = False

    def __post_init__(self):
        self.phi = as_field(self.phi)
        self._dphi = (self.phi.d("x"), self.phi.d("y"))

    def conformal_factor(self, x, y):
        """e^{2 phi}"""
        return np.exp(2.0 * self.phi.ev(x, y))

    def phi_grad(self, x, y):
        return self._dphi[0].ev(x, y), self._dphi[1].ev(x, y)

    def sample_grid(self, n=24):
        x0, x1, y0, y1 = self.domain.sample_box
        gx, gy = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n),
                             indexing="ij")
        return gx, gy

    def validate(self, n=24):
        """Check positivity/finiteness of the metric on a sample grid, and
        negative curvature when the chart is flagged negatively curved."""
        gx, gy = self.sample_grid(n)
        f = self.conformal_factor(gx, gy)
        if not np.all(np.isfinite(f)) or not np.all(f > 0):
            raise ValueError("conformal factor not positive and finite on sample grid")
        if self.negatively_curved:
            K = gauss_curvature(self, gx, gy)
            if not np.all(K < 0):
                raise ValueError("chart flagged negatively curved but K >= 0 somewhere")
        return True


def half_plane_chart() -> ConformalChart:
    """Hyperbolic upper half-plane, K = -1: phi = -log(y)."""
    return ConformalChart("0 - log(y)", HalfPlaneDomain(), negatively_curved=True)


def poincare_disk_chart() -> ConformalChart:
    """Poincare disk, K = -1: phi = log(2/(1 - x^2 - y^2))."""
    return ConformalChart("log(2/(1 - x^2 - y^2))", DiskDomain(), negatively_curved=True)


def metric_at(chart: ConformalChart, p) -> np.ndarray:
    """Metric matrix e^{2 phi} * I at a chart point (x, y)."""
    x, y = p
    chart.domain.require(x, y)
    f = chart.conformal_factor(x, y)
    return np.array([[f, 0.0], [0.0, f]])


def gauss_curvature(chart: ConformalChart, x, y):
    """K = -e^{-2 phi} (phi_xx + phi_yy)."""
    margin = getattr(chart.phi, "stencil", 0.0) * 2.5
    chart.domain.require(x, y, margin=margin)
    lap = chart._dphi[0].d("x").ev(x, y) + chart._dphi[1].d("y").ev(x, y)
    return -np.exp(-2.0 * chart.phi.ev(x, y)) * lap


@dataclass
class SymmetricTensorField:
    """Symmetric 2-tensor in coordinate components h_ij dx^i dx^j."""

    h11: Field
    h12: Field
    h22: Field

    def __post_init__(self):
        self.h11 = as_field(self.h11)
        self.h12 = as_field(self.h12)
        self.h22 = as_field(self.h22)

    def components(self, x, y):
        return (np.asarray(self.h11.ev(x, y), dtype=float),
                np.asarray(self.h12.ev(x, y), dtype=float),
                np.asarray(self.h22.ev(x, y), dtype=float))

    def matrix(self, x, y):
        a, b, c = self.components(x, y)
        out = np.empty(np.shape(a) + (2, 2))
        out[..., 0, 0] = a
        out[..., 0, 1] = out[..., 1, 0] = b
        out[..., 1, 1] = c
        return out

    def frame_components(self, chart: ConformalChart, x, y):
        """Components in the orthonormal frame: e^{-2 phi} * coordinate ones."""
        w = np.exp(-2.0 * chart.phi.ev(x, y))
        a, b, c = self.components(x, y)
        return w * a, w * b, w * c

    def contract(self, vx, vy, x, y):
        """h(v, v) for a coordinate vector (vx, vy)."""
        a, b, c = self.components(x, y)
        return a * vx * vx + 2.0 * b * vx * vy + c * vy * vy


@dataclass
class LinearTensor:
    """Deformation law g_t = g + t h."""

    h: SymmetricTensorField


@dataclass
class ConformalExp:
    """Deformation law g_t = e^{2 t u} g."""

    u: Field

    def __post_init__(self):
        self.u = as_field(self.u)


@dataclass
class MetricFamily:
    base: ConformalChart
    law: Union[LinearTensor, ConformalExp]

    def metric_matrix(self, t, x, y):
        """g_t as (..., 2, 2) array of coordinate components."""
        f = self.base.conformal_factor(x, y)
        if isinstance(self.law, ConformalExp):
            ff = f * np.exp(2.0 * t * self.law.u.ev(x, y))
            out = np.zeros(np.shape(ff) + (2, 2))
            out[..., 0, 0] = out[..., 1, 1] = ff
            return out
        out = np.zeros(np.shape(f) + (2, 2))
        out[..., 0, 0] = out[..., 1, 1] = f
        return out + t * self.law.h.matrix(x, y)

    def metric_component_fields(self, t):
        """(E, F, G) component Fields of g_t, for derivative-hungry consumers."""
        from .fields import ProdField, ScaledField, SumField
        e2phi = _ExpOfField(self.base.phi, 2.0)
        if isinstance(self.law, ConformalExp):
            e2tu = _ExpOfField(self.law.u, 2.0 * t)
            E = ProdField(e2phi, e2tu)
            return E, as_field(0.0), E
        h = self.law.h
        E = SumField([e2phi, ScaledField(t, h.h11)])
        F = ScaledField(t, h.h12)
        G = SumField([e2phi, ScaledField(t, h.h22)])
        return E, F, G

    def curvature(self, t, x, y):
        """Gauss curvature of g_t (conformal fast path when available)."""
        if isinstance(self.law, ConformalExp):
            phi_t = self.base.phi + t * self.law.u
            lap = phi_t.d("x").d("x").ev(x, y) + phi_t.d("y").d("y").ev(x, y)
            f = self.base.conformal_factor(x, y) * np.exp(2.0 * t * self.law.u.ev(x, y))
            return -lap / f
        if t == 0.0:
            return gauss_curvature(self.base, x, y)
        E, F, G = self.metric_component_fields(t)
        return brioschi_curvature(E, F, G, x, y)


class _ExpOfField(Field):
    """exp(c * f) for a Field f, with exact chain-rule derivatives."""

    def __init__(self, f, c):
        self.f, self.c = f, c

    @property
    def stencil(self):
        return getattr(self.f, "stencil", 0.0)

    def ev(self, x, y):
        return np.exp(self.c * self.f.ev(x, y))

    def d(self, axis):
        from .fields import ProdField, ScaledField
        return ProdField(ScaledField(self.c, self.f.d(axis)), self)


def brioschi_curvature(E: Field, F: Field, G: Field, x, y):
    """Gauss curvature of a general 2D metric [[E, F], [F, G]] via the
    Brioschi formula, with derivatives taken through the component Fields."""
    Ev, Fv, Gv = E.ev(x, y), F.ev(x, y), G.ev(x, y)
    Ex, Ey = E.d("x").ev(x, y), E.d("y").ev(x, y)
    Gx, Gy = G.d("x").ev(x, y), G.d("y").ev(x, y)
    Fx, Fy = F.d("x").ev(x, y), F.d("y").ev(x, y)
    Eyy = E.d("y").d("y").ev(x, y)
    Gxx = G.d("x").d("x").ev(x, y)
    Fxy = F.d("x").d("y").ev(x, y)
    Ev, Fv, Gv = (np.asarray(v, dtype=float) for v in (Ev, Fv, Gv))

    m1 = np.stack([
        np.stack([-0.5 * Eyy + Fxy - 0.5 * Gxx, 0.5 * Ex, Fx - 0.5 * Ey], axis=-1),
        np.stack([np.broadcast_to(Fy - 0.5 * Gx, np.shape(Ev + 0.0 * Fy)), Ev, Fv], axis=-1),
        np.stack([np.broadcast_to(0.5 * Gy, np.shape(Ev + 0.0 * Gy)), Fv, Gv], axis=-1),
    ], axis=-2)
    zero = np.zeros_like(Ev)
    m2 = np.stack([
        np.stack([zero, 0.5 * Ey + zero, 0.5 * Gx + zero], axis=-1),
        np.stack([0.5 * Ey + zero, Ev, Fv], axis=-1),
        np.stack([0.5 * Gx + zero, Fv, Gv], axis=-1),
    ], axis=-2)
    det = Ev * Gv - Fv * Fv
    return (np.linalg.det(m1) - np.linalg.det(m2)) / det ** 2


def family_dot_metric(family: MetricFamily, x, y):
    """d/dt g_t at t = 0, as coordinate components (h11, h12, h22)."""
    family.base.domain.require(x, y)
    if isinstance(family.law, LinearTensor):
        return family.law.h.components(x, y)
    u = family.law.u.ev(x, y)
    f = family.base.conformal_factor(x, y)
    return 2.0 * u * f, np.zeros_like(np.asarray(u, dtype=float)), 2.0 * u * f


def dot_p(family: MetricFamily, x, y, theta):
    """First variation of the unit-sphere Hamiltonian: -h(T, T)/2 with T the
    unit vector at fiber angle theta and h = d/dt g_t in frame components."""
    a, b, c = family_dot_metric(family, x, y)
    w = np.exp(-2.0 * family.base.phi.ev(x, y))
    ct, st = np.cos(theta), np.sin(theta)
    hTT = w * (a * ct * ct + 2.0 * b * ct * st + c * st * st)
    return -0.5 * hTT


def dot_p_mode_coeffs(family: MetricFamily, x, y):
    """Fiber Fourier coefficients (c0, c2, cm2) of dot_p; support is {0, +-2}:

        c0  = -(h11 + h22)/4
        c2  = -((h11 - h22) - 2 i h12)/8,   cm2 = conj(c2)

    with h in frame components."""
    a, b, c = family_dot_metric(family, x, y)
    w = np.exp(-2.0 * family.base.phi.ev(x, y))
    a, b, c = w * a, w * b, w * c
    c0 = -0.25 * (a + c)
    c2 = -0.125 * ((a - c) - 2.0j * b)
    return c0, c2, np.conjugate(c2)
