"""Deck-group-equivariant extension of compactly supported data.

Perturbation data (scalar conformal factors u, vector fields v, symmetric
tensors h) is authored as bumps supported inside one fundamental-domain copy
and extended by summing pullbacks over deck transformations:

    scalar   f(z)  = sum_g  f_b(g z)
    vector   v(z)  = sum_g  Dg(z)^{-1} v_b(g z)
    tensor   h(z)  = sum_g  Dg(z)^T h_b(g z) Dg(z)

The translate set contains every g whose term is nonzero somewhere on a
working region B(i, R); the sum is then exactly invariant for comparisons
inside the region (compact supports contribute exactly zero beyond it), and
the realized safety margin is reported.

Derivatives up to second order are computed through a small jet calculus:
a jet is a dict of arrays {f, fx, fy, fxx, fxy, fyy}.  Mobius maps are
holomorphic, so their jets come from the closed forms g', g'', g'''.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .fields import Field
from .fuchsian import GroupPresentation, MobiusElement, group_ball

__all__ = [
    "Jet", "jet_add", "jet_scale", "jet_mul", "field_jet", "compose_jet",
    "holomorphic_jet", "EquivariantExtension", "make_invariant_scalar",
    "make_invariant_vector", "make_invariant_tensor", "JetField",
]

_KEYS = ("f", "fx", "fy", "fxx", "fxy", "fyy")
Jet = Dict[str, np.ndarray]


def jet_zero(shape, dtype=float) -> Jet:
    return {k: np.zeros(shape, dtype=dtype) for k in _KEYS}


def jet_add(a: Jet, b: Jet) -> Jet:
    return {k: a[k] + b[k] for k in _KEYS}


def jet_scale(c, a: Jet) -> Jet:
    return {k: c * a[k] for k in _KEYS}


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Leibniz rule to second order."""
    return {
        "f": a["f"] * b["f"],
        "fx": a["fx"] * b["f"] + a["f"] * b["fx"],
        "fy": a["fy"] * b["f"] + a["f"] * b["fy"],
        "fxx": a["fxx"] * b["f"] + 2 * a["fx"] * b["fx"] + a["f"] * b["fxx"],
        "fxy": a["fxy"] * b["f"] + a["fx"] * b["fy"] + a["fy"] * b["fx"] + a["f"] * b["fxy"],
        "fyy": a["fyy"] * b["f"] + 2 * a["fy"] * b["fy"] + a["f"] * b["fyy"],
    }


class _FieldJetTable:
    """Field together with its six derivative fields, evaluated lazily."""

    def __init__(self, field: Field):
        fx, fy = field.d("x"), field.d("y")
        self.fields = {
            "f": field, "fx": fx, "fy": fy,
            "fxx": fx.d("x"), "fxy": fx.d("y"), "fyy": fy.d("y"),
        }

    def jet(self, x, y, order=2) -> Jet:
        out = {}
        keys = _KEYS if order >= 2 else (_KEYS[:3] if order == 1 else _KEYS[:1])
        for k in _KEYS:
            if k in keys:
                out[k] = np.asarray(self.fields[k].ev(x, y))
            else:
                out[k] = np.zeros(np.shape(np.asarray(x)))
        return out


def field_jet(field: Field, x, y, order=2) -> Jet:
    return _FieldJetTable(field).jet(x, y, order)


def holomorphic_jet(F, F1, F2) -> Jet:
    """Jet of a holomorphic function from values and complex derivatives:
    d/dx = F', d/dy = i F'."""
    return {
        "f": F, "fx": F1, "fy": 1j * F1,
        "fxx": F2, "fxy": 1j * F2, "fyy": -F2,
    }


def compose_jet(B: Jet, G1, G2) -> Jet:
    """Jet of z -> B(w(z)) for a holomorphic w with w' = G1, w'' = G2,
    given the jet of B evaluated at w(z)."""
    p, q = G1.real, G1.imag
    px, qx = G2.real, G2.imag
    py, qy = -G2.imag, G2.real
    Bu, Bv = B["fx"], B["fy"]
    Buu, Buv, Bvv = B["fxx"], B["fxy"], B["fyy"]
    return {
        "f": B["f"],
        "fx": Bu * p + Bv * q,
        "fy": -Bu * q + Bv * p,
        "fxx": Buu * p * p + 2 * Buv * p * q + Bvv * q * q + Bu * px + Bv * qx,
        "fxy": -Buu * p * q + Buv * (p * p - q * q) + Bvv * p * q + Bu * py + Bv * qy,
        "fyy": Buu * q * q - 2 * Buv * p * q + Bvv * p * p - Bu * qy + Bv * py,
    }


def _mobius_jets(elem: MobiusElement, z):
    """w = g(z) together with complex derivative values G1, G2, G3."""
    a, b, c, d = (float(v) for v in elem.m.reshape(4))
    den = c * z + d
    w = (a * z + b) / den
    G1 = 1.0 / den ** 2
    G2 = -2.0 * c / den ** 3
    G3 = 6.0 * c ** 2 / den ** 4
    return w, G1, G2, G3


# ---------------------------------------------------------------------------
# Equivariant extensions
# ---------------------------------------------------------------------------

def _hyp_dist(z1, z2):
    z1, z2 = np.asarray(z1, dtype=complex), np.asarray(z2, dtype=complex)
    num = np.abs(z1 - z2) ** 2
    return np.arccosh(1.0 + num / (2.0 * z1.imag * z2.imag))


@dataclass
class SupportDisk:
    """Euclidean disk in the half-plane containing the base support."""
    cx: float
    cy: float
    r: float

    def hyperbolic(self) -> Tuple[complex, float]:
        y0 = np.sqrt(self.cy ** 2 - self.r ** 2)
        rho = np.arctanh(self.r / self.cy)
        return complex(self.cx, y0), float(rho)

    def contains(self, z, pad=0.0):
        return (z.real - self.cx) ** 2 + (z.imag - self.cy) ** 2 < (self.r + pad) ** 2


class EquivariantExtension:
    """Pullback sum of a compactly supported scalar / vector / tensor bump.

    ``components`` maps component names to base Fields:
        scalar: {"f"}; vector: {"v1", "v2"}; tensor: {"h11", "h12", "h22"}.
    Derivatives are available through order 2.
    """

    def __init__(self, kind: str, components: Dict[str, Field],
                 support: SupportDisk, translates: List[MobiusElement],
                 region_radius: float, margin: float):
        if kind not in ("scalar", "vector", "tensor"):
            raise ValueError(f"unknown kind {kind}")
        self.kind = kind
        self.support = support
        self.translates = translates
        self.region_radius = region_radius
        self.margin = margin
        self._tables = {k: _FieldJetTable(f) for k, f in components.items()}
        self._out_names = {
            "scalar": ("f",), "vector": ("v1", "v2"),
            "tensor": ("h11", "h12", "h22"),
        }[kind]

    def component_names(self) -> Tuple[str, ...]:
        return self._out_names

    def localize(self, center: complex, radius: float) -> "EquivariantExtension":
        """Restrict the translate list to terms whose support meets the
        hyperbolic disk B(center, radius).  Exact on that disk."""
        ch, rho = self.support.hyperbolic()
        keep = []
        for g in self.translates:
            cg = g.inverse().apply(np.array([ch]))[0]
            if _hyp_dist(cg, center) <= radius + rho + 1e-9:
                keep.append(g)
        return self._with_translates(keep, radius)

    def localize_to_points(self, z, pad: float) -> "EquivariantExtension":
        """Restrict to translates whose support meets the pad-neighborhood of
        the sample points z (a tube, much smaller than any охватывающий disk)."""
        ch, rho = self.support.hyperbolic()
        z = np.asarray(z, dtype=complex)
        keep = []
        for g in self.translates:
            cg = g.inverse().apply(np.array([ch]))[0]
            if _hyp_dist(cg, z).min() <= rho + pad:
                keep.append(g)
        return self._with_translates(keep, self.region_radius)

    def _with_translates(self, keep, radius) -> "EquivariantExtension":
        out = EquivariantExtension.__new__(EquivariantExtension)
        out.kind, out.support = self.kind, self.support
        out.translates = keep
        out.region_radius, out.margin = radius, self.margin
        out._tables, out._out_names = self._tables, self._out_names
        return out

    # -- batched jet evaluation ------------------------------------------------

    def jets(self, x, y, order=2) -> Dict[str, Jet]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        z = x + 1j * y
        acc = {name: jet_zero(z.shape) for name in self._out_names}
        for g in self.translates:
            w, G1, G2, G3 = _mobius_jets(g, z)
            mask = self.support.contains(w, pad=1e-12)
            if not np.any(mask):
                continue
            idx = np.flatnonzero(mask)
            zm, wm = z.flat[idx], w.flat[idx]
            G1m, G2m, G3m = G1.flat[idx], G2.flat[idx], G3.flat[idx]
            term = self._term_jets(g, zm, wm, G1m, G2m, G3m, order)
            for name in self._out_names:
                for k in _KEYS:
                    np.add.at(acc[name][k].reshape(-1), idx, term[name][k])
        return acc

    def values(self, x, y) -> Dict[str, np.ndarray]:
        jets = self.jets(x, y, order=0)
        return {name: jets[name]["f"] for name in self._out_names}

    def _term_jets(self, g, z, w, G1, G2, G3, order):
        u, v = w.real, w.imag
        if self.kind == "scalar":
            B = self._tables["f"].jet(u, v, order)
            return {"f": compose_jet(B, G1, G2)}
        if self.kind == "vector":
            # Dg^{-1} acts as complex multiplication by 1/g'(z) = (cz+d)^2,
            # a holomorphic polynomial in z
            a, b, c, d = (float(t) for t in g.m.reshape(4))
            den = c * z + d
            A = holomorphic_jet(den ** 2, 2.0 * c * den, np.full_like(den, 2.0 * c ** 2))
            V1 = compose_jet(self._tables["v1"].jet(u, v, order), G1, G2)
            V2 = compose_jet(self._tables["v2"].jet(u, v, order), G1, G2)
            Vc = jet_add(V1, jet_scale(1j, V2))
            T = jet_mul(A, Vc)
            return {"v1": {k: T[k].real for k in _KEYS},
                    "v2": {k: T[k].imag for k in _KEYS}}
        # tensor: J^T h(w) J with J = [[p, -q], [q, p]], p + iq = g'(z) = G1
        P = holomorphic_jet(G1, G2, G3)
        Pr = {k: P[k].real for k in _KEYS}
        Pi = {k: P[k].imag for k in _KEYS}
        H11 = compose_jet(self._tables["h11"].jet(u, v, order), G1, G2)
        H12 = compose_jet(self._tables["h12"].jet(u, v, order), G1, G2)
        H22 = compose_jet(self._tables["h22"].jet(u, v, order), G1, G2)
        pp = jet_mul(Pr, Pr)
        qq = jet_mul(Pi, Pi)
        pq = jet_mul(Pr, Pi)
        c11 = jet_add(jet_add(jet_mul(pp, H11), jet_scale(2.0, jet_mul(pq, H12))),
                      jet_mul(qq, H22))
        c12 = jet_add(jet_mul(pq, jet_add(H22, jet_scale(-1.0, H11))),
                      jet_mul(jet_add(pp, jet_scale(-1.0, qq)), H12))
        c22 = jet_add(jet_add(jet_mul(qq, H11), jet_scale(-2.0, jet_mul(pq, H12))),
                      jet_mul(pp, H22))
        return {"h11": c11, "h12": c12, "h22": c22}


class JetField(Field):
    """Field adapter for one component / derivative slot of an extension."""

    def __init__(self, ext: EquivariantExtension, name: str, slot: str = "f"):
        self.ext, self.name, self.slot = ext, name, slot

    def ev(self, x, y):
        order = {"f": 0, "fx": 1, "fy": 1}.get(self.slot, 2)
        scalar = np.ndim(x) == 0 and np.ndim(y) == 0
        out = self.ext.jets(x, y, order=order)[self.name][self.slot]
        return out[0] if scalar else out

    def d(self, axis):
        nxt = {
            ("f", "x"): "fx", ("f", "y"): "fy",
            ("fx", "x"): "fxx", ("fx", "y"): "fxy",
            ("fy", "x"): "fxy", ("fy", "y"): "fyy",
        }.get((self.slot, axis))
        if nxt is None:
            raise NotImplementedError(
                "equivariant extensions provide derivatives through order 2")
        return JetField(self.ext, self.name, nxt)


# ---------------------------------------------------------------------------
# Factories
# ---------------------------------------------------------------------------

_ball_cache: Dict[Tuple[int, float], tuple] = {}


def _cached_ball(group: GroupPresentation, dmax: float):
    key = (id(group), round(float(dmax), 2))
    if key not in _ball_cache:
        _ball_cache[key] = group_ball(group, dmax)
    return _ball_cache[key]


def _translate_set(group: GroupPresentation, support: SupportDisk,
                   region_radius: float):
    ch, rho = support.hyperbolic()
    d_center = float(_hyp_dist(ch, 1j))
    dmax = region_radius + rho + d_center + 0.8
    mats, words, disp = _cached_ball(group, np.ceil(dmax * 2) / 2)
    keep, excluded_gap = [], np.inf
    for M in mats:
        elem = MobiusElement(M, tol=1e-6)
        cg = elem.inverse().apply(np.array([ch]))[0]
        gap = float(_hyp_dist(cg, 1j)) - rho - region_radius
        if gap <= 0.0:
            keep.append(elem)
        else:
            excluded_gap = min(excluded_gap, gap)
    return keep, float(excluded_gap)


def make_invariant_scalar(group: GroupPresentation, bump: Field,
                          support: SupportDisk, region_radius: float = 7.5):
    """Deck-invariant scalar sum of pullbacks of a bump; exact on B(i, R)."""
    translates, margin = _translate_set(group, support, region_radius)
    return EquivariantExtension("scalar", {"f": bump}, support, translates,
                                region_radius, margin)


def make_invariant_vector(group: GroupPresentation, v1: Field, v2: Field,
                          support: SupportDisk, region_radius: float = 7.5):
    translates, margin = _translate_set(group, support, region_radius)
    return EquivariantExtension("vector", {"v1": v1, "v2": v2}, support,
                                translates, region_radius, margin)


def make_invariant_tensor(group: GroupPresentation, h11: Field, h12: Field,
                          h22: Field, support: SupportDisk,
                          region_radius: float = 7.5):
    translates, margin = _translate_set(group, support, region_radius)
    return EquivariantExtension("tensor", {"h11": h11, "h12": h12, "h22": h22},
                                support, translates, region_radius, margin)


def as_tensor_field(ext: EquivariantExtension):
    """SymmetricTensorField view of a tensor extension (fast path attached)."""
    from .metric import SymmetricTensorField
    if ext.kind != "tensor":
        raise ValueError("extension is not a tensor")
    h = SymmetricTensorField(JetField(ext, "h11"), JetField(ext, "h12"),
                             JetField(ext, "h22"))
    h._equivariant = ext
    return h


def vector_component_fields(ext: EquivariantExtension):
    if ext.kind != "vector":
        raise ValueError("extension is not a vector")
    return JetField(ext, "v1"), JetField(ext, "v2")
