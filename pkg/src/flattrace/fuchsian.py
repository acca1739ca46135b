"""Bolza-type genus-2 surface group: generators, conjugacy classes, lengths.

The group is realized in SL(2, R) acting on the upper half-plane, with the
octagon centered at i.  The four generators translate by L0 = 2 arccosh(1+sqrt2)
along geodesics through i at tangent angles k pi/4, and satisfy the octagon
relation  g0 g1^-1 g2 g3^-1 g0^-1 g1 g2^-1 g3 = 1.

Conjugacy classes are enumerated geometrically rather than by a word-length
cutoff: every class of translation length L <= L_max has a representative
whose axis meets the Dirichlet octagon, hence displacement d(i, M i) <=
L_max + 2 R_v with R_v = L0/2 the octagon circumradius, and any two such
representatives are conjugate by an element of displacement <= 2 R_v +
L_max/2.  Enumerating the displacement ball therefore yields a complete,
deterministic catalog; matrix products accumulate in extended precision.

Letters: 0..3 encode the generators, 4..7 their inverses ('a'..'d', 'A'..'D').
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "NotHyperbolicError", "ResourceError", "MobiusElement", "GroupPresentation",
    "ConjClass", "GeodesicRecord", "bolza_generators", "enumerate_classes",
    "length_of", "det_weight_constant_curvature", "axis_seed",
    "catalog_to_json", "catalog_from_json", "canonical_rotation", "word_to_string",
    "string_to_word", "inverse_word", "SYSTOLE",
]

LD = np.longdouble
SYSTOLE = float(2.0 * np.arccosh(LD(1.0) + np.sqrt(LD(2.0))))
_RV = SYSTOLE / 2.0  # circumradius of the Dirichlet octagon about i


class NotHyperbolicError(ValueError):
    """Element is not hyperbolic (|trace| <= 2)."""


class ResourceError(RuntimeError):
    """Enumeration budget exceeded."""


# ---------------------------------------------------------------------------
# Mobius elements
# ---------------------------------------------------------------------------

@dataclass
class MobiusElement:
    """2x2 real matrix of determinant 1 acting on the upper half-plane."""

    m: np.ndarray
    tol: float = 1e-9

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=LD).reshape(2, 2)
        d = float(self.m[0, 0] * self.m[1, 1] - self.m[0, 1] * self.m[1, 0])
        # det is a difference of two near-equal products: rounding grows with
        # the squared entry scale, so widen the check accordingly
        allow = max(self.tol, 64.0 * 1.1e-19 * float((self.m.astype(float) ** 2).sum()))
        if abs(d - 1.0) > allow:
            raise ValueError(f"matrix determinant {d} != 1 beyond tolerance")

    @property
    def trace(self) -> float:
        return float(self.m[0, 0] + self.m[1, 1])

    def is_hyperbolic(self) -> bool:
        return abs(self.trace) > 2.0 + self.tol

    def __matmul__(self, other: "MobiusElement") -> "MobiusElement":
        return MobiusElement(self.m @ other.m, tol=max(self.tol, other.tol))

    def inverse(self) -> "MobiusElement":
        a, b, c, d = self.m.reshape(4)
        return MobiusElement(np.array([[d, -b], [-c, a]], dtype=LD), tol=self.tol)

    def power(self, k: int) -> "MobiusElement":
        # no det renormalization: the evaluated det suffers catastrophic
        # cancellation at large entries while the product itself stays accurate
        out = np.eye(2, dtype=LD)
        base = self.m if k >= 0 else self.inverse().m
        for _ in range(abs(k)):
            out = out @ base
        return MobiusElement(out, tol=self.tol)

    def apply(self, z):
        """Apply to complex points z = x + i y."""
        a, b, c, d = (float(v) for v in self.m.reshape(4))
        z = np.asarray(z, dtype=complex)
        return (a * z + b) / (c * z + d)

    def deriv(self, z):
        """Complex derivative 1/(cz + d)^2."""
        a, b, c, d = (float(v) for v in self.m.reshape(4))
        return 1.0 / (c * np.asarray(z, dtype=complex) + d) ** 2

    def deriv2(self, z):
        """Second complex derivative -2c/(cz + d)^3."""
        a, b, c, d = (float(v) for v in self.m.reshape(4))
        return -2.0 * c / (c * np.asarray(z, dtype=complex) + d) ** 3

    def apply_tangent(self, z, theta):
        """Transport a unit tangent (point z, frame angle theta)."""
        w = self.apply(z)
        rot = np.angle(self.deriv(z))
        return w, np.mod(theta + rot, 2.0 * np.pi)

    def fixed_points(self) -> Tuple[float, float]:
        """Boundary fixed points (repelling, attracting) of a hyperbolic element.
        The attracting one may be numpy.inf."""
        a, b, c, d = (float(v) for v in self.m.reshape(4))
        if abs(self.trace) <= 2.0 + self.tol:
            raise NotHyperbolicError(f"trace {self.trace} not hyperbolic")
        if abs(c) < 1e-14:
            xf = b / (d - a) if abs(d - a) > 1e-14 else np.inf
            # z -> (a/d) z + b/d; |a/d| > 1 means infinity attracts
            return (xf, np.inf) if abs(a) > abs(d) else (np.inf, xf)
        disc = np.sqrt((a + d) ** 2 - 4.0)
        x1 = ((a - d) - disc) / (2 * c)
        x2 = ((a - d) + disc) / (2 * c)
        # attracting fixed point x has |M'(x)| < 1, i.e. (c x + d)^2 > 1
        if (c * x1 + d) ** 2 > 1.0:
            return x2, x1
        return x1, x2

    def __repr__(self):
        a, b, c, d = (float(v) for v in self.m.reshape(4))
        return f"MobiusElement([[{a:.6g}, {b:.6g}], [{c:.6g}, {d:.6g}]])"


def length_of(elem: MobiusElement) -> float:
    """Translation length 2 arccosh(|tr|/2) of a hyperbolic element."""
    t = abs(LD(elem.m[0, 0]) + LD(elem.m[1, 1]))
    if float(t) <= 2.0 + elem.tol:
        raise NotHyperbolicError(f"trace {float(t)} is not hyperbolic")
    return float(2.0 * np.arccosh(t / 2.0))


def det_weight_constant_curvature(L: float, m: int = 1) -> float:
    """|det(I - P^m)| = 4 sinh^2(m L / 2) for curvature -1 monodromy whose
    eigenvalues are e^{+-mL}.  Pass the iterate length with m = 1, or the
    primitive length together with the iterate order m."""
    if L <= 0:
        raise ValueError(f"length must be positive, got {L}")
    if m < 1:
        raise ValueError(f"iterate order must be >= 1, got {m}")
    return float(4.0 * np.sinh(LD(m) * LD(L) / 2.0) ** 2)


# ---------------------------------------------------------------------------
# Words
# ---------------------------------------------------------------------------

_LETTERS = "abcdABCD"


def inverse_letter(l: int) -> int:
    return (l + 4) % 8


def word_to_string(word: Sequence[int]) -> str:
    return "".join(_LETTERS[l] for l in word)


def string_to_word(s: str) -> Tuple[int, ...]:
    return tuple(_LETTERS.index(ch) for ch in s)


def inverse_word(word: Sequence[int]) -> Tuple[int, ...]:
    return tuple(inverse_letter(l) for l in reversed(word))


def cyclically_reduce(word: Sequence[int]) -> Tuple[int, ...]:
    w = list(word)
    # free reduction
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(w) - 1:
            if w[i + 1] == inverse_letter(w[i]):
                del w[i:i + 2]
                changed = True
                i = max(i - 1, 0)
            else:
                i += 1
        while len(w) >= 2 and w[-1] == inverse_letter(w[0]):
            w = w[1:-1]
            changed = True
    return tuple(w)


def canonical_rotation(word: Sequence[int]) -> Tuple[int, ...]:
    """Lexicographically minimal cyclic rotation."""
    w = tuple(word)
    if not w:
        return w
    return min(tuple(w[i:] + w[:i]) for i in range(len(w)))


def canonical_word(word: Sequence[int], oriented: bool = True) -> Tuple[int, ...]:
    """Canonical form: lex-min over cyclic rotations; in unoriented mode also
    over rotations of the inverse word."""
    w = canonical_rotation(cyclically_reduce(word))
    if oriented:
        return w
    return min(w, canonical_rotation(inverse_word(w)))


def word_primitive_split(word: Sequence[int]) -> Tuple[Tuple[int, ...], int]:
    """(primitive root, m) with word = root * m as a linear word."""
    w = tuple(word)
    n = len(w)
    for d in range(1, n + 1):
        if n % d == 0 and w == w[:d] * (n // d):
            return w[:d], n // d
    return w, 1


# ---------------------------------------------------------------------------
# Group presentation
# ---------------------------------------------------------------------------

@dataclass
class GroupPresentation:
    generators: List[MobiusElement]          # the 4 side pairings
    inverses: List[MobiusElement]
    relation: Tuple[int, ...]                # octagon relation word

    def letters(self) -> List[MobiusElement]:
        return self.generators + self.inverses

    def word_element(self, word: Sequence[int]) -> MobiusElement:
        mats = self.letters()
        out = np.eye(2, dtype=LD)
        for l in word:
            out = out @ mats[l].m
        return MobiusElement(out, tol=1e-8)

    def relation_residual(self) -> float:
        R = self.word_element(self.relation).m.astype(float)
        return float(min(np.abs(R - np.eye(2)).max(), np.abs(R + np.eye(2)).max()))


def bolza_generators() -> GroupPresentation:
    """Side pairings of the regular hyperbolic octagon centered at i."""
    one = LD(1.0)
    chl = one + np.sqrt(LD(2.0))           # cosh(L0/2) = 1 + sqrt 2
    shl = np.sqrt(chl * chl - one)
    T = np.array([[chl + shl, 0.0 * one], [0.0 * one, chl - shl]], dtype=LD)
    gens = []
    for k in range(4):
        psi = LD(k) * np.pi / LD(8.0)      # tangent rotation by k pi/4 at i
        c, s = np.cos(psi), np.sin(psi)
        R = np.array([[c, s], [-s, c]], dtype=LD)
        Ri = np.array([[c, -s], [s, c]], dtype=LD)
        gens.append(MobiusElement(R @ T @ Ri, tol=1e-9))
    inv = [g.inverse() for g in gens]
    relation = (0, 5, 2, 7, 4, 1, 6, 3)    # a B c D A b C d
    pres = GroupPresentation(gens, inv, relation)
    res = pres.relation_residual()
    if res > 1e-9:
        raise RuntimeError(f"octagon relation residual {res} too large")
    return pres


# ---------------------------------------------------------------------------
# Geometric enumeration
# ---------------------------------------------------------------------------

def _displacement(mats: np.ndarray) -> np.ndarray:
    """d(i, M i): cosh d = ||M||_F^2 / 2 for M in SL(2, R)."""
    q = (mats ** 2).sum(axis=(-2, -1)) / 2.0
    return np.arccosh(np.maximum(q, 1.0))


def _sign_fix(mats: np.ndarray) -> np.ndarray:
    flat = mats.reshape(-1, 4)
    s = np.zeros(len(flat))
    for k in range(4):
        pick = (s == 0) & (np.abs(flat[:, k]) > 1e-8)
        s[pick] = np.sign(flat[pick, k])
    s[s == 0] = 1.0
    return mats * s.reshape(-1, 1, 1)


def _axis_dist_to_i(mats: np.ndarray) -> np.ndarray:
    """Hyperbolic distance from i to the axis of each hyperbolic matrix."""
    a, b, c, d = (mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1])
    out = np.empty(len(mats))
    vert = np.abs(c) < 1e-13
    with np.errstate(divide="ignore", invalid="ignore"):
        x0 = np.where(np.abs(d - a) > 1e-13, b / np.where(vert, d - a, 1.0), 0.0)
        out[vert] = np.arcsinh(np.abs(x0[vert]))
        disc = np.sqrt(np.maximum((a + d) ** 2 - 4.0, 0.0))
        x1 = ((a - d) - disc) / (2 * np.where(vert, 1.0, c))
        x2 = ((a - d) + disc) / (2 * np.where(vert, 1.0, c))
        ctr = (x1 + x2) / 2.0
        r = np.abs(x2 - x1) / 2.0
        sd = np.abs(ctr ** 2 + 1.0 - r ** 2) / (2.0 * r)
    out[~vert] = np.arcsinh(sd[~vert])
    return out


def group_ball(group: GroupPresentation, dmax: float, max_elements: int = 4_000_000):
    """All group elements with displacement d(i, g i) <= dmax, by pruned BFS.

    Returns (mats (n,2,2) float64, words list of tuples, displacements)."""
    est = np.cosh(dmax) / 2.0
    if est > max_elements:
        raise ResourceError(
            f"displacement ball ~{est:.3g} elements exceeds budget {max_elements}")
    letters = np.array([m.m.astype(float) for m in group.letters()])
    eye = np.eye(2)
    mats = [eye]
    words: List[Tuple[int, ...]] = [()]
    keys = {_key_of(eye)}
    frontier = np.array([eye])
    fwords = [()]
    while len(frontier):
        children = np.einsum("fij,gjk->fgik", frontier, letters).reshape(-1, 2, 2)
        cwords = [w + (g,) for w in fwords for g in range(8)]
        disp = _displacement(children)
        keep = disp <= dmax
        children = children[keep]
        cwords = [w for w, k in zip(cwords, keep) if k]
        sf = _sign_fix(children)
        nf, nw = [], []
        for M, Ms, w in zip(children, sf, cwords):
            k = _key_of(Ms)
            if k in keys:
                continue
            keys.add(k)
            mats.append(M)
            words.append(w)
            nf.append(M)
            nw.append(w)
            if len(mats) > max_elements:
                raise ResourceError(f"ball exceeded budget {max_elements}")
        frontier = np.array(nf) if nf else np.empty((0, 2, 2))
        fwords = nw
    mats = np.array(mats)
    return mats, words, _displacement(mats)


def _key_of(M: np.ndarray):
    return tuple(np.round(_sign_fix(M[None])[0].reshape(4), 6))


@dataclass(frozen=True)
class ConjClass:
    word: Tuple[int, ...]
    primitive_root: Tuple[int, ...]
    m: int

    def __post_init__(self):
        w = tuple(self.word)
        if any(w[(i + 1) % len(w)] == inverse_letter(w[i]) for i in range(len(w))):
            raise ValueError(f"word {word_to_string(w)} not cyclically reduced")
        root, mm = word_primitive_split(w)
        if root != tuple(self.primitive_root) or mm != self.m:
            raise ValueError("word is not primitive_root repeated m times")

    @property
    def name(self) -> str:
        return word_to_string(self.word)


@dataclass
class GeodesicRecord:
    cls: ConjClass
    matrix: MobiusElement
    trace: float
    L: float
    L_primitive: float
    m: int
    weight: float = 0.0

    def __post_init__(self):
        if abs(self.L - 2.0 * np.arccosh(abs(self.trace) / 2.0)) > 1e-12 * max(1.0, self.L):
            raise ValueError("length inconsistent with trace")
        if abs(self.L - self.m * self.L_primitive) > 1e-10 * max(1.0, self.L):
            raise ValueError("L != m * L_primitive")


class _ConjugacyTester:
    """Tests conjugacy within the group using a precomputed conjugator set."""

    def __init__(self, conj_mats: np.ndarray):
        self.C = conj_mats
        self.Ci = np.linalg.inv(conj_mats)

    def orbit(self, M: np.ndarray) -> np.ndarray:
        return np.einsum("nij,jk,nkl->nil", self.C, M, self.Ci)

    def canonical_key(self, M: np.ndarray) -> np.ndarray:
        """Sign-fixed, lexicographically minimal matrix among the minimal-norm
        conjugates of M; a class invariant for representatives reduced near i."""
        orb = _sign_fix(self.orbit(M))
        nrm = np.abs(orb).reshape(len(orb), 4).sum(axis=1)
        cand = orb[nrm < nrm.min() * (1.0 + 1e-9)].reshape(-1, 4)
        cand = np.round(cand, 8)
        return cand[np.lexsort(cand.T[::-1])[0]]

    def are_conjugate(self, M1: np.ndarray, M2: np.ndarray, tol=1e-6) -> bool:
        orb = self.orbit(M1)
        d1 = np.abs(orb - M2).max(axis=(1, 2)).min()
        d2 = np.abs(orb + M2).max(axis=(1, 2)).min()
        return min(d1, d2) < tol


def enumerate_classes(group: GroupPresentation, L_max: float,
                      oriented: bool = True, ball_margin: float = 1.0,
                      max_elements: int = 4_000_000,
                      threads: Optional[int] = None) -> List[GeodesicRecord]:
    """Every conjugacy class (primitive and iterate) with L <= L_max, once each,
    sorted by (L, word).  Deterministic; weights are the constant-curvature
    closed form L_primitive / (4 sinh^2(L/2))."""
    if L_max <= 0:
        raise ValueError("L_max must be positive")
    if L_max < SYSTOLE - 1e-9:
        return []
    dmax = L_max + 2.0 * _RV + ball_margin
    mats, words, disp = group_ball(group, dmax, max_elements=max_elements)

    tr = np.einsum("nii->n", mats)
    with np.errstate(invalid="ignore"):
        Ls = 2.0 * np.arccosh(np.maximum(np.abs(tr) / 2.0, 1.0))
    hyp = np.abs(tr) > 2.0 + 1e-9
    cand = hyp & (Ls <= L_max + 1e-9) & (_axis_dist_to_i(mats) <= _RV + 0.05)

    idx = np.flatnonzero(cand)
    order = sorted(idx, key=lambda i: (round(Ls[i], 9), len(words[i]), words[i]))

    tester = _ConjugacyTester(mats[disp <= 2.0 * _RV + L_max / 2.0 + 0.7])

    classes = []          # (L, word, matrix float, key)
    seen_keys = {}
    for i in order:
        key = tester.canonical_key(mats[i])
        kb = key.tobytes()
        hit = None
        if kb in seen_keys:
            hit = seen_keys[kb]
        else:
            # guard against key-rounding misses within the same trace cluster
            for j, (Lj, wj, Mj, kj) in enumerate(classes):
                if abs(Lj - Ls[i]) < 1e-7 and np.abs(kj - key).max() < 1e-6:
                    hit = j
                    break
        if hit is None:
            w = canonical_rotation(cyclically_reduce(words[i]))
            classes.append((float(Ls[i]), w, mats[i], key))
            seen_keys[kb] = len(classes) - 1
        else:
            # keep the shortest (then lex-min) word as the class word
            Lj, wj, Mj, kj = classes[hit]
            w = canonical_rotation(cyclically_reduce(words[i]))
            if (len(w), w) < (len(wj), wj):
                classes[hit] = (Lj, w, Mj, kj)

    # primitive / iterate classification (geometric power test)
    classes.sort(key=lambda c: (c[0], c[1]))
    records: List[GeodesicRecord] = []
    for L, w, M, key in classes:
        root_word, root_L, mm = w, L, 1
        for rec in records:
            if rec.m != 1:
                continue
            k = int(round(L / rec.L))
            if k >= 2 and abs(L - k * rec.L) < 1e-8 * max(1.0, L):
                Mk = np.linalg.matrix_power(rec.matrix.m.astype(float), k)
                if tester.are_conjugate(Mk, M):
                    root_word, root_L, mm = rec.cls.word, rec.L, k
                    break
        word = canonical_rotation(root_word * mm) if mm > 1 else w
        elem = group.word_element(word)
        records.append(GeodesicRecord(
            cls=ConjClass(word=word, primitive_root=root_word, m=mm),
            matrix=elem, trace=elem.trace, L=float(length_of(elem)),
            L_primitive=float(length_of(elem)) / mm, m=mm,
        ))

    if not oriented:
        # pair each class geometrically with its orientation reversal: word-level
        # inversion is not enough in a surface group, where the reversed class
        # may only be conjugate to the inverse word through the relation
        keep, dropped = [], set()
        for i, rec in enumerate(records):
            if i in dropped:
                continue
            Minv = np.linalg.inv(rec.matrix.m.astype(float))
            for j in range(i + 1, len(records)):
                other = records[j]
                if j in dropped or abs(other.L - rec.L) > 1e-8:
                    continue
                if tester.are_conjugate(Minv, other.matrix.m.astype(float)):
                    dropped.add(j)
                    break
            keep.append(rec)
        records = keep

    for rec in records:
        rec.weight = rec.L_primitive / det_weight_constant_curvature(rec.L)
    records.sort(key=lambda r: (r.L, r.cls.word))
    return records


# ---------------------------------------------------------------------------
# Axis seeds
# ---------------------------------------------------------------------------

def axis_point(elem: MobiusElement, s):
    """Unit-speed parametrization of the axis, returning (x, y, theta).

    s = 0 is the axis point nearest to i; s increases toward the attracting
    fixed point; elem maps s to s + L."""
    s = np.asarray(s, dtype=float)
    rep, att = elem.fixed_points()
    if np.isinf(rep) or np.isinf(att):
        x0 = rep if np.isinf(att) else att
        up = np.isinf(att)
        # vertical axis x = x0, nearest point to i has height sqrt(1 + x0^2)
        y0 = np.sqrt(1.0 + x0 ** 2)
        y = y0 * np.exp(s if up else -s)
        x = np.full_like(y, x0)
        th = np.full_like(y, np.pi / 2 if up else -np.pi / 2)
        return x, y, np.mod(th, 2 * np.pi)
    c0 = (rep + att) / 2.0
    R = abs(att - rep) / 2.0
    sgn = 1.0 if att > rep else -1.0
    # nearest point to i: minimize cosh d(i, z(s)); closed form via projection
    s0 = _axis_param_nearest_i(c0, R, sgn)
    ss = s + s0
    x = c0 + sgn * R * np.tanh(ss)
    y = R / np.cosh(ss)
    dx = sgn * R / np.cosh(ss) ** 2
    dy = -R * np.tanh(ss) / np.cosh(ss)
    th = np.arctan2(dy, dx)
    return x, y, np.mod(th, 2 * np.pi)


def _axis_param_nearest_i(c0, R, sgn):
    # minimize cosh d(i, z) = (x^2 + y^2 + 1)/(2y) over the semicircle
    # x = c0 + R cos(alpha), y = R sin(alpha); stationarity gives
    # cos(alpha*) = -2 c0 R / (c0^2 + R^2 + 1), and tanh(u*) = sgn cos(alpha*).
    ca = -2.0 * c0 * R / (c0 * c0 + R * R + 1.0)
    return float(np.arctanh(np.clip(sgn * ca, -1.0 + 1e-15, 1.0 - 1e-15)))


def axis_seed(elem: MobiusElement, n: int):
    """n equally spaced phase points (x, y, theta) along one fundamental period
    of the axis of a hyperbolic element.  The period is centered on the axis
    point nearest i (s from -L/2), which keeps the whole lift, its deck images
    at the seam, and the ghost continuation as close to the base point as the
    geometry allows."""
    if n < 8:
        raise ValueError("need at least 8 sample points")
    if not elem.is_hyperbolic():
        raise NotHyperbolicError(f"trace {elem.trace} is not hyperbolic")
    L = length_of(elem)
    s = (np.arange(n) - n // 2) * (L / n)
    x, y, th = axis_point(elem, s)
    return np.column_stack([x, y, th])


# ---------------------------------------------------------------------------
# Catalog serialization
# ---------------------------------------------------------------------------

def _fmt(x: float) -> float:
    return float(f"{x:.17g}")


def catalog_to_json(records: List[GeodesicRecord]) -> str:
    rows = []
    for r in records:
        rows.append({
            "word": r.cls.name,
            "trace": _fmt(r.trace),
            "L": _fmt(r.L),
            "L_primitive": _fmt(r.L_primitive),
            "m": r.m,
            "weight": _fmt(r.weight),
        })
    return json.dumps(rows, indent=1)


def catalog_from_json(text: str, group: GroupPresentation) -> List[GeodesicRecord]:
    rows = json.loads(text)
    out = []
    for row in rows:
        word = string_to_word(row["word"])
        root, m = word_primitive_split(word)
        elem = group.word_element(word)
        rec = GeodesicRecord(
            cls=ConjClass(word=word, primitive_root=root, m=m),
            matrix=elem, trace=row["trace"], L=row["L"],
            L_primitive=row["L_primitive"], m=row["m"], weight=row["weight"],
        )
        out.append(rec)
    return out
