import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flattrace.fuchsian import (
    SYSTOLE, ConjClass, GeodesicRecord, MobiusElement, NotHyperbolicError,
    ResourceError, axis_point, axis_seed, bolza_generators, canonical_word,
    catalog_from_json, catalog_to_json, cyclically_reduce,
    det_weight_constant_curvature, enumerate_classes, group_ball,
    inverse_word, length_of, string_to_word, word_to_string,
)


@pytest.fixture(scope="session")
def group():
    return bolza_generators()


@pytest.fixture(scope="session")
def catalog62(group):
    return enumerate_classes(group, 6.2)


def test_generator_traces(group):
    expect = 2.0 * (1.0 + np.sqrt(2.0))
    for g in group.generators:
        assert abs(abs(g.trace) - expect) < 1e-9


def test_relation_word(group):
    assert group.relation_residual() < 1e-9


def test_generator_inverse_identity(group):
    for g, gi in zip(group.generators, group.inverses):
        assert np.allclose((g @ gi).m.astype(float), np.eye(2), atol=1e-12)


def test_generators_hyperbolic(group):
    assert all(g.is_hyperbolic() for g in group.letters())


def test_length_of_inversion():
    m = MobiusElement(np.diag([np.exp(1.0), np.exp(-1.0)]))
    assert abs(m.trace - 2*np.cosh(1.0)) < 1e-12
    assert abs(length_of(m) - 2.0) < 1e-12


def test_length_of_systole_trace(group):
    assert abs(length_of(group.generators[0]) - 3.0571421) < 1e-6
    assert abs(SYSTOLE - 2*np.arccosh(1+np.sqrt(2))) < 1e-14


def test_length_of_parabolic_error():
    shear = MobiusElement(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(NotHyperbolicError):
        length_of(shear)


def test_det_weight_values():
    L0 = SYSTOLE
    w = det_weight_constant_curvature(L0)
    assert abs(w - 19.3137085) < 1e-6
    assert abs(w - 4*np.sinh(L0/2)**2) < 1e-12
    # exact closed form 8 + 8 sqrt2 at the systole
    assert abs(w - (8 + 8*np.sqrt(2))) < 1e-10
    w2 = det_weight_constant_curvature(2*L0)
    assert abs(w2 - 450.2742) < 2e-4
    assert abs(det_weight_constant_curvature(L0, m=2) - w2) < 1e-9


def test_det_weight_boundary():
    vals = [det_weight_constant_curvature(L) for L in (1e-3, 1e-2, 1e-1)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[0] == pytest.approx(1e-6, rel=1e-4)
    with pytest.raises(ValueError):
        det_weight_constant_curvature(0.0)
    with pytest.raises(ValueError):
        det_weight_constant_curvature(-1.0)


# --- words ------------------------------------------------------------------

def test_word_string_roundtrip():
    w = string_to_word("aBcD")
    assert word_to_string(w) == "aBcD"
    assert inverse_word(w) == string_to_word("dCbA")


def test_cyclic_reduction():
    # a b B A c -> c ; wraparound a c A -> c
    assert cyclically_reduce(string_to_word("abBAc")) == string_to_word("c")
    assert cyclically_reduce(string_to_word("acA")) == string_to_word("c")


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 7), min_size=1, max_size=12))
def test_canonicalization_idempotent(letters):
    w = tuple(letters)
    c1 = canonical_word(w)
    assert canonical_word(c1) == c1
    c2 = canonical_word(w, oriented=False)
    assert canonical_word(c2, oriented=False) == c2


def test_conjclass_invariants():
    with pytest.raises(ValueError):
        ConjClass(word=string_to_word("aA"), primitive_root=string_to_word("aA"), m=1)
    with pytest.raises(ValueError):
        ConjClass(word=string_to_word("abab"), primitive_root=string_to_word("abab"), m=1)
    cc = ConjClass(word=string_to_word("abab"), primitive_root=string_to_word("ab"), m=2)
    assert cc.name == "abab"


# --- group identities (random words) -----------------------------------------

def _random_reduced_word(rng, n):
    w = [rng.integers(0, 8)]
    while len(w) < n:
        l = rng.integers(0, 8)
        if l != (w[-1] + 4) % 8:
            w.append(l)
    return tuple(int(l) for l in w)


def test_conjugation_invariance(group):
    rng = np.random.default_rng(0)
    for _ in range(8):
        a = group.word_element(_random_reduced_word(rng, 3))
        g = group.word_element(_random_reduced_word(rng, 4))
        conj = g @ a @ g.inverse()
        if a.is_hyperbolic():
            assert abs(length_of(conj) - length_of(a)) < 1e-12 * max(1, length_of(a))


def test_iterate_length_law(group):
    rng = np.random.default_rng(1)
    for _ in range(5):
        a = group.word_element(_random_reduced_word(rng, 2))
        if not a.is_hyperbolic():
            continue
        L = length_of(a)
        for m in range(2, 6):
            assert abs(length_of(a.power(m)) - m*L) < 1e-10 * max(1, m*L)


# --- enumeration -------------------------------------------------------------

def test_enumerate_below_systole(group):
    assert enumerate_classes(group, 3.0) == []
    assert enumerate_classes(group, 0.5) == []


def test_enumerate_systolic_cluster(group):
    recs = enumerate_classes(group, 3.1)
    assert len(recs) == 24         # oriented classes: both orientations listed
    assert all(abs(r.L - SYSTOLE) < 1e-9 for r in recs)
    assert all(r.m == 1 for r in recs)
    recs_u = enumerate_classes(group, 3.1, oriented=False)
    assert len(recs_u) == 12       # unoriented count matches the 12 systoles


def test_enumerate_dedup_contract(catalog62):
    words = [r.cls.word for r in catalog62]
    assert len(words) == len(set(words))
    # sorted by L then word
    keys = [(r.L, r.cls.word) for r in catalog62]
    assert keys == sorted(keys)


def test_enumerate_cluster_structure(catalog62):
    # frozen oracle (brute-force word enumeration + pairwise conjugator search):
    # lengths and oriented class counts up to L = 6.2
    from collections import Counter
    cnt = Counter(round(r.L, 6) for r in catalog62)
    expect = {3.057142: 24, 4.896905: 24, 5.828071: 48, 6.114284: 24}
    assert dict(cnt) == expect


def test_enumerate_iterates_marked(catalog62):
    dbl = [r for r in catalog62 if abs(r.L - 2*SYSTOLE) < 1e-8]
    assert len(dbl) == 24
    assert all(r.m == 2 for r in dbl)
    for r in dbl:
        assert r.cls.word == r.cls.primitive_root * 2
        assert abs(r.L_primitive - SYSTOLE) < 1e-9
    prim = [r for r in catalog62 if r.m == 1]
    assert all(abs(r.L - r.L_primitive) < 1e-12 for r in prim)


def test_enumerate_orientation_pairing(group):
    # every oriented class appears together with its orientation reversal;
    # pairing is geometric (conjugacy of the inverse matrix), since in a
    # surface group the reversed class can differ from the inverted word
    recs = enumerate_classes(group, 3.1)
    recs_u = enumerate_classes(group, 3.1, oriented=False)
    assert len(recs) == 2 * len(recs_u)
    mats, words, disp = group_ball(group, 2 * 3.1)
    C = mats[disp <= 2 * 3.1]
    Ci = np.linalg.inv(C)

    def conjugate(M1, M2):
        orb = np.einsum("nij,jk,nkl->nil", C, M1, Ci)
        return min(np.abs(orb - M2).max(axis=(1, 2)).min(),
                   np.abs(orb + M2).max(axis=(1, 2)).min()) < 1e-7

    for r in recs:
        Minv = np.linalg.inv(r.matrix.m.astype(float))
        partners = [s for s in recs
                    if s is not r and conjugate(Minv, s.matrix.m.astype(float))]
        assert len(partners) == 1


def test_enumerate_weights(catalog62):
    sys_recs = [r for r in catalog62 if abs(r.L - SYSTOLE) < 1e-9]
    for r in sys_recs:
        assert abs(r.weight - 0.1582886) < 1e-6
    dbl = [r for r in catalog62 if abs(r.L - 2*SYSTOLE) < 1e-8]
    for r in dbl:
        assert abs(r.weight - 0.0067895) < 1e-6


def test_enumerate_multiplicity_structure(catalog62):
    sys_L = sorted(r.L for r in catalog62 if abs(r.L - SYSTOLE) < 1e-6)
    assert max(sys_L) - min(sys_L) < 1e-10


def test_enumerate_resource_error(group):
    with pytest.raises(ResourceError):
        enumerate_classes(group, 40.0)


def test_pairwise_conjugacy_oracle(group):
    # independent check of the canonical-key dedup: brute-force conjugator
    # search on the systolic cluster
    recs = enumerate_classes(group, 3.1)
    mats, words, disp = group_ball(group, 2*3.1)
    C = mats[disp <= 2*3.1]
    Ci = np.linalg.inv(C)

    def conjugate(M1, M2):
        orb = np.einsum("nij,jk,nkl->nil", C, M1, Ci)
        return min(np.abs(orb - M2).max(axis=(1, 2)).min(),
                   np.abs(orb + M2).max(axis=(1, 2)).min()) < 1e-7

    ms = [r.matrix.m.astype(float) for r in recs]
    for i in range(len(ms)):
        for j in range(i + 1, len(ms)):
            assert not conjugate(ms[i], ms[j]), (recs[i].cls.name, recs[j].cls.name)


# --- axis seeds ---------------------------------------------------------------

def test_axis_seed_diagonal():
    m = MobiusElement(np.diag([np.exp(1.0), np.exp(-1.0)]))
    pts = axis_seed(m, 16)
    assert np.allclose(pts[:, 0], 0.0, atol=1e-12)          # vertical axis x = 0
    assert np.all(np.diff(pts[:, 1]) > 0)                    # moving upward
    assert np.allclose(pts[:, 2], np.pi/2, atol=1e-12)
    L = length_of(m)
    # centered on the nearest point to i: starts at s = -L/2
    assert pts[0, 1] == pytest.approx(np.exp(-L / 2), rel=1e-12)
    assert pts[8, 1] == pytest.approx(1.0)                   # nearest point to i
    assert pts[-1, 1] == pytest.approx(np.exp(-L/2 + L * 15/16), rel=1e-12)


def test_axis_seed_twisted_closure(group):
    for elem in [group.generators[1], group.word_element(string_to_word("ad"))]:
        n = 32
        pts = axis_seed(elem, n)
        L = length_of(elem)
        # seed starts at s0 = -L/2; deck maps point j to the point at s_j + L
        for j in (0, 5):
            zj = pts[j, 0] + 1j*pts[j, 1]
            s_j = (j - n // 2) * (L / n)
            xc, yc, _ = axis_point(elem, np.array([s_j + L]))
            assert abs(elem.apply(zj) - (xc[0] + 1j*yc[0])) < 1e-8


def test_axis_seed_unit_speed(group):
    elem = group.word_element(string_to_word("aB"))
    pts = axis_seed(elem, 512)
    L = length_of(elem)
    ds = L / 512
    # hyperbolic length of each polyline segment approximates ds
    z = pts[:, 0] + 1j*pts[:, 1]
    seg = np.abs(np.diff(z)) / ((pts[:-1, 1] + pts[1:, 1]) / 2)
    assert np.allclose(seg, ds, rtol=1e-4)


def test_axis_seed_conjugation_equivariance(group):
    # the axis of g a g^-1 is the g-image of the axis of a (as a point set)
    a = group.generators[1]
    g = group.word_element(string_to_word("bc"))
    conj = g @ a @ g.inverse()
    pts_c = axis_seed(conj, 64)

    def mobius_boundary(el, p):
        aa, bb, cc, dd = (float(v) for v in el.m.reshape(4))
        if np.isinf(p):
            return aa / cc if abs(cc) > 1e-14 else np.inf
        den = cc * p + dd
        return (aa * p + bb) / den if abs(den) > 1e-14 else np.inf

    rep_a, att_a = a.fixed_points()
    rep_i, att_i = mobius_boundary(g, rep_a), mobius_boundary(g, att_a)
    rep_c, att_c = conj.fixed_points()
    assert abs(rep_c - rep_i) < 1e-8 and abs(att_c - att_i) < 1e-8
    # sampled conj-axis points satisfy the circle equation of the image axis
    c0 = (rep_c + att_c) / 2
    R = abs(att_c - rep_c) / 2
    zc = pts_c[:, 0] + 1j*pts_c[:, 1]
    assert np.max(np.abs(np.abs(zc - c0) - R)) < 1e-8


def test_axis_seed_not_hyperbolic():
    rotation = MobiusElement(np.array([[np.cos(0.3), np.sin(0.3)],
                                       [-np.sin(0.3), np.cos(0.3)]]))
    with pytest.raises(NotHyperbolicError):
        axis_seed(rotation, 16)


def test_axis_seed_min_points(group):
    with pytest.raises(ValueError):
        axis_seed(group.generators[0], 4)


# --- serialization -------------------------------------------------------------

def test_catalog_roundtrip(group, catalog62):
    text = catalog_to_json(catalog62)
    back = catalog_from_json(text, group)
    assert len(back) == len(catalog62)
    for a, b in zip(catalog62, back):
        assert a.cls.word == b.cls.word
        assert a.L == b.L and a.weight == b.weight and a.m == b.m
    # stable field order in the JSON text
    first = text.splitlines()[2:8]
    assert [s.strip().split(":")[0] for s in first] == \
        ['"word"', '"trace"', '"L"', '"L_primitive"', '"m"', '"weight"']
