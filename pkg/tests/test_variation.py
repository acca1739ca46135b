import numpy as np
import pytest

from flattrace.cover import (
    SupportDisk, as_tensor_field, make_invariant_tensor, make_invariant_vector,
    vector_component_fields,
)
from flattrace.fields import ExprField, poly_bump_field
from flattrace.fuchsian import bolza_generators, string_to_word
from flattrace.metric import (
    ConformalChart, ConformalExp, LinearTensor, MetricFamily, RectDomain,
    SymmetricTensorField, half_plane_chart,
)
from flattrace.dynamics import axis_orbit, fd_length_derivative, line_integral_hTT
from flattrace.variation import (
    VectorFieldOnBase, dotL_from_dotp, first_variation_length, gk_strip_residual,
    isometric_family, lie_derivative_metric, spectral_derivative,
    xu_lie_identity_residual,
)


@pytest.fixture(scope="session")
def group():
    return bolza_generators()


@pytest.fixture(scope="session")
def hp():
    return half_plane_chart()


@pytest.fixture(scope="session")
def sys_orbits(group):
    words = ("a", "b", "aB", "ad")
    return [axis_orbit(group.word_element(string_to_word(w)), 1536) for w in words]


@pytest.fixture(scope="session")
def inv_vector(group):
    supp = SupportDisk(-0.05, 1.1, 0.48)
    ext = make_invariant_vector(group,
                                poly_bump_field(supp.cx, supp.cy, supp.r, 0.35),
                                poly_bump_field(supp.cx, supp.cy, supp.r, -0.2),
                                supp, region_radius=4.5)
    v1, v2 = vector_component_fields(ext)
    return VectorFieldOnBase(v1, v2)


def metric_tensor_field(hp):
    # h = g in coordinates for the half-plane chart
    return SymmetricTensorField("1/y^2", "0*x", "1/y^2")


def test_first_variation_h_equals_g(hp, sys_orbits):
    fam = MetricFamily(hp, LinearTensor(metric_tensor_field(hp)))
    for orb in sys_orbits:
        assert np.isclose(first_variation_length(fam, orb), orb.L / 2, atol=1e-10)


def test_first_variation_lie_derivative_vanishes(hp, sys_orbits, inv_vector):
    fam = isometric_family(hp, inv_vector)
    scale = 0.35
    for orb in sys_orbits:
        val = first_variation_length(fam, orb)
        assert abs(val) < 1e-6 * scale * orb.L


def test_first_variation_matches_fd(group, hp):
    supp = SupportDisk(0.12, 1.0, 0.5)
    ext = make_invariant_tensor(group,
                                poly_bump_field(supp.cx, supp.cy, supp.r, 0.3),
                                poly_bump_field(supp.cx, supp.cy, supp.r, 0.1),
                                poly_bump_field(supp.cx, supp.cy, supp.r, -0.2),
                                supp, region_radius=4.5)
    fam = MetricFamily(hp, LinearTensor(as_tensor_field(ext)))
    seed = axis_orbit(group.generators[0], 1536)
    formula = first_variation_length(fam, seed)
    fd, _ = fd_length_derivative(fam, seed, dt=1e-3, richardson=1)
    assert abs(formula - fd) / abs(fd) < 1e-5


def test_dotL_from_dotp_conformal(hp, sys_orbits):
    u = "exp(0 - (x^2 + (y - 1.2)^2))"
    fam = MetricFamily(hp, ConformalExp(u))
    uf = ExprField(u)
    from flattrace.dynamics import integrate_scalar_along
    for orb in sys_orbits[:2]:
        val = dotL_from_dotp(fam, orb)
        expect = integrate_scalar_along(orb, lambda x, y: uf.ev(x, y))
        assert np.isclose(val, expect, atol=1e-12 * max(1, abs(expect)))


def test_identity_chain(hp, sys_orbits):
    # first_variation_length and dotL_from_dotp are the same algebraic object
    h = SymmetricTensorField("sin(x)/y", "exp(0-x^2)", "cos(y)/y^2")
    fam = MetricFamily(hp, LinearTensor(h))
    for orb in sys_orbits:
        a = first_variation_length(fam, orb)
        b = dotL_from_dotp(fam, orb)
        assert abs(a - b) < 1e-10 * max(1.0, abs(a))


def test_first_variation_linearity(hp, sys_orbits):
    h1 = SymmetricTensorField("sin(x)/y", "0*x", "cos(y)")
    h2 = SymmetricTensorField("1/y^2", "x*y/100", "0*x")
    rng = np.random.default_rng(11)
    orb = sys_orbits[2]
    for _ in range(5):
        a, b = rng.normal(), rng.normal()
        mix = SymmetricTensorField(
            a * h1.h11 + b * h2.h11, a * h1.h12 + b * h2.h12,
            a * h1.h22 + b * h2.h22)
        v_mix = first_variation_length(MetricFamily(hp := hp, law=LinearTensor(mix)), orb)
        v_sep = (a * first_variation_length(MetricFamily(hp, LinearTensor(h1)), orb)
                 + b * first_variation_length(MetricFamily(hp, LinearTensor(h2)), orb))
        assert abs(v_mix - v_sep) < 1e-12 * max(1.0, abs(v_mix))


def test_first_variation_flip_invariance(hp, sys_orbits):
    h = SymmetricTensorField("sin(x)/y", "exp(0-x^2)/3", "cos(y)/y^2")
    fam = MetricFamily(hp, LinearTensor(h))
    for orb in sys_orbits[:2]:
        fwd = first_variation_length(fam, orb)
        rev = first_variation_length(fam, orb.reversed())
        assert abs(fwd - rev) < 1e-9 * max(1.0, abs(fwd))


# --- Lie derivative -------------------------------------------------------------

def test_lie_derivative_zero_field(hp):
    lie = lie_derivative_metric(hp, VectorFieldOnBase("0*x", "0*x"))
    assert abs(lie.h11.ev(0.3, 1.2)) < 1e-15
    assert abs(lie.h12.ev(0.3, 1.2)) < 1e-15


def test_lie_derivative_euler_field_flat():
    flat = ConformalChart("0*x", RectDomain(-2, 2, -2, 2))
    lie = lie_derivative_metric(flat, VectorFieldOnBase("x", "y"))
    a, b, c = lie.components(0.4, -0.7)
    assert np.isclose(a, 2.0) and np.isclose(b, 0.0) and np.isclose(c, 2.0)


def test_lie_derivative_fd_oracle(hp):
    # compare against the finite difference of the pullback metric along the
    # flow of v: d/dt (psi_t^* g) at 0 = L_v g
    v = VectorFieldOnBase("sin(x)*y/5", "cos(x*y)/4")
    lie = lie_derivative_metric(hp, v)
    x0, y0 = 0.3, 1.4
    eps = 1e-5

    def flow(x, y, t, steps=64):
        for _ in range(steps):
            vx, vy = v.values(x, y)
            x, y = x + vx * t / steps, y + vy * t / steps
        return x, y

    def pullback(t):
        # (psi_t^* g)_ij = J^T g(psi(x)) J via finite-difference Jacobian
        h = 1e-6
        px, py = flow(x0, y0, t)
        jxx = (flow(x0 + h, y0, t)[0] - flow(x0 - h, y0, t)[0]) / (2 * h)
        jyx = (flow(x0 + h, y0, t)[1] - flow(x0 - h, y0, t)[1]) / (2 * h)
        jxy = (flow(x0, y0 + h, t)[0] - flow(x0, y0 - h, t)[0]) / (2 * h)
        jyy = (flow(x0, y0 + h, t)[1] - flow(x0, y0 - h, t)[1]) / (2 * h)
        J = np.array([[jxx, jxy], [jyx, jyy]])
        G = np.diag([1.0 / py**2, 1.0 / py**2])
        return J.T @ G @ J

    fd = (pullback(eps) - pullback(-eps)) / (2 * eps)
    a, b, c = lie.components(x0, y0)
    assert np.allclose(fd, [[a, b], [b, c]], atol=2e-5)


def test_coboundary_annihilation(hp, sys_orbits, inv_vector):
    lie = lie_derivative_metric(hp, inv_vector)
    scale = 0.35
    for orb in sys_orbits:
        val = line_integral_hTT(hp, lie, orb)
        assert abs(val) < 1e-6 * scale * orb.L


# --- GK strip and Xu identities --------------------------------------------------

def test_gk_strip_zero_field(hp, sys_orbits):
    fam = isometric_family(hp, VectorFieldOnBase("0*x", "0*y"))
    assert gk_strip_residual(fam, sys_orbits[0]) == 0.0


def test_gk_strip_bump(hp, sys_orbits, inv_vector):
    fam = isometric_family(hp, inv_vector)
    for orb in sys_orbits:
        assert abs(gk_strip_residual(fam, orb)) < 1e-6 * 0.35 * orb.L


def test_spectral_derivative():
    n = 256
    s = np.arange(n) * (2 * np.pi / n)
    f = np.sin(3 * s) + 0.5 * np.cos(5 * s)
    df = spectral_derivative(f, 2 * np.pi)
    assert np.allclose(df, 3 * np.cos(3 * s) - 2.5 * np.sin(5 * s), atol=1e-11)


def test_xu_identity_zero_field(hp, sys_orbits):
    assert xu_lie_identity_residual(hp, VectorFieldOnBase("0*x", "0*x"),
                                    sys_orbits[0]) == 0.0


def test_xu_identity_generic(hp, sys_orbits, inv_vector):
    for orb in sys_orbits:
        res = xu_lie_identity_residual(hp, inv_vector, orb)
        assert res < 1e-6


def test_xu_identity_disjoint_support(group, hp, sys_orbits):
    # bump far from the orbit: both sides identically zero along it
    supp = SupportDisk(8.0, 0.4, 0.2)
    ext = make_invariant_vector(group,
                                poly_bump_field(supp.cx, supp.cy, supp.r, 0.5),
                                poly_bump_field(supp.cx, supp.cy, supp.r, 0.5),
                                supp, region_radius=1.0)
    v1, v2 = vector_component_fields(ext)
    v = VectorFieldOnBase(v1, v2)
    orb = sys_orbits[0]
    w1, w2 = v.values(orb.pts[:, 0], orb.pts[:, 1])
    if np.abs(w1).max() == 0.0 and np.abs(w2).max() == 0.0:
        assert xu_lie_identity_residual(hp, v, orb) < 1e-14
