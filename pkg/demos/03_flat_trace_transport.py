"""Transport coefficient of the flat trace under deformation.

Pairing the t-derivative of the flat trace with a test function calibrated at
an isolated length (psi(l) = 0, psi'(l) = 1) isolates the delta'-coefficient

    T(l) = - sum over {(gamma, m): L = l} of  w_gamma,m * dL_gamma^m/dt.

The pairing computed from the length-variation formula is compared with a
finite-difference oracle in which the whole measure (atom locations and
monodromy weights) is rebuilt from solved orbits at t = +-dt.
"""

from flattrace.cover import SupportDisk, as_tensor_field, make_invariant_tensor
from flattrace.fields import poly_bump_field
from flattrace.fuchsian import SYSTOLE, bolza_generators, enumerate_classes
from flattrace.metric import LinearTensor, MetricFamily, half_plane_chart
from flattrace.dynamics import (
    axis_orbit, find_closed_geodesic, jacobi_monodromy, orbit_length,
)
from flattrace.trace import (
    Atom, AtomicMeasure, TestFunction, assemble_flat_trace,
    first_variation_pairing, pair, transport_coefficient,
)
from flattrace.variation import first_variation_length

group = bolza_generators()
hp = half_plane_chart()
catalog = enumerate_classes(group, 3.1)
measure = assemble_flat_trace(catalog, 3.1)

supp = SupportDisk(0.1, 1.05, 0.5)
ext = make_invariant_tensor(group,
                            poly_bump_field(supp.cx, supp.cy, supp.r, 0.35),
                            poly_bump_field(supp.cx, supp.cy, supp.r, 0.1),
                            poly_bump_field(supp.cx, supp.cy, supp.r, -0.25),
                            supp)
family = MetricFamily(hp, LinearTensor(as_tensor_field(ext)))

seeds = {r.cls.word: axis_orbit(group.word_element(r.cls.word), 1536)
         for r in catalog}
ldot = {r.cls.name: first_variation_length(family, seeds[r.cls.word])
        for r in catalog}

rep = transport_coefficient(measure, SYSTOLE, ldot)
psi = TestFunction(SYSTOLE, 0.4)
fvp = first_variation_pairing(measure, psi, ldot)
print(f"transport coefficient T(l0)      = {rep.T_value:+.10e}")
print(f"first-variation pairing <dTr,psi> = {fvp:+.10e}   (= -T)")

dt = 1e-3


def measure_at(tv):
    atoms = []
    for rec in catalog:
        orb = find_closed_geodesic(family, tv, seeds[rec.cls.word],
                                   geo_tol=3e-5, max_n=12288)
        L = orbit_length((family, tv), orb)
        mon = jacobi_monodromy((family, tv), orb)
        atoms.append(Atom(l=L, w=L / mon.det_weight,
                          class_name=rec.cls.name, m=1))
    return AtomicMeasure(atoms)


print("\nrebuilding the measure from solved orbits at t = +-dt ...")
fd = (pair(measure_at(dt), psi) - pair(measure_at(-dt), psi)) / (2 * dt)
print(f"finite-difference pairing         = {fd:+.10e}")
print(f"relative difference               = {abs(fvp - fd) / abs(fd):.2e}")
