"""The flat trace as an atomic measure, pairings, and the transport coefficient.

For each conjugacy class (primitive root gamma, iterate m) the trace carries
one Dirac atom at the iterate length with weight L# / |det(I - P^m)|.  Atoms
within the cluster tolerance group into clusters (the length spectrum has
multiplicities); the first variation of the trace paired against a calibrated
test function isolates the delta'-coefficient

    T(l) = - sum over the cluster of  weight * dL/dt,

and constancy of the trace forces the linear relation

    sum over the cluster of  weight * int h(T,T) ds = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Sequence

import numpy as np

__all__ = [
    "Atom", "AtomicMeasure", "TestFunction", "TransportReport",
    "ClusterError", "assemble_flat_trace", "pair", "transport_coefficient",
    "first_variation_pairing", "delta_prime_constraint_residual",
    "measure_to_json", "measure_from_json",
]


class ClusterError(ValueError):
    """Cluster isolation or calibration contract violated."""


@dataclass(frozen=True)
class Atom:
    l: float
    w: float
    class_name: str
    m: int


@dataclass
class AtomicMeasure:
    """Finite list of weighted Dirac atoms on (0, infinity), sorted by
    location, with a clustering tolerance for multiplicity handling."""

    atoms: List[Atom]
    cluster_tol: float = 1e-7

    def __post_init__(self):
        self.atoms = sorted(self.atoms, key=lambda a: (a.l, a.class_name, a.m))
        for a in self.atoms:
            if a.l <= 0 or a.w <= 0:
                raise ValueError(f"atom ({a.l}, {a.w}) violates positivity")

    def __len__(self):
        return len(self.atoms)

    def clusters(self) -> List[List[Atom]]:
        out: List[List[Atom]] = []
        for a in self.atoms:
            if out and a.l - out[-1][-1].l <= self.cluster_tol:
                out[-1].append(a)
            else:
                out.append([a])
        return out

    def cluster_at(self, l0: float, require_isolated: bool = True) -> List[Atom]:
        """The cluster containing l0; with require_isolated, the nearest
        foreign atom must be farther than 10 * cluster_tol."""
        cls = self.clusters()
        hit = None
        for i, c in enumerate(cls):
            if min(abs(a.l - l0) for a in c) <= self.cluster_tol:
                hit = i
                break
        if hit is None:
            raise ClusterError(f"no cluster at {l0}")
        if require_isolated:
            gap = np.inf
            if hit > 0:
                gap = min(gap, cls[hit][0].l - cls[hit - 1][-1].l)
            if hit + 1 < len(cls):
                gap = min(gap, cls[hit + 1][0].l - cls[hit][-1].l)
            if gap <= 10 * self.cluster_tol:
                raise ClusterError(
                    f"cluster at {l0} not isolated: nearest foreign atom {gap} away")
        return cls[hit]


def assemble_flat_trace(catalog, L_max: float,
                        cluster_tol: float = 1e-7) -> AtomicMeasure:
    """One atom per (class, m) with location L and weight
    L_primitive / |det(I - P^m)|, taken from the catalog records."""
    atoms = []
    seen = set()
    for rec in catalog:
        if rec.L > L_max + 1e-12:
            continue
        if rec.weight <= 0:
            raise ValueError(f"record {rec.cls.name} lacks a monodromy weight")
        key = rec.cls.word
        if key in seen:
            continue
        seen.add(key)
        atoms.append(Atom(l=rec.L, w=rec.weight, class_name=rec.cls.name, m=rec.m))
    return AtomicMeasure(atoms, cluster_tol=cluster_tol)


@dataclass
class TestFunction:
    """Smooth compactly supported test function psi about a center l0.

    calibrated=True gives psi(tau) = (tau - l0) * B((tau - l0)/r) with B the
    standard bump exp(1 - 1/(1 - s^2)): then psi(l0) = 0 and psi'(l0) = 1
    exactly.  calibrated=False gives the plain bump B((tau - l0)/r)."""

    center: float
    halfwidth: float
    calibrated: bool = True

    def __post_init__(self):
        if self.center - self.halfwidth <= 0:
            raise ValueError("support must stay inside (0, infinity)")

    def _bump(self, s):
        s = np.asarray(s, dtype=float)
        inside = np.abs(s) < 1.0 - 1e-12
        sc = np.where(inside, s, 0.0)
        val = np.exp(1.0 - 1.0 / (1.0 - sc * sc))
        return np.where(inside, val, 0.0)

    def _bump_deriv(self, s):
        s = np.asarray(s, dtype=float)
        inside = np.abs(s) < 1.0 - 1e-12
        sc = np.where(inside, s, 0.0)
        t = 1.0 - sc * sc
        val = np.exp(1.0 - 1.0 / t) * (-2.0 * sc / t ** 2)
        return np.where(inside, val, 0.0)

    def __call__(self, tau):
        s = (np.asarray(tau, dtype=float) - self.center) / self.halfwidth
        if self.calibrated:
            return (np.asarray(tau) - self.center) * self._bump(s)
        return self._bump(s)

    def deriv(self, tau):
        s = (np.asarray(tau, dtype=float) - self.center) / self.halfwidth
        if self.calibrated:
            return self._bump(s) + s * self._bump_deriv(s)
        return self._bump_deriv(s) / self.halfwidth

    def supports(self, tau) -> np.ndarray:
        return np.abs(np.asarray(tau) - self.center) < self.halfwidth


def isolation_halfwidth(measure: AtomicMeasure, l0: float,
                        cap: float = 0.4) -> float:
    """A test-function halfwidth that contains the cluster at l0 and keeps
    every foreign atom strictly outside the support."""
    cluster = measure.cluster_at(l0, require_isolated=True)
    span = max(abs(a.l - l0) for a in cluster)
    ids = {id(a) for a in cluster}
    foreign = [abs(a.l - l0) for a in measure.atoms if id(a) not in ids]
    if not foreign:
        return min(cap, l0 / 2)
    nearest = min(foreign)
    if nearest <= span:
        raise ClusterError(f"cluster at {l0} is not isolated")
    return min(cap, 0.5 * (span + nearest), l0 / 2)


def pair(measure: AtomicMeasure, psi: TestFunction) -> float:
    """<measure, psi> = sum of w * psi(l); atoms outside supp psi contribute
    exactly zero and are skipped."""
    total = 0.0
    for a in measure.atoms:
        if psi.supports(a.l):
            total += a.w * float(psi(a.l))
    return total


@dataclass
class TransportReport:
    ell: float
    T_value: float
    contributors: List[Dict[str, float]] = dc_field(default_factory=list)


def transport_coefficient(measure: AtomicMeasure, l0: float,
                          Ldot: Dict[str, float]) -> TransportReport:
    """T(l) = - sum over the isolated cluster at l of weight * dL/dt, with the
    per-class length variations supplied by name."""
    cluster = measure.cluster_at(l0, require_isolated=True)
    contributors = []
    total = 0.0
    for a in cluster:
        ld = Ldot[a.class_name]
        total -= a.w * ld
        contributors.append({
            "class": a.class_name, "m": a.m, "L_primitive": a.l / a.m,
            "det_weight": (a.l / a.m) / a.w, "Ldot": ld, "weight": a.w,
        })
    return TransportReport(ell=float(np.mean([a.l for a in cluster])),
                           T_value=total, contributors=contributors)


def first_variation_pairing(measure: AtomicMeasure, psi: TestFunction,
                            Ldot: Dict[str, float]) -> float:
    """<d/dt Tr V_t, psi> for a calibrated psi: sum of w * dL/dt over the
    cluster at the calibration center; equals -T(l)."""
    if not psi.calibrated:
        raise ClusterError("test function must be calibrated: psi(l)=0, psi'(l)=1")
    if abs(float(psi(psi.center))) > 1e-12 or abs(float(psi.deriv(psi.center)) - 1.0) > 1e-12:
        raise ClusterError("calibration violated")
    cluster = measure.cluster_at(psi.center, require_isolated=True)
    for a in cluster:
        if not psi.supports(a.l):
            raise ClusterError("cluster leaves the support of psi")
    ids = {id(a) for a in cluster}
    for a in measure.atoms:
        if id(a) not in ids and psi.supports(a.l):
            raise ClusterError(
                f"foreign atom at {a.l} inside supp psi: shrink the halfwidth "
                f"below the spectral gap")
    return float(sum(a.w * Ldot[a.class_name] for a in cluster))


def delta_prime_constraint_residual(measure: AtomicMeasure, l0: float,
                                    h_integrals: Dict[str, float]) -> float:
    """sum over the cluster at l0 of weight * int_{gamma^m} h(T,T) ds; zero for
    deformations with constant flat trace."""
    cluster = measure.cluster_at(l0, require_isolated=True)
    return float(sum(a.w * h_integrals[a.class_name] for a in cluster))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _fmt(x: float) -> float:
    return float(f"{x:.17g}")


def pairing_report_csv(rows: Sequence[Dict]) -> str:
    """CSV report of pairing results: one row per cluster with the test
    function data, the formula pairing, and (when present) the FD oracle."""
    cols = ["cluster_l", "size", "halfwidth", "pairing_formula", "pairing_fd",
            "rel_err", "T"]
    out = [",".join(cols)]
    for row in rows:
        cells = []
        for c in cols:
            v = row.get(c, "")
            cells.append(f"{v:.17g}" if isinstance(v, float) else str(v))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def measure_to_json(measure: AtomicMeasure) -> str:
    return json.dumps({
        "atoms": [{"l": _fmt(a.l), "w": _fmt(a.w), "class": a.class_name,
                   "m": a.m} for a in measure.atoms],
        "cluster_tol": measure.cluster_tol,
    }, indent=1)


def measure_from_json(text: str) -> AtomicMeasure:
    data = json.loads(text)
    atoms = [Atom(l=row["l"], w=row["w"], class_name=row["class"], m=row["m"])
             for row in data["atoms"]]
    return AtomicMeasure(atoms, cluster_tol=data["cluster_tol"])
