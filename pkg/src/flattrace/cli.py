"""Experiment orchestration: catalog | trace | deform | verify.

All numeric output is printed with 17 significant digits and reports are
JSON-lines, so identical configurations and seeds produce byte-identical
files (modulo the timestamp header field, which comparisons must exclude).
Exit codes: 0 success, 1 suite failure, 2 config error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .fields import ParseError, bump_field, poly_bump_field
from .metric import (
    ConformalChart, ConformalExp, DiskDomain, HalfPlaneDomain, LinearTensor,
    MetricFamily, RectDomain, SymmetricTensorField, half_plane_chart,
)
from .fuchsian import (
    ResourceError, bolza_generators, catalog_from_json, catalog_to_json,
    det_weight_constant_curvature, enumerate_classes,
)
from .cover import (
    SupportDisk, as_tensor_field, make_invariant_scalar, make_invariant_tensor,
    make_invariant_vector, vector_component_fields, JetField,
)
from .dynamics import (
    ConvergenceError, axis_orbit, fd_length_derivative, find_closed_geodesic,
    jacobi_monodromy, line_integral_hTT, orbit_length,
)
from .trace import (
    AtomicMeasure, TestFunction, assemble_flat_trace, first_variation_pairing,
    measure_to_json, pair, transport_coefficient,
)
from .variation import (
    VectorFieldOnBase, first_variation_length, gk_strip_residual,
    isometric_family, lie_derivative_metric, xu_lie_identity_residual,
)
from .so2 import (
    FrameOperatorSet, SphereBundleFunction, coercivity_check,
    commutator_residuals, energy_identity_residual, mode_equation_check,
)

__all__ = ["main", "ExperimentConfig", "load_config", "ConfigError", "DataError"]


class ConfigError(ValueError):
    pass


class DataError(RuntimeError):
    pass


DEFAULT_CONFIG = {
    "chart": {"phi": "0 - log(y)", "domain": "halfplane"},
    "family": {
        "law": "linear_bump",
        "center": [0.1, 1.05],
        "radius": 0.5,
        "amplitudes": [0.4, 0.15, -0.3],
        "profile": "poly",
    },
    "lmax": 6.2,
    "dt": 1e-3,
    "seed": 0,
    "tolerances": {
        "commutator": 1e-6, "energy": 1e-6, "coercivity_slack": -1e-8,
        "mode": 1e-9, "stray": 1e-12, "gk": 1e-6, "coboundary": 1e-6,
        "monodromy": 1e-8, "transport_isometric": 1e-6, "pairing_fd": 1e-4,
    },
    "test_function": {"center": None, "halfwidth": 0.4},
    "fd_pairing_clusters": "all",
    "out": ".",
    "debug": {"flip_xperp": False},
}


@dataclass
class ExperimentConfig:
    raw: Dict

    def __post_init__(self):
        tol = self.raw.get("tolerances", {})
        if any(v <= 0 for k, v in tol.items() if k != "coercivity_slack"):
            raise ConfigError("tolerances must be positive")
        if self.raw.get("lmax", 1.0) <= 0:
            raise ConfigError("lmax must be positive")

    @property
    def lmax(self) -> float:
        return float(self.raw["lmax"])

    @property
    def dt(self) -> float:
        return float(self.raw["dt"])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def tolerances(self) -> Dict[str, float]:
        return self.raw["tolerances"]

    def validate_expressions(self):
        """Parse every expression string in the config (cheap, no group build)."""
        from .fields import parse_expr
        try:
            parse_expr(self.raw["chart"]["phi"])
            fam = self.raw["family"]
            for key in ("u", "h11", "h12", "h22"):
                if key in fam:
                    parse_expr(fam[key])
        except ParseError as exc:
            raise ConfigError(f"bad expression: {exc}")

    def chart(self) -> ConformalChart:
        spec = self.raw["chart"]
        dom = spec.get("domain", "halfplane")
        if dom == "halfplane":
            domain = HalfPlaneDomain()
        elif dom == "disk":
            domain = DiskDomain()
        elif isinstance(dom, list) and len(dom) == 4:
            domain = RectDomain(*dom)
        else:
            raise ConfigError(f"unknown domain {dom!r}")
        try:
            chart = ConformalChart(spec["phi"], domain, negatively_curved=True)
            chart.validate()
        except ParseError as exc:
            raise ConfigError(f"bad phi expression: {exc}")
        except ValueError as exc:
            raise ConfigError(str(exc))
        return chart

    def family(self, group=None) -> MetricFamily:
        chart = self.chart()
        spec = self.raw["family"]
        law = spec.get("law")
        bump = poly_bump_field if spec.get("profile", "poly") == "poly" else bump_field
        try:
            if law == "conformal_exp":
                return MetricFamily(chart, ConformalExp(spec["u"]))
            if law == "linear":
                h = SymmetricTensorField(spec["h11"], spec["h12"], spec["h22"])
                return MetricFamily(chart, LinearTensor(h))
            if law in ("linear_bump", "conformal_bump", "isometric_bump"):
                group = group or bolza_generators()
                cx, cy = spec["center"]
                r = spec["radius"]
                supp = SupportDisk(cx, cy, r)
                if law == "conformal_bump":
                    ext = make_invariant_scalar(group, bump(cx, cy, r, spec["amplitude"]),
                                                supp)
                    return MetricFamily(chart, ConformalExp(JetField(ext, "f")))
                if law == "isometric_bump":
                    a1, a2 = spec["amplitudes"]
                    ext = make_invariant_vector(group, bump(cx, cy, r, a1),
                                                bump(cx, cy, r, a2), supp)
                    v1, v2 = vector_component_fields(ext)
                    return isometric_family(chart, VectorFieldOnBase(v1, v2))
                a11, a12, a22 = spec["amplitudes"]
                ext = make_invariant_tensor(group, bump(cx, cy, r, a11),
                                            bump(cx, cy, r, a12),
                                            bump(cx, cy, r, a22), supp)
                return MetricFamily(chart, LinearTensor(as_tensor_field(ext)))
        except ParseError as exc:
            raise ConfigError(f"bad family expression: {exc}")
        except KeyError as exc:
            raise ConfigError(f"family spec missing field {exc}")
        raise ConfigError(f"unknown family law {law!r}")


def load_config(path: Optional[str], overrides: Dict) -> ExperimentConfig:
    raw = json.loads(json.dumps(DEFAULT_CONFIG))
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        _deep_update(raw, user)
    for key, val in overrides.items():
        if val is not None:
            raw[key] = val
    return ExperimentConfig(raw)


def _deep_update(base: Dict, extra: Dict):
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v


# ---------------------------------------------------------------------------
# Deterministic JSON with 17 significant digits
# ---------------------------------------------------------------------------

def _render(obj) -> str:
    if isinstance(obj, float):
        return f"{obj:.17g}"
    if isinstance(obj, (np.floating,)):
        return f"{float(obj):.17g}"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        inner = ", ".join(f"{json.dumps(str(k))}: {_render(v)}"
                          for k, v in sorted(obj.items()))
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in obj) + "]"
    raise TypeError(f"cannot render {type(obj)}")


def write_jsonl(rows: List[Dict], path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(_render(row) + "\n")


def n_threads(arg: Optional[int]) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parallel_map(fn, items, threads: int):
    """Order-preserving parallel map with a deterministic merge."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_catalog(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    group = bolza_generators()
    try:
        records = enumerate_classes(group, cfg.lmax)
    except ResourceError as exc:
        raise DataError(str(exc))
    (out / "catalog.json").parent.mkdir(parents=True, exist_ok=True)
    (out / "catalog.json").write_text(catalog_to_json(records))
    print(f"catalog: {len(records)} classes with L <= {cfg.lmax:.17g}")
    return 0


def _load_catalog(cfg: ExperimentConfig, out: Path):
    group = bolza_generators()
    path = out / "catalog.json"
    if not path.exists():
        records = enumerate_classes(group, cfg.lmax)
    else:
        try:
            records = catalog_from_json(path.read_text(), group)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise DataError(f"catalog unreadable or inconsistent: {exc}")
    if any(r.weight <= 0 for r in records):
        raise DataError("catalog incomplete: records lack monodromy weights")
    records = [r for r in records if r.L <= cfg.lmax + 1e-12]
    if not records:
        return group, records
    cover = max(r.L for r in records)
    if cfg.lmax > cover + 3.06:
        raise DataError(f"catalog only covers L <= {cover:.6g} < lmax {cfg.lmax:.6g}")
    return group, records


def cmd_trace(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    group, records = _load_catalog(cfg, out)
    n_in = len(records)
    measure = assemble_flat_trace(records, cfg.lmax)
    if len(measure) < n_in:
        print(f"warning: {n_in - len(measure)} duplicate catalog rows collapsed")
    (out / "measure.json").write_text(measure_to_json(measure))
    print(f"measure: {len(measure)} atoms in {len(measure.clusters())} clusters")
    return 0


def _primitive_orbits(records, threads):
    prim = sorted({r.cls.primitive_root for r in records})
    group = bolza_generators()

    def build(word):
        return word, axis_orbit(group.word_element(word), 1536)

    return dict(parallel_map(build, prim, threads))


def cmd_deform(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    group, records = _load_catalog(cfg, out)
    family = cfg.family(group)
    chart = family.base
    measure = assemble_flat_trace(records, cfg.lmax)
    dt = cfg.dt
    roots = _primitive_orbits(records, threads)

    # per-class length variations: formula on the exact t=0 orbit; finite
    # difference via the orbit solver (iterates scale the primitive values)
    def per_root(word):
        seed = roots[word]
        formula = first_variation_length(family, seed)
        try:
            fd, err = fd_length_derivative(family, seed, dt=dt, richardson=1,
                                           geo_tol=3e-5, max_n=12288)
            fail = None
        except ConvergenceError as exc:
            fd, err, fail = np.nan, np.nan, str(exc)
        return word, {"formula": formula, "fd": fd, "fd_err": err, "error": fail}

    root_rows = dict(parallel_map(per_root, sorted(roots), threads))

    ldot_formula = {}
    ldot_fd = {}
    for rec in records:
        base = root_rows[rec.cls.primitive_root]
        ldot_formula[rec.cls.name] = rec.m * base["formula"]
        ldot_fd[rec.cls.name] = rec.m * base["fd"]

    # finite-difference pairing oracle: rebuild the measure at +-dt
    which = cfg.raw.get("fd_pairing_clusters", "all")
    clusters = measure.clusters()
    if which == "systolic":
        clusters = clusters[:1]
    elif which == "none":
        clusters = []

    fd_measures = {}
    if clusters:
        def measure_at(tv):
            atoms = []
            orbs = {}
            for word in sorted(roots):
                try:
                    orbs[word] = find_closed_geodesic(family, tv, roots[word],
                                                      geo_tol=3e-5, max_n=12288)
                except ConvergenceError:
                    orbs[word] = None
            for rec in records:
                orb = orbs[rec.cls.primitive_root]
                if orb is None:
                    continue
                Lp = orbit_length((family, tv), orb)
                mon = jacobi_monodromy((family, tv), orb).iterate(rec.m)
                from .trace import Atom
                atoms.append(Atom(l=rec.m * Lp, w=Lp / mon.det_weight,
                                  class_name=rec.cls.name, m=rec.m))
            return AtomicMeasure(atoms, cluster_tol=measure.cluster_tol)

        fd_measures[+1] = measure_at(+dt)
        fd_measures[-1] = measure_at(-dt)

    # per-orbit report rows; for Lie-derivative (isometric) families the
    # h-period integral 2 * dL/dt doubles as the coboundary residual
    is_iso = cfg.raw["family"].get("law") == "isometric_bump"
    orbit_rows = []
    for rec in records:
        f = ldot_formula[rec.cls.name]
        fd = ldot_fd[rec.cls.name]
        rel = (abs(f - fd) / abs(fd)) if np.isfinite(fd) and abs(fd) > 1e-12 \
            else (abs(f - fd) if np.isfinite(fd) else None)
        orbit_rows.append({
            "class": rec.cls.name, "L": rec.L, "dL_formula": f, "dL_fd": fd,
            "rel_err": rel,
            "coboundary_residual": 2.0 * f if is_iso else None,
        })
    write_jsonl(orbit_rows, out / "orbits.jsonl")

    rows = []
    ok = True
    for cluster in measure.clusters():
        l0 = cluster[0].l
        rep = transport_coefficient(measure, l0, ldot_formula)
        from .trace import isolation_halfwidth
        r_psi = min(float(cfg.raw["test_function"]["halfwidth"]),
                    isolation_halfwidth(measure, l0))
        psi = TestFunction(l0, r_psi)
        fvp = first_variation_pairing(measure, psi, ldot_formula)
        row = {
            "cluster_l": l0,
            "size": len(cluster),
            "T": rep.T_value,
            "pairing_formula": fvp,
            "dL_formula": [ldot_formula[a.class_name] for a in cluster],
            "dL_fd": [ldot_fd[a.class_name] for a in cluster],
        }
        rel = [abs(ldot_formula[a.class_name] - ldot_fd[a.class_name])
               / max(1e-30, abs(ldot_fd[a.class_name])) for a in cluster
               if np.isfinite(ldot_fd[a.class_name])
               and abs(ldot_fd[a.class_name]) > 1e-8]
        row["dL_rel_err_max"] = max(rel) if rel else 0.0
        if cluster in clusters or any(c[0].l == l0 for c in clusters):
            d_pair = (pair(fd_measures[+1], psi) - pair(fd_measures[-1], psi)) / (2 * dt)
            row["pairing_fd"] = d_pair
            denom = max(abs(d_pair), 1e-12)
            row["pairing_rel_err"] = abs(fvp - d_pair) / denom
        # constancy flag: an isometric family has T(l) = 0 at every cluster
        tolT = cfg.tolerances["transport_isometric"]
        row["flag"] = "PASS-constancy" if abs(rep.T_value) < tolT else "FAIL-constancy"
        row["halfwidth"] = r_psi
        rows.append(row)
        if not np.isfinite(row["dL_rel_err_max"]):
            ok = False
    write_jsonl(rows, out / "deform.jsonl")
    from .trace import pairing_report_csv
    csv_rows = [{**r, "rel_err": r.get("pairing_rel_err", "")} for r in rows]
    (out / "deform.csv").write_text(pairing_report_csv(csv_rows))
    print(f"deform: {len(rows)} clusters -> {out / 'deform.jsonl'}")
    return 0 if ok else 3


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------

def _suite_commutators(cfg, rng, rows):
    tol = cfg.tolerances["commutator"]
    charts = {
        "halfplane": half_plane_chart(),
        "perturbed": ConformalChart(
            "0 - log(y) + 0.04*sin(x)*exp(0-(y-1.4)^2)", HalfPlaneDomain(),
            negatively_curved=True),
    }
    flip = bool(cfg.raw.get("debug", {}).get("flip_xperp"))
    ok = True
    for name, chart in charts.items():
        modes = {}
        for m in range(-4, 5):
            cx = float(rng.uniform(-0.4, 0.4))
            cy = float(rng.uniform(0.9, 1.6))
            modes[m] = bump_field(cx, cy, 0.45, float(rng.normal(scale=0.5)))
        f = SphereBundleFunction(modes, M_max=4)
        ops = FrameOperatorSet(chart, flip_xperp_sign=flip)
        r1, r2 = commutator_residuals(ops, f, chart.sample_grid(17))
        passed = r1 < tol and r2 < tol
        ok &= passed
        rows.append({"suite": "commutator", "test": name, "r1": r1, "r2": r2,
                     "tol": tol, "pass": passed})
    return ok


def _suite_energy(cfg, rng, rows):
    tol = cfg.tolerances["energy"]
    hp = half_plane_chart()
    rect = (-0.55, 0.85, 0.6, 1.8)
    a = bump_field(0.15, 1.2, 0.5, 0.8)
    ok = True
    for m in (1, 2, 3):
        resid, lhs, rhs = energy_identity_residual(hp, a, m, rect)
        passed = resid / max(1e-30, abs(rhs)) < tol
        ok &= passed
        rows.append({"suite": "energy", "test": f"m={m}", "residual": resid,
                     "lhs": lhs, "rhs": rhs, "tol": tol, "pass": passed})
    return ok


def _suite_coercivity(cfg, rng, rows):
    hp = half_plane_chart()
    rect = (-0.55, 0.85, 0.6, 1.8)
    a = bump_field(0.15, 1.2, 0.5, 0.8)
    slack_tol = cfg.tolerances["coercivity_slack"]
    ok = True
    for m in (1, 2, 3):
        holds, slack, kappa0 = coercivity_check(hp, a, m, rect)
        passed = holds and slack >= slack_tol
        ok &= passed
        rows.append({"suite": "coercivity", "test": f"m={m}", "slack": slack,
                     "kappa0": kappa0, "pass": passed})
    return ok


def _suite_mode_equation(cfg, rng, rows):
    hp = half_plane_chart()
    tol = cfg.tolerances["mode"]
    stray_tol = cfg.tolerances["stray"]
    ok = True
    for k in range(2):
        v = VectorFieldOnBase(
            bump_field(float(rng.uniform(-0.2, 0.3)), float(rng.uniform(1.0, 1.3)),
                       0.5, float(rng.normal(scale=0.4))),
            bump_field(float(rng.uniform(-0.2, 0.3)), float(rng.uniform(1.0, 1.3)),
                       0.5, float(rng.normal(scale=0.4))))
        res = mode_equation_check(hp, v, hp.sample_grid(17))
        passed = (res["stray_modes"] < stray_tol and res["f2"] < tol
                  and res["fm2"] < tol and res["f0"] < tol)
        ok &= passed
        rows.append({"suite": "mode_equation", "test": f"bump{k}", "pass": passed,
                     **res})
    return ok


def _gk_setup(rng, group):
    hp = half_plane_chart()
    supp = SupportDisk(float(rng.uniform(-0.1, 0.2)), float(rng.uniform(1.0, 1.2)),
                       0.45)
    amp = 0.3
    ext = make_invariant_vector(group,
                                poly_bump_field(supp.cx, supp.cy, supp.r, amp),
                                poly_bump_field(supp.cx, supp.cy, supp.r,
                                                -0.6 * amp), supp)
    v1, v2 = vector_component_fields(ext)
    return hp, VectorFieldOnBase(v1, v2), amp


def _suite_gk_strip(cfg, rng, rows, group, orbits):
    hp, v, amp = _gk_setup(rng, group)
    fam = isometric_family(hp, v)
    tol = cfg.tolerances["gk"]
    ok = True
    for word, orb in orbits.items():
        res = gk_strip_residual(fam, orb)
        passed = abs(res) < tol * amp * orb.L
        ok &= passed
        rows.append({"suite": "gk_strip", "test": "".join("abcdABCD"[l] for l in word),
                     "residual": res, "pass": passed})
    return ok


def _suite_coboundary(cfg, rng, rows, group, orbits):
    hp, v, amp = _gk_setup(rng, group)
    lie = lie_derivative_metric(hp, v)
    tol = cfg.tolerances["coboundary"]
    ok = True
    for word, orb in orbits.items():
        val = line_integral_hTT(hp, lie, orb)
        xu = xu_lie_identity_residual(hp, v, orb)
        passed = abs(val) < tol * amp * orb.L and xu < tol
        ok &= passed
        rows.append({"suite": "coboundary",
                     "test": "".join("abcdABCD"[l] for l in word),
                     "period_integral": val, "xu_residual": xu, "pass": passed})
    return ok


def _suite_monodromy(cfg, rng, rows, group, records, threads):
    hp = half_plane_chart()
    tol = cfg.tolerances["monodromy"]
    prim = sorted({r.cls.primitive_root for r in records})

    def check(word):
        orb = axis_orbit(group.word_element(word), 1536)
        mon = jacobi_monodromy(hp, orb)
        expect = det_weight_constant_curvature(orb.L)
        rel = abs(mon.det_weight - expect) / expect
        det_err = abs(float(np.linalg.det(mon.p)) - 1.0)
        return {"suite": "monodromy", "test": "".join("abcdABCD"[l] for l in word),
                "rel_err": rel, "det_err": det_err,
                "pass": bool(rel < tol and det_err < 1e-8)}

    out = parallel_map(check, prim, threads)
    rows.extend(out)
    return all(r["pass"] for r in out)


def cmd_verify(cfg: ExperimentConfig, out: Path, threads: int) -> int:
    rng = np.random.default_rng(cfg.seed)
    group = bolza_generators()
    records = enumerate_classes(group, min(cfg.lmax, 6.2))
    words = sorted({r.cls.primitive_root for r in records
                    if abs(r.L - records[0].L) < 1e-9})[:4]
    orbits = {w: axis_orbit(group.word_element(w), 1536) for w in words}

    rows: List[Dict] = [{"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
                         "seed": cfg.seed, "lmax": cfg.lmax}]
    ok = True
    ok &= _suite_commutators(cfg, rng, rows)
    ok &= _suite_energy(cfg, rng, rows)
    ok &= _suite_coercivity(cfg, rng, rows)
    ok &= _suite_mode_equation(cfg, rng, rows)
    ok &= _suite_gk_strip(cfg, rng, rows, group, orbits)
    ok &= _suite_coboundary(cfg, rng, rows, group, orbits)
    ok &= _suite_monodromy(cfg, rng, rows, group, records, threads)
    write_jsonl(rows, out / "verify.jsonl")
    failures = [r for r in rows[1:] if not r.get("pass", True)]
    print(f"verify: {len(rows) - 1} tests, {len(failures)} failures "
          f"-> {out / 'verify.jsonl'}")
    if failures:
        for r in failures:
            print(f"  FAIL {r['suite']}:{r['test']}")
        return 1
    return 0


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="flattrace",
                                 description="periodic-orbit flat-trace laboratory")
    ap.add_argument("command", choices=["catalog", "trace", "deform", "verify"])
    ap.add_argument("--config", default=None)
    ap.add_argument("--out", default=None)
    ap.add_argument("--lmax", type=float, default=None)
    ap.add_argument("--dt", type=float, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)

    try:
        cfg = load_config(args.config, {"lmax": args.lmax, "dt": args.dt,
                                        "seed": args.seed})
        cfg.validate_expressions()
        out = Path(args.out or cfg.raw.get("out", "."))
        threads = n_threads(args.threads)
        if args.command == "catalog":
            return cmd_catalog(cfg, out, threads)
        if args.command == "trace":
            return cmd_trace(cfg, out, threads)
        if args.command == "deform":
            return cmd_deform(cfg, out, threads)
        return cmd_verify(cfg, out, threads)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    except (DataError,) as exc:
        print(json.dumps({"error": "data", "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
