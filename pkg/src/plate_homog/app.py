"""Command-line front door.

``plate-homog <command> --spec <file> --out <dir>`` reads a JSON
scenario, validates the material eagerly, runs the requested pipeline
and writes reports (JSON) and tables (CSV).  Commands:

- ``reduce``         plane-stress reduction of a form or 3D profile
- ``bending``        bending form of a thickness profile
- ``homog-regime1``  unit-cell homogenization pipeline
- ``homog-regime2``  slab homogenization pipeline
- ``oscillate``      bending forms of n-fold squeezed profiles vs. their average
- ``oracle-check``   solver pipelines against the dense oracles
- ``energy``         plate energy of a bending form on a cylinder
- ``sweep``          fan out a list of scenarios (PLATE_HOMOG_THREADS caps workers)

Exit codes: 0 ok, 2 parse/schema, 3 admissibility, 4 solver or oracle
mismatch, 5 dense-size cap.  Errors are also emitted as one JSON object
on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import iojson, oracle
from .core import EffectiveReport, QuadForm2, QuadForm3, mandel2
from .errors import (
    EXIT_OK,
    PlateHomogError,
    SolverError,
    SpecFormatError,
)
from .homog3d import CellMaterial3, bending_form_regime1
from .homogslab import SlabMaterial, bending_form_regime2
from .reduction import (
    ThicknessProfile,
    bending_form,
    oscillation_experiment,
    plane_stress_reduce,
    profile_average,
    reduce_profile,
)

COMMANDS = (
    "reduce",
    "bending",
    "homog-regime1",
    "homog-regime2",
    "oscillate",
    "oracle-check",
    "energy",
    "sweep",
)

THREADS_ENV = "PLATE_HOMOG_THREADS"

DEFAULT_SETTINGS = {
    "tol": 1e-10,
    "x3_samples": 8,
    "quadrature": 16,
    "periods": [1, 2, 4, 8, 16, 32],
    "check_tol": 1e-8,
    "oracle_loads": 3,
}

SETTING_RANGES = {
    "tol": (1e-16, 1e-2),
    "x3_samples": (2, 64),
    "quadrature": (2, 64),
    "check_tol": (1e-16, 1e-2),
    "oracle_loads": (1, 16),
}


@dataclass(frozen=True)
class SurfaceSpec:
    """Deformed mid-surface for the limit plate energy.

    Only developable surfaces with constant curvature are supported: a
    cylinder of radius ``radius`` over a rectangular domain (exact
    isometry of the flat plate, single curvature 1/radius), or the flat
    plate itself.
    """

    kind: str
    extent: tuple
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in ("cylinder", "flat"):
            raise SpecFormatError(f"surface kind must be 'cylinder' or 'flat', got {self.kind!r}")
        if len(self.extent) != 2 or min(self.extent) <= 0.0:
            raise SpecFormatError("surface extent must be two positive lengths")
        if self.kind == "cylinder" and not (self.radius and self.radius > 0.0):
            raise SpecFormatError("cylinder radius must be positive")

    @property
    def area(self) -> float:
        return float(self.extent[0] * self.extent[1])


def plate_energy(q0: QuadForm2, surface: SurfaceSpec) -> float:
    """Limit plate energy: area times the bending form at the curvature.

    A cylinder has constant curvature matrix diag(1/R, 0), so the
    integral is exact; the sign of the curvature does not matter since
    the form is even.  Flat plates carry zero energy.
    """
    if surface.kind == "flat":
        return 0.0
    curvature = np.array([[1.0 / surface.radius, 0.0], [0.0, 0.0]])
    return surface.area * q0.eval(curvature)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated unit of work for one CLI invocation."""

    command: str
    name: str
    settings: dict
    material: object = None
    form: QuadForm2 | None = None
    surface: SurfaceSpec | None = None
    subs: tuple = field(default_factory=tuple)


def _read_settings(obj: dict, path: str) -> dict:
    settings = dict(DEFAULT_SETTINGS)
    for key, value in (obj or {}).items():
        if key not in DEFAULT_SETTINGS:
            raise SpecFormatError(f"{path}: unknown setting {key!r}")
        settings[key] = value
    for key, (lo, hi) in SETTING_RANGES.items():
        v = settings[key]
        if not (lo <= v <= hi):
            raise SpecFormatError(f"{path}: setting {key}={v} outside [{lo}, {hi}]")
    periods = settings["periods"]
    if not periods or any(int(n) != n or n < 1 for n in periods):
        raise SpecFormatError(f"{path}: periods must be positive integers")
    settings["periods"] = [int(n) for n in periods]
    settings["x3_samples"] = int(settings["x3_samples"])
    settings["quadrature"] = int(settings["quadrature"])
    settings["oracle_loads"] = int(settings["oracle_loads"])
    return settings


def _read_surface(obj: dict, path: str) -> SurfaceSpec:
    kind = str(iojson._get(obj, "kind", path))
    extent = tuple(float(v) for v in obj.get("extent", (1.0, 1.0)))
    radius = obj.get("radius")
    return SurfaceSpec(kind=kind, extent=extent, radius=None if radius is None else float(radius))


def _read_material(obj: dict, path: str):
    kind = iojson._get(obj, "kind", path)
    if kind in ("form3", "form2", "isotropic"):
        return iojson.read_form(obj, path)
    if kind == "profile":
        return iojson.read_profile(obj, path)
    if kind in ("cell", "isotropic-field"):
        material = iojson.read_cell_material(obj, path)
        material.check()
        return material
    if kind in ("slab", "slab-cells"):
        material = iojson.read_slab_material(obj, path)
        material.check()
        return material
    raise SpecFormatError(f"{path}: unknown material kind {kind!r}")


def _scenario_from_dict(obj: dict, path: str, command: str | None = None) -> Scenario:
    declared = obj.get("command")
    if command is None:
        command = declared
    if command is None:
        raise SpecFormatError(f"{path}: no command given on the CLI or in the file")
    if declared is not None and declared != command:
        raise SpecFormatError(
            f"{path}: file declares command {declared!r} but {command!r} was requested"
        )
    if command not in COMMANDS:
        raise SpecFormatError(f"{path}: unknown command {command!r}")
    settings = _read_settings(obj.get("settings"), path)
    name = str(obj.get("name", command))

    if command == "sweep":
        subs_raw = iojson._get(obj, "scenarios", path)
        if not isinstance(subs_raw, list) or not subs_raw:
            raise SpecFormatError(f"{path}: sweep needs a non-empty 'scenarios' list")
        subs = []
        for i, sub in enumerate(subs_raw):
            sp = f"{path}.scenarios[{i}]"
            if "command" not in sub:
                raise SpecFormatError(f"{sp}: sweep entries must declare their command")
            if sub["command"] == "sweep":
                raise SpecFormatError(f"{sp}: sweeps cannot nest")
            sub_sc = _scenario_from_dict(sub, sp)
            if sub_sc.name == sub_sc.command:
                sub_sc = Scenario(
                    command=sub_sc.command, name=f"{sub_sc.command}-{i}",
                    settings=sub_sc.settings, material=sub_sc.material,
                    form=sub_sc.form, surface=sub_sc.surface,
                )
            subs.append(sub_sc)
        names = [s.name for s in subs]
        if len(set(names)) != len(names):
            raise SpecFormatError(f"{path}: sweep scenario names must be unique")
        return Scenario(command=command, name=name, settings=settings, subs=tuple(subs))

    if command == "energy":
        form = iojson.read_form(iojson._get(obj, "form", path), path + ".form")
        if not isinstance(form, QuadForm2):
            raise SpecFormatError(f"{path}.form: energy needs a 2D bending form")
        eig = np.linalg.eigvalsh(form.matrix)
        if eig[0] < -1e-12 * max(1.0, abs(eig[-1])):
            raise SpecFormatError(f"{path}.form: bending form must be positive semidefinite")
        surface = _read_surface(iojson._get(obj, "surface", path), path + ".surface")
        return Scenario(command=command, name=name, settings=settings, form=form, surface=surface)

    material = _read_material(iojson._get(obj, "material", path), path + ".material")

    wants = {
        "reduce": (QuadForm3, ThicknessProfile),
        "bending": (ThicknessProfile,),
        "oscillate": (ThicknessProfile,),
        "homog-regime1": (CellMaterial3,),
        "homog-regime2": (SlabMaterial,),
        "oracle-check": (CellMaterial3, SlabMaterial),
    }[command]
    if not isinstance(material, wants):
        names = " or ".join(w.__name__ for w in wants)
        raise SpecFormatError(
            f"{path}.material: command {command!r} needs {names}, got {type(material).__name__}"
        )
    if command == "oscillate" and material.rule == "gauss":
        raise SpecFormatError(
            f"{path}.material: oscillate needs a piecewise-constant profile (layers or midpoint)"
        )
    return Scenario(command=command, name=name, settings=settings, material=material)


def parse_material_spec(path, command: str | None = None) -> Scenario:
    """Load and fully validate a scenario file (admissibility included)."""
    obj = iojson.load_json(path)
    iojson.check_convention(obj, str(path))
    return _scenario_from_dict(obj, str(path), command)


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    settings = dict(scenario.settings)
    if args.tol is not None:
        settings["tol"] = args.tol
    if args.quadrature is not None:
        settings["quadrature"] = args.quadrature
        settings["x3_samples"] = args.quadrature
    material = scenario.material
    if args.grid is not None:
        if not isinstance(material, CellMaterial3):
            raise SpecFormatError("--grid refinement only applies to cell materials")
        target = tuple(args.grid)
        current = material.grid_shape
        factors = {t // c for t, c in zip(target, current) if c * (t // c) == t}
        if len(factors) != 1 or any(t % c for t, c in zip(target, current)):
            raise SpecFormatError(
                f"--grid {target} must be a uniform integer multiple of the material grid {current}"
            )
        factor = factors.pop()
        if factor > 1:
            material = material.refine(factor)
    _read_settings({k: v for k, v in settings.items()}, "overrides")
    return Scenario(
        command=scenario.command, name=scenario.name, settings=settings,
        material=material, form=scenario.form, surface=scenario.surface,
        subs=scenario.subs,
    )


def _write_report(report: EffectiveReport, settings: dict, out_path: Path):
    iojson.dump_json(iojson.report_to_dict(report, settings), out_path)


def _run_reduce(scenario: Scenario, out_dir: Path) -> dict:
    material = scenario.material
    if isinstance(material, ThicknessProfile):
        reduced = reduce_profile(material)
        out = iojson.profile_to_dict(reduced)
        out["settings"] = scenario.settings
        path = out_dir / f"{scenario.name}-reduced-profile.json"
        iojson.dump_json(out, path)
        return {"artifact": str(path)}
    q2, dstar = plane_stress_reduce(material)
    out = iojson.form_to_dict(q2)
    out["minimizer_map"] = dstar.tolist()
    out["settings"] = scenario.settings
    path = out_dir / f"{scenario.name}-reduced.json"
    iojson.dump_json(out, path)
    return {"artifact": str(path)}


def _run_bending(scenario: Scenario, out_dir: Path) -> dict:
    q0, bstar = bending_form(scenario.material)
    report = EffectiveReport(
        form=q0, optimal_b=bstar, regime="thickness",
        diagnostics={"rule": scenario.material.rule, "samples": len(scenario.material.forms)},
    )
    path = out_dir / f"{scenario.name}-report.json"
    _write_report(report, scenario.settings, path)
    return {"artifact": str(path)}


def _run_oscillate(scenario: Scenario, out_dir: Path) -> dict:
    profile = reduce_profile(scenario.material)
    limit_form = bending_form(
        ThicknessProfile((profile_average(profile),), rule="midpoint")
    )[0]
    rows = []
    for n in scenario.settings["periods"]:
        qn = oscillation_experiment(profile, n)
        dev = float(np.linalg.norm(qn.matrix - limit_form.matrix))
        rows.append((n, dev))
    csv_path = out_dir / f"{scenario.name}-oscillation.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["periods", "frobenius_distance_to_average_limit"])
        writer.writerows(rows)
    final = oscillation_experiment(profile, scenario.settings["periods"][-1])
    report = EffectiveReport(
        form=final, optimal_b=np.zeros((3, 3)), regime="oscillate",
        diagnostics={
            "limit_form": limit_form.matrix.tolist(),
            "deviations": {str(n): d for n, d in rows},
        },
    )
    path = out_dir / f"{scenario.name}-report.json"
    _write_report(report, scenario.settings, path)
    return {"artifact": str(path), "csv": str(csv_path)}


def _run_regime(scenario: Scenario, out_dir: Path) -> dict:
    tol = float(scenario.settings["tol"])
    if scenario.command == "homog-regime1":
        report = bending_form_regime1(scenario.material, tol=tol)
    else:
        report = bending_form_regime2(scenario.material, tol=tol)
    path = out_dir / f"{scenario.name}-report.json"
    _write_report(report, scenario.settings, path)
    return {"artifact": str(path)}


def _run_oracle_check(scenario: Scenario, out_dir: Path) -> dict:
    material = scenario.material
    tol = float(scenario.settings["tol"])
    check_tol = float(scenario.settings["check_tol"])
    rng = np.random.default_rng(0)
    nloads = scenario.settings["oracle_loads"]
    loads = [mandel2(np.eye(2))]
    for m in rng.standard_normal((nloads - 1, 2, 2)):
        loads.append(mandel2(0.5 * (m + m.T)))
    diffs = []
    if isinstance(material, CellMaterial3):
        report = bending_form_regime1(material, tol=tol)
        for a2 in loads:
            solver_value = report.form.eval_mandel(a2)
            oracle_value = oracle.brute_force_regime1(
                material, a2, x3_samples=scenario.settings["x3_samples"]
            )
            diffs.append(abs(solver_value - oracle_value) / max(abs(oracle_value), 1e-30))
    else:
        report = bending_form_regime2(material, tol=tol)
        for a2 in loads:
            solver_value = report.form.eval_mandel(a2)
            oracle_value = oracle.brute_force_regime2(material, a2)
            diffs.append(abs(solver_value - oracle_value) / max(abs(oracle_value), 1e-30))
    worst = float(max(diffs))
    out = {
        "convention": iojson.CONVENTION,
        "kind": "oracle-check",
        "regime": report.regime,
        "max_relative_difference": worst,
        "tolerance": check_tol,
        "passed": worst <= check_tol,
        "settings": scenario.settings,
    }
    path = out_dir / f"{scenario.name}-oracle-check.json"
    iojson.dump_json(out, path)
    if worst > check_tol:
        raise SolverError(
            f"oracle check failed: max relative difference {worst:.3e} > {check_tol:g}"
        )
    return {"artifact": str(path), "max_relative_difference": worst}


def _run_energy(scenario: Scenario, out_dir: Path) -> dict:
    value = plate_energy(scenario.form, scenario.surface)
    out = {
        "convention": iojson.CONVENTION,
        "kind": "plate-energy",
        "surface": {
            "kind": scenario.surface.kind,
            "extent": list(scenario.surface.extent),
            "radius": scenario.surface.radius,
        },
        "energy": value,
        "settings": scenario.settings,
    }
    path = out_dir / f"{scenario.name}-energy.json"
    iojson.dump_json(out, path)
    return {"artifact": str(path), "energy": value}


def _max_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise SpecFormatError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if n < 1:
            raise SpecFormatError(f"{THREADS_ENV} must be >= 1")
        return n
    return min(4, os.cpu_count() or 1)


def _run_sweep(scenario: Scenario, out_dir: Path) -> dict:
    results = {}
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        futures = {
            pool.submit(run_scenario, sub, out_dir): sub.name for sub in scenario.subs
        }
        for future, name in futures.items():
            results[name] = future.result()
    csv_path = out_dir / f"{scenario.name}-summary.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "artifact"])
        for sub in scenario.subs:
            writer.writerow([sub.name, results[sub.name].get("artifact", "")])
    return {"artifact": str(csv_path), "scenarios": results}


_RUNNERS = {
    "reduce": _run_reduce,
    "bending": _run_bending,
    "oscillate": _run_oscillate,
    "homog-regime1": _run_regime,
    "homog-regime2": _run_regime,
    "oracle-check": _run_oracle_check,
    "energy": _run_energy,
    "sweep": _run_sweep,
}


def run_scenario(scenario: Scenario, out_dir) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = _RUNNERS[scenario.command](scenario, out_dir)
    result["runtime_s"] = time.perf_counter() - t0
    return result


def _emit_error(exc: PlateHomogError):
    payload = {
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": exc.exit_code,
    }
    if isinstance(exc, SolverError) and exc.residuals:
        payload["residuals_tail"] = list(exc.residuals[-5:])
    print(json.dumps(payload), file=sys.stderr)


def _parse_grid(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be three comma-separated sizes")
    return tuple(int(p) for p in parts)


def build_argparser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="plate-homog",
        description="Effective bending stiffness of periodically structured thin plates.",
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--spec", required=True, help="scenario JSON file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--tol", type=float, default=None, help="solver tolerance override")
    ap.add_argument("--grid", type=_parse_grid, default=None,
                    help="refine a cell material to n1,n2,n3 (nested multiples only)")
    ap.add_argument("--quadrature", type=int, default=None,
                    help="override thickness quadrature order / oracle sample count")
    return ap


def main(argv=None) -> int:
    args = build_argparser().parse_args(argv)
    try:
        scenario = parse_material_spec(args.spec, args.command)
        scenario = _apply_overrides(scenario, args)
        result = run_scenario(scenario, args.out)
    except PlateHomogError as exc:
        _emit_error(exc)
        return exc.exit_code
    print(json.dumps({"status": "ok", **result}))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
