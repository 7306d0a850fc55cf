"""Effective bending stiffness of periodically structured thin plates.

Computes plate bending quadratic forms for materials that oscillate
through the thickness and/or periodically in plane: plane-stress
reduction, thickness-moment bending forms, and two periodic corrector
pipelines (unit-cell and slab), each guarded by an independent dense
oracle.
"""

from .core import (
    EffectiveReport,
    MaterialBounds,
    QuadForm2,
    QuadForm3,
    mandel2,
    mandel3,
    qf_check_class,
    qf_eval,
    qf_isotropic,
    unmandel2,
    unmandel3,
)
from .errors import (
    AdmissibilityError,
    DegenerateMaterialError,
    DegenerateProfileError,
    PlateHomogError,
    SizeCapError,
    SolverError,
    SpecFormatError,
)
from .homog3d import (
    CellMaterial3,
    CorrectorField3,
    bending_form_regime1,
    corrector_solve_3d,
    homogenized_form_3d,
)
from .homogslab import (
    FiberMaterial,
    SlabCorrector,
    SlabMaterial,
    bending_form_regime2,
    fiber_reduce,
    laminate_reduced_form,
    slab_corrector_solve,
)
from .oracle import (
    bilayer_closed_form,
    brute_force_regime1,
    brute_force_regime2,
    laminate_closed_form,
)
from .reduction import (
    MomentTriple,
    ThicknessProfile,
    bending_form,
    moment_matrices,
    oscillation_experiment,
    plane_stress_reduce,
    profile_average,
    reduce_profile,
)
from .app import SurfaceSpec, parse_material_spec, plate_energy

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "CellMaterial3",
    "CorrectorField3",
    "DegenerateMaterialError",
    "DegenerateProfileError",
    "EffectiveReport",
    "FiberMaterial",
    "MaterialBounds",
    "MomentTriple",
    "PlateHomogError",
    "QuadForm2",
    "QuadForm3",
    "SizeCapError",
    "SlabCorrector",
    "SlabMaterial",
    "SolverError",
    "SpecFormatError",
    "SurfaceSpec",
    "ThicknessProfile",
    "bending_form",
    "bending_form_regime1",
    "bending_form_regime2",
    "bilayer_closed_form",
    "brute_force_regime1",
    "brute_force_regime2",
    "corrector_solve_3d",
    "fiber_reduce",
    "homogenized_form_3d",
    "laminate_closed_form",
    "laminate_reduced_form",
    "mandel2",
    "mandel3",
    "moment_matrices",
    "oscillation_experiment",
    "parse_material_spec",
    "plane_stress_reduce",
    "plate_energy",
    "profile_average",
    "qf_check_class",
    "qf_eval",
    "qf_isotropic",
    "reduce_profile",
    "slab_corrector_solve",
    "unmandel2",
    "unmandel3",
]
