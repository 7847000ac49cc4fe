"""Resonance analysis of a sign-changing transmission problem.

The package studies the source problem div(sigma grad u) = -f on the
annulus sector delta < r < 1, 0 < theta < pi, where sigma is positive
for theta > pi/4 and negative for theta < pi/4.  When the coefficient
ratio lies inside the critical interval (-1, -1/3), shrinking the inner
radius delta drives the problem through an infinite geometric family of
radii where it loses injectivity; the solution then depends critically
on delta instead of converging.

Layers:

- :mod:`cornres.spectral`: the oscillating exponent pair, resonance
  radii, safe-radius sets, and the first-order matching algebra.
- :mod:`cornres.mesh`: interface-aligned log-polar triangulations and
  the reflection-paired variants used by the coercivity operators.
- :mod:`cornres.fem`: P1 assembly, Dirichlet reduction, sparse direct
  solves, norms, smallest-singular-value estimation, and extraction of
  the oscillating coefficients from solved fields.
- :mod:`cornres.canonical`: the separable-mode determinant, explicit
  kernel modes at resonance, and the discrete coercivity instruments.
- :mod:`cornres.sweep`: the delta-sweep experiment, peak detection,
  resonance comparison reports, and CSV/VTK serialization.
- :mod:`cornres.plots` / :mod:`cornres.cli`: report figures and the
  command-line entry point.
"""

from .canonical import (
    ModeData,
    coercivity_probe,
    mode_determinant,
    mode_determinant_root,
    kernel_coefficients,
    kernel_field_eval,
    kernel_residual_check,
    measure_reflection_norm,
    t_minus_apply,
    t_plus_apply,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    CornresError,
    DegenerateError,
    DomainError,
    FitError,
    InsufficientDataError,
    IoError,
    MeshKindError,
    NotResonantError,
    ParamError,
    RegimeError,
    ResonanceError,
    SingularSystemError,
)
from .fem import (
    Annular,
    FemSolution,
    HalfPlaneX,
    apply_dirichlet,
    assemble_load,
    assemble_stiffness,
    extract_singular_coefficients,
    factorize,
    h1_seminorm,
    l2_norm,
    smallest_singular,
    solve_direct,
    solve_problem,
)
from .mesh import (
    AnnulusMesh,
    build_annulus_mesh,
    build_tcoercivity_mesh,
    export_mesh,
    import_mesh_native,
    suggested_n_t,
)
from .spectral import (
    Contrast,
    MatchingData,
    Regime,
    SafeSetParams,
    classify_contrast,
    gauge_first_order,
    lambda_set,
    matching_solve,
    mu_closed_form,
    mu_dispersion,
    phi_eval,
    phi_normalization,
    resonance_deltas,
    safe_set_contains,
    spectral_data,
)
from .sweep import (
    ResonanceMatch,
    ResonanceReport,
    SweepConfig,
    SweepRecord,
    compare_resonances,
    detect_peaks,
    export_csv,
    export_field_vtk,
    parse_config,
    run_sweep,
    solve_one_delta,
    sweep_grid,
)

__version__ = "0.1.0"

__all__ = [
    "Annular",
    "AnnulusMesh",
    "ConfigError",
    "Contrast",
    "ConvergenceError",
    "CornresError",
    "DegenerateError",
    "DomainError",
    "FemSolution",
    "FitError",
    "HalfPlaneX",
    "InsufficientDataError",
    "IoError",
    "MatchingData",
    "MeshKindError",
    "ModeData",
    "NotResonantError",
    "ParamError",
    "Regime",
    "RegimeError",
    "ResonanceError",
    "ResonanceMatch",
    "ResonanceReport",
    "SafeSetParams",
    "SingularSystemError",
    "SweepConfig",
    "SweepRecord",
    "apply_dirichlet",
    "assemble_load",
    "assemble_stiffness",
    "build_annulus_mesh",
    "build_tcoercivity_mesh",
    "classify_contrast",
    "coercivity_probe",
    "compare_resonances",
    "mode_determinant",
    "mode_determinant_root",
    "detect_peaks",
    "export_csv",
    "export_field_vtk",
    "export_mesh",
    "extract_singular_coefficients",
    "factorize",
    "gauge_first_order",
    "h1_seminorm",
    "import_mesh_native",
    "kernel_coefficients",
    "kernel_field_eval",
    "kernel_residual_check",
    "l2_norm",
    "lambda_set",
    "matching_solve",
    "measure_reflection_norm",
    "mu_closed_form",
    "mu_dispersion",
    "parse_config",
    "phi_eval",
    "phi_normalization",
    "resonance_deltas",
    "run_sweep",
    "safe_set_contains",
    "smallest_singular",
    "solve_direct",
    "solve_one_delta",
    "solve_problem",
    "spectral_data",
    "suggested_n_t",
    "sweep_grid",
    "t_minus_apply",
    "t_plus_apply",
]
