"""Experiment harness: inner-radius sweeps, peak reports, CSV/VTK output.

The central experiment solves the source problem on a family of
annulus sectors with shrinking inner radius delta and records, per
delta, the H1 seminorm, the L2 norm, the smallest singular value of
the reduced stiffness matrix, and (optionally) the oscillating
singular coefficients extracted on a probe ring.  For contrasts
outside the critical interval the recorded curves are flat; inside,
the H1 norm spikes and the smallest singular value collapses whenever
delta crosses a resonance radius, and `detect_peaks` +
`compare_resonances` turn that into a pass/fail report against the
closed-form resonance family.

Configuration is a line-oriented ``key = value`` text format, parsed
fail-closed: unknown keys, malformed numbers, and physically excluded
parameter combinations are all reported as :class:`ConfigError` with
the offending line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    ConfigError,
    FitError,
    InsufficientDataError,
    IoError,
    ParamError,
    RegimeError,
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
)
from .mesh import AnnulusMesh, build_annulus_mesh, vtk_unstructured
from .spectral import (
    Contrast,
    Regime,
    classify_contrast,
    mu_closed_form,
    resonance_deltas,
    spectral_data,
)

GRID_LINEAR_ONE_MINUS_DELTA = "linear-1-minus-delta"
GRID_LOG_DELTA = "log-delta"

SOURCE_HALFPLANE = "halfplane-x"
SOURCE_ANNULAR = "annular"

STATUS_OK = "Ok"
STATUS_NEAR_SINGULAR = "NearSingular"

CSV_HEADER = (
    "delta,one_minus_delta,h1_seminorm,l2_norm,smallest_singular,"
    "re_c_plus,im_c_plus,re_c_minus,im_c_minus,status"
)


@dataclass(frozen=True)
class SweepConfig:
    """Validated sweep parameters (see `parse_config` for the format)."""

    contrast: Contrast
    delta_min: float
    delta_max: float
    num_delta: int
    grid_scale: str = GRID_LINEAR_ONE_MINUS_DELTA
    n_t: int = 128
    n_theta: int = 128
    source: Union[HalfPlaneX, Annular] = HalfPlaneX(0.5, 100.0)
    ring: Optional[tuple] = None
    out_dir: str = "."
    seed: int = 0


@dataclass(frozen=True)
class SweepRecord:
    """Observables for one inner radius; norms absent when NearSingular."""

    delta: float
    one_minus_delta: float
    h1_seminorm: Optional[float] = None
    l2_norm: Optional[float] = None
    smallest_singular: Optional[float] = None
    c_plus: Optional[complex] = None
    c_minus: Optional[complex] = None
    status: str = STATUS_OK


# ----------------------------------------------------------------------
# configuration

_GRID_SCALES = (GRID_LINEAR_ONE_MINUS_DELTA, GRID_LOG_DELTA)
_SOURCE_KINDS = (SOURCE_HALFPLANE, SOURCE_ANNULAR)

_KNOWN_KEYS = {
    "kappa",
    "sigma_minus",
    "sigma_plus",
    "delta_min",
    "delta_max",
    "num_delta",
    "grid_scale",
    "n_t",
    "n_theta",
    "source",
    "source_threshold",
    "source_r_inner",
    "source_amplitude",
    "ring_r_lo",
    "ring_r_hi",
    "out_dir",
    "seed",
}


def _scan_pairs(text: str):
    """Yield (key, raw_value, line_number) for every assignment line."""
    pairs = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"expected 'key = value', got {line!r}", line=line_no
            )
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=line_no)
        if key in pairs:
            raise ConfigError(f"duplicate key {key!r}", line=line_no)
        if not value:
            raise ConfigError(f"empty value for key {key!r}", line=line_no)
        pairs[key] = (value, line_no)
    return pairs


def _take_float(pairs, key, default=None):
    if key not in pairs:
        return default, 0
    raw, line = pairs.pop(key)
    try:
        return float(raw), line
    except ValueError:
        raise ConfigError(f"key {key!r} needs a number, got {raw!r}", line=line)


def _take_int(pairs, key, default=None):
    if key not in pairs:
        return default, 0
    raw, line = pairs.pop(key)
    try:
        return int(raw), line
    except ValueError:
        raise ConfigError(f"key {key!r} needs an integer, got {raw!r}", line=line)


def parse_config(text: str) -> SweepConfig:
    """Parse and validate a ``key = value`` sweep configuration.

    Fail-closed: every reported problem carries the line number of the
    offending key.  Exactly one of ``kappa`` / ``sigma_minus`` selects
    the contrast; ``sigma_plus`` defaults to 1.  The exact limit
    contrast kappa = -1 is excluded (neither regime owns it).
    """
    pairs = _scan_pairs(text)

    kappa, kappa_line = _take_float(pairs, "kappa")
    sigma_minus, sm_line = _take_float(pairs, "sigma_minus")
    sigma_plus, sp_line = _take_float(pairs, "sigma_plus", 1.0)
    if (kappa is None) == (sigma_minus is None):
        line = kappa_line or sm_line or 0
        raise ConfigError(
            "exactly one of 'kappa' or 'sigma_minus' must be given", line=line
        )
    if sigma_plus <= 0:
        raise ConfigError("'sigma_plus' must be positive", line=sp_line)
    if kappa is not None:
        contrast_line = kappa_line
        sigma_minus = kappa * sigma_plus
    else:
        contrast_line = sm_line
        kappa = sigma_minus / sigma_plus
    if sigma_minus >= 0:
        raise ConfigError("the contrast must be negative", line=contrast_line)
    if kappa == -1.0:
        raise ConfigError(
            "kappa = -1 is the excluded limit contrast", line=contrast_line
        )
    contrast = Contrast(sigma_plus, sigma_minus)

    delta_min, dmin_line = _take_float(pairs, "delta_min")
    delta_max, dmax_line = _take_float(pairs, "delta_max")
    num_delta, num_line = _take_int(pairs, "num_delta")
    for name, value, line in (
        ("delta_min", delta_min, dmin_line),
        ("delta_max", delta_max, dmax_line),
        ("num_delta", num_delta, num_line),
    ):
        if value is None:
            raise ConfigError(f"missing required key {name!r}", line=0)
    if not 0.0 < delta_min < delta_max < 1.0:
        raise ConfigError(
            "need 0 < delta_min < delta_max < 1", line=dmin_line or dmax_line
        )
    if num_delta < 2:
        raise ConfigError("'num_delta' must be at least 2", line=num_line)

    grid_scale = GRID_LINEAR_ONE_MINUS_DELTA
    if "grid_scale" in pairs:
        raw, line = pairs.pop("grid_scale")
        if raw not in _GRID_SCALES:
            raise ConfigError(
                f"'grid_scale' must be one of {_GRID_SCALES}, got {raw!r}",
                line=line,
            )
        grid_scale = raw

    n_t, nt_line = _take_int(pairs, "n_t", 128)
    n_theta, nth_line = _take_int(pairs, "n_theta", 128)
    if n_t < 1:
        raise ConfigError("'n_t' must be at least 1", line=nt_line)
    if n_theta < 4 or n_theta % 4 != 0:
        raise ConfigError(
            "'n_theta' must be a multiple of 4 (interface alignment), >= 4",
            line=nth_line,
        )

    source_kind = SOURCE_HALFPLANE
    source_line = 0
    if "source" in pairs:
        raw, source_line = pairs.pop("source")
        if raw not in _SOURCE_KINDS:
            raise ConfigError(
                f"'source' must be one of {_SOURCE_KINDS}, got {raw!r}",
                line=source_line,
            )
        source_kind = raw
    amplitude, _ = _take_float(pairs, "source_amplitude", 100.0)
    if source_kind == SOURCE_HALFPLANE:
        threshold, _ = _take_float(pairs, "source_threshold", 0.5)
        if "source_r_inner" in pairs:
            _, line = pairs.pop("source_r_inner")
            raise ConfigError(
                "'source_r_inner' only applies to the annular source", line=line
            )
        source = HalfPlaneX(threshold, amplitude)
    else:
        r_inner, ri_line = _take_float(pairs, "source_r_inner")
        if r_inner is None:
            raise ConfigError(
                "annular source needs 'source_r_inner'", line=source_line
            )
        if not 0.0 < r_inner < 1.0:
            raise ConfigError(
                "'source_r_inner' must lie in (0, 1)", line=ri_line
            )
        if "source_threshold" in pairs:
            _, line = pairs.pop("source_threshold")
            raise ConfigError(
                "'source_threshold' only applies to the halfplane source",
                line=line,
            )
        source = Annular(r_inner, amplitude)

    ring = None
    has_lo, has_hi = "ring_r_lo" in pairs, "ring_r_hi" in pairs
    if has_lo != has_hi:
        key = "ring_r_lo" if has_lo else "ring_r_hi"
        _, line = pairs.pop(key)
        raise ConfigError(
            "'ring_r_lo' and 'ring_r_hi' must be given together", line=line
        )
    if has_lo:
        r_lo, lo_line = _take_float(pairs, "ring_r_lo")
        r_hi, hi_line = _take_float(pairs, "ring_r_hi")
        if not 0.0 < r_lo < r_hi < 1.0:
            raise ConfigError("need 0 < ring_r_lo < ring_r_hi < 1", line=lo_line)
        if classify_contrast(contrast) is not Regime.CRITICAL_INTERVAL:
            raise ConfigError(
                "coefficient extraction requires a contrast inside the "
                "critical interval (-1, -1/3)",
                line=lo_line,
            )
        mu = mu_closed_form(contrast)
        min_ratio = math.exp(math.pi / (4.0 * mu))
        if r_hi / r_lo < min_ratio * (1.0 - 1e-12):
            raise ConfigError(
                "ring too narrow to resolve the oscillating pair: need "
                f"ring_r_hi/ring_r_lo >= exp(pi/(4 mu)) = {min_ratio:.6g}",
                line=hi_line,
            )
        if not isinstance(source, Annular) or r_hi > source.r_inner:
            raise ConfigError(
                "extraction ring must lie inside the source-free zone: "
                "use 'source = annular' with source_r_inner >= ring_r_hi",
                line=lo_line,
            )
        ring = (r_lo, r_hi)

    out_dir = "."
    if "out_dir" in pairs:
        out_dir, _ = pairs.pop("out_dir")
    seed, seed_line = _take_int(pairs, "seed", 0)
    if seed < 0:
        raise ConfigError("'seed' must be nonnegative", line=seed_line)

    if pairs:  # unreachable unless a key above was forgotten
        key, (_, line) = next(iter(pairs.items()))
        raise ConfigError(f"unhandled key {key!r}", line=line)

    return SweepConfig(
        contrast=contrast,
        delta_min=delta_min,
        delta_max=delta_max,
        num_delta=num_delta,
        grid_scale=grid_scale,
        n_t=n_t,
        n_theta=n_theta,
        source=source,
        ring=ring,
        out_dir=out_dir,
        seed=seed,
    )


def sweep_grid(config: SweepConfig) -> np.ndarray:
    """Ascending delta values; spacing per the configured scale."""
    if config.grid_scale == GRID_LOG_DELTA:
        return np.geomspace(config.delta_min, config.delta_max, config.num_delta)
    ones = np.linspace(
        1.0 - config.delta_max, 1.0 - config.delta_min, config.num_delta
    )
    return np.sort(1.0 - ones)


# ----------------------------------------------------------------------
# sweep driver

def solve_one_delta(
    config: SweepConfig, delta: float
) -> tuple[SweepRecord, Optional[FemSolution]]:
    """One sweep point: mesh, solve, measure.  Pure in (config, delta)."""
    mesh = build_annulus_mesh(delta, config.n_t, config.n_theta)
    stiffness = assemble_stiffness(mesh, config.contrast)
    load = assemble_load(mesh, config.source)
    reduced = apply_dirichlet(stiffness, load, mesh)
    try:
        factorization = factorize(reduced.matrix)
        solution = solve_direct(reduced, factorization)
    except SingularSystemError:
        return (
            SweepRecord(
                delta=delta, one_minus_delta=1.0 - delta,
                status=STATUS_NEAR_SINGULAR,
            ),
            None,
        )
    c_plus = c_minus = None
    if config.ring is not None and delta < config.ring[0]:
        try:
            c_plus, c_minus = extract_singular_coefficients(
                solution, config.ring, spectral_data(config.contrast)
            )
        except (FitError, ParamError):
            pass  # ring invalid at this delta; coefficients stay absent
    record = SweepRecord(
        delta=delta,
        one_minus_delta=1.0 - delta,
        h1_seminorm=h1_seminorm(solution),
        l2_norm=l2_norm(solution),
        smallest_singular=smallest_singular(factorization, seed=config.seed),
        c_plus=c_plus,
        c_minus=c_minus,
        status=STATUS_OK,
    )
    return record, solution


def run_sweep(
    config: SweepConfig,
    on_solution: Optional[Callable[[SweepRecord, FemSolution], None]] = None,
) -> list[SweepRecord]:
    """Solve every grid point, ascending in delta.

    Points are independent (each owns its mesh and matrices), so the
    loop could run concurrently; output order is fixed by the grid.
    ``on_solution`` is invoked with (record, solution) for each point
    that solved, letting callers stream fields to disk without the
    sweep accumulating them.
    """
    records = []
    for delta in sweep_grid(config):
        record, solution = solve_one_delta(config, float(delta))
        if solution is not None and on_solution is not None:
            on_solution(record, solution)
        records.append(record)
    return records


# ----------------------------------------------------------------------
# peak detection and resonance comparison

def detect_peaks(
    records: Sequence[SweepRecord], prominence_factor: float
) -> list[float]:
    """Delta positions where the H1 curve spikes.

    A peak is an Ok record strictly larger than both Ok neighbors and
    above prominence_factor times the median Ok value; NearSingular
    records are unconditional peaks (the solver refused: the spike is
    off scale).  Needs at least 3 Ok records.
    """
    if prominence_factor < 1.0:
        raise ParamError(
            f"prominence_factor must be >= 1, got {prominence_factor!r}"
        )
    ok = [r for r in records if r.status == STATUS_OK]
    if len(ok) < 3:
        raise InsufficientDataError(
            f"peak detection needs at least 3 Ok records, got {len(ok)}"
        )
    peaks = [r.delta for r in records if r.status == STATUS_NEAR_SINGULAR]
    values = [r.h1_seminorm for r in ok]
    threshold = prominence_factor * float(np.median(values))
    for i in range(1, len(ok) - 1):
        if (
            values[i] > values[i - 1]
            and values[i] > values[i + 1]
            and values[i] > threshold
        ):
            peaks.append(ok[i].delta)
    return sorted(peaks)


@dataclass(frozen=True)
class ResonanceMatch:
    """A detected peak paired with its nearest resonance radius."""

    peak_delta: float
    n: int
    resonance_delta: float
    ln_mismatch: float


@dataclass(frozen=True)
class ResonanceReport:
    """Outcome of comparing detected peaks against the resonance family."""

    matches: tuple
    unmatched_peaks: tuple
    missed_resonances: tuple
    tolerance_ln: float

    @property
    def passed(self) -> bool:
        return not self.unmatched_peaks and not self.missed_resonances


def compare_resonances(
    peaks: Sequence[float],
    contrast: Contrast,
    tolerance_ln: float,
    delta_range: Optional[tuple] = None,
) -> ResonanceReport:
    """Match peaks to the closed-form resonance radii in log scale.

    Each peak is paired with the nearest resonance; pairs within
    ``tolerance_ln`` of |ln delta_peak - ln delta_n| are matches, the
    rest are unmatched.  Resonances inside ``delta_range`` (or, if not
    given, inside the span of the peaks) that attracted no match are
    reported missed.
    """
    if classify_contrast(contrast) is not Regime.CRITICAL_INTERVAL:
        raise RegimeError(
            "resonance comparison needs a contrast inside the critical interval"
        )
    if tolerance_ln <= 0:
        raise ParamError(f"tolerance_ln must be positive, got {tolerance_ln!r}")
    if delta_range is not None:
        lo, hi = map(float, delta_range)
        if not 0.0 < lo < hi < 1.0:
            raise ParamError("delta_range must satisfy 0 < lo < hi < 1")
    elif peaks:
        lo, hi = min(peaks), max(peaks)
    else:
        lo = hi = None

    mu = mu_closed_form(contrast)
    candidates = list(peaks) + ([lo] if lo is not None else [])
    reach = min(candidates) if candidates else 0.5
    n_max = max(
        1, math.ceil(mu * (tolerance_ln - math.log(reach)) / math.pi) + 1
    )
    family = resonance_deltas(contrast, n_max)

    matches, unmatched = [], []
    matched_n = set()
    for peak in sorted(peaks):
        mismatches = [abs(math.log(peak) - math.log(d)) for d in family]
        best = int(np.argmin(mismatches))
        if mismatches[best] <= tolerance_ln:
            matches.append(
                ResonanceMatch(
                    peak_delta=peak,
                    n=best + 1,
                    resonance_delta=family[best],
                    ln_mismatch=mismatches[best],
                )
            )
            matched_n.add(best + 1)
        else:
            unmatched.append(peak)

    missed = []
    if lo is not None:
        for n, delta_n in enumerate(family, start=1):
            if lo <= delta_n <= hi and n not in matched_n:
                missed.append((n, delta_n))

    return ResonanceReport(
        matches=tuple(matches),
        unmatched_peaks=tuple(unmatched),
        missed_resonances=tuple(missed),
        tolerance_ln=tolerance_ln,
    )


# ----------------------------------------------------------------------
# serialization

def _field(value: Optional[float]) -> str:
    if value is None:
        return ""
    if math.isnan(value):
        raise IoError("refusing to serialize NaN")
    return "%.17g" % value


def export_csv(records: Sequence[SweepRecord]) -> bytes:
    """Records as delimited text; 17 significant digits round-trip."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    _field(r.delta),
                    _field(r.one_minus_delta),
                    _field(r.h1_seminorm),
                    _field(r.l2_norm),
                    _field(r.smallest_singular),
                    _field(None if r.c_plus is None else r.c_plus.real),
                    _field(None if r.c_plus is None else r.c_plus.imag),
                    _field(None if r.c_minus is None else r.c_minus.real),
                    _field(None if r.c_minus is None else r.c_minus.imag),
                    r.status,
                ]
            )
        )
    return ("\n".join(lines) + "\n").encode("ascii")


def export_field_vtk(
    solution: FemSolution, mesh: Optional[AnnulusMesh] = None
) -> bytes:
    """Solution field as a legacy-format unstructured-grid document."""
    mesh = mesh if mesh is not None else solution.mesh
    if mesh is None:
        raise IoError("no mesh attached to the solution or supplied")
    values = np.asarray(solution.values, dtype=float)
    if values.shape != (mesh.n_vertices,):
        raise IoError(
            f"field length {values.shape} does not match mesh "
            f"({mesh.n_vertices} vertices)"
        )
    if not np.all(np.isfinite(values)):
        raise IoError("refusing to serialize non-finite field values")
    return vtk_unstructured(mesh, point_scalars=("u", values))
