"""Figure rendering for sweep reports and solved fields.

Renders to image files only (headless backend): the sweep report shows
the H1-seminorm and smallest-singular-value curves against 1 - delta
with the closed-form resonance radii overlaid, which is the visual
check that detected peaks sit where the analysis puts them; the field
plot paints a solved potential on its triangulation.
"""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .errors import IoError, ParamError  # noqa: E402
from .fem import FemSolution  # noqa: E402
from .mesh import AnnulusMesh  # noqa: E402
from .spectral import (  # noqa: E402
    Contrast,
    Regime,
    classify_contrast,
    resonance_deltas,
)
from .sweep import STATUS_OK, SweepRecord  # noqa: E402


def _resonances_in(contrast: Contrast, lo: float, hi: float) -> list:
    """Resonance radii inside [lo, hi]; empty outside the critical regime."""
    if classify_contrast(contrast) is not Regime.CRITICAL_INTERVAL:
        return []
    found, n = [], 1
    while True:
        (delta_n,) = resonance_deltas(contrast, n)[-1:]
        if delta_n < lo:
            return found
        if delta_n <= hi:
            found.append(delta_n)
        n += 1


def plot_sweep(
    records: Sequence[SweepRecord],
    contrast: Contrast,
    out_path: str,
    peaks: Optional[Sequence[float]] = None,
) -> str:
    """Render the two sweep curves to ``out_path``; returns the path."""
    ok = [r for r in records if r.status == STATUS_OK]
    if not ok:
        raise ParamError("nothing to plot: no solved records")
    ones = np.array([r.one_minus_delta for r in ok])
    h1 = np.array([r.h1_seminorm for r in ok])
    smin = np.array([r.smallest_singular for r in ok])
    refused = [r.one_minus_delta for r in records if r.status != STATUS_OK]

    lo = min(r.delta for r in records)
    hi = max(r.delta for r in records)
    marks = _resonances_in(contrast, lo, hi)

    fig, (ax_h1, ax_s) = plt.subplots(
        2, 1, sharex=True, figsize=(7.0, 6.0), constrained_layout=True
    )
    for ax, values, label in (
        (ax_h1, h1, "H1 seminorm"),
        (ax_s, smin, "smallest singular value"),
    ):
        ax.semilogy(ones, values, ".-", color="tab:blue", lw=0.8, ms=3)
        for delta_n in marks:
            ax.axvline(
                1.0 - delta_n, color="tab:gray", ls=":", lw=0.8, zorder=0
            )
        for one in refused:
            ax.axvline(one, color="tab:red", ls="--", lw=0.8)
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.2)
    if peaks:
        top = float(h1.max())
        ax_h1.plot(
            [1.0 - p for p in peaks], [top] * len(peaks),
            "v", color="tab:orange", ms=6, label="detected peaks",
        )
        ax_h1.legend(loc="best", fontsize=8)
    ax_s.set_xlabel("1 - delta")
    ax_h1.set_title(
        f"sweep: kappa = {contrast.kappa:.6g}"
        + (f", {len(refused)} near-singular" if refused else "")
    )
    try:
        fig.savefig(out_path, dpi=150)
    except OSError as exc:
        raise IoError(f"could not write figure {out_path!r}: {exc}") from exc
    finally:
        plt.close(fig)
    return out_path


def plot_field(
    solution: FemSolution,
    out_path: str,
    mesh: Optional[AnnulusMesh] = None,
    title: str = "",
) -> str:
    """Render a solved nodal field on its triangulation; returns the path."""
    mesh = mesh if mesh is not None else solution.mesh
    if mesh is None:
        raise ParamError("no mesh attached to the solution or supplied")
    values = np.asarray(solution.values, dtype=float)
    if values.shape != (mesh.n_vertices,):
        raise ParamError(
            f"field length {values.shape} does not match mesh "
            f"({mesh.n_vertices} vertices)"
        )
    fig, ax = plt.subplots(figsize=(6.0, 4.0), constrained_layout=True)
    image = ax.tripcolor(
        mesh.vertices[:, 0],
        mesh.vertices[:, 1],
        mesh.triangles,
        values,
        shading="gouraud",
        cmap="RdBu_r",
    )
    # interface overlay
    for i, j in mesh.interface_edges:
        ax.plot(
            mesh.vertices[[i, j], 0],
            mesh.vertices[[i, j], 1],
            color="black",
            lw=1.0,
        )
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.colorbar(image, ax=ax, shrink=0.9)
    try:
        fig.savefig(out_path, dpi=150)
    except OSError as exc:
        raise IoError(f"could not write figure {out_path!r}: {exc}") from exc
    finally:
        plt.close(fig)
    return out_path
