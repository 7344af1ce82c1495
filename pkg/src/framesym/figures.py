"""Matplotlib figure rendering for the report paths.

Figures are a convenience next to the delimited outputs; CSV stays the
canonical data interface.  Only two-dimensional geometries are drawn, other
dimensions are skipped (the caller notes that in its report).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 130


def atlas_figure(atlas, path) -> bool:
    """Stratum and orbit maps of a 2-d scan, side by side."""
    if atlas.n != 2 or atlas.stratum is None or atlas.orbit is None:
        return False
    nx, ny = atlas.resolution
    stratum = atlas.stratum.reshape(nx, ny).T
    orbit = atlas.orbit.reshape(nx, ny).T
    extent = (
        atlas.spec.domain_box[0][0], atlas.spec.domain_box[0][1],
        atlas.spec.domain_box[1][0], atlas.spec.domain_box[1][1],
    )
    fig, axes = plt.subplots(1, 2, figsize=(9.2, 4.2), constrained_layout=True)
    for ax, data, title, cmap in (
        (axes[0], stratum, "strata (constant orbit dimension)", "viridis"),
        (axes[1], orbit, "orbit labels", "turbo"),
    ):
        shown = np.ma.masked_where(data < 0, data.astype(float))
        im = ax.imshow(shown, origin="lower", extent=extent, aspect="auto",
                       interpolation="nearest", cmap=cmap)
        ax.set_title(title)
        ax.set_xlabel(atlas.spec.coords[0])
        ax.set_ylabel(atlas.spec.coords[1])
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.suptitle("excluded points (outside integrability domain) are blank")
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return True


def killing_figure(field, path) -> bool:
    """Quiver of the sampled field's coordinate components (2-d only)."""
    if field.points.shape[-1] != 2:
        return False
    fig, ax = plt.subplots(figsize=(5.2, 4.6), constrained_layout=True)
    ax.quiver(
        field.points[:, 0], field.points[:, 1],
        field.coordinate_components[:, 0], field.coordinate_components[:, 1],
        angles="xy", color="#30608a",
    )
    ax.plot([field.base_point[0]], [field.base_point[1]], "r*", markersize=11)
    ax.set_xlabel(field.spec.coords[0])
    ax.set_ylabel(field.spec.coords[1])
    ax.set_title("killing field on the exponential lattice")
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return True


def analyze_figure(filtrations, path) -> bool:
    """Kernel dimensions k_r per sample, one stepped line each."""
    if not filtrations:
        return False
    fig, ax = plt.subplots(figsize=(5.6, 4.0), constrained_layout=True)
    for kf in filtrations:
        rs = np.arange(1, len(kf.dims) + 1)
        label = "(" + ", ".join(f"{c:g}" for c in kf.point) + ")"
        ax.step(rs, kf.dims, where="mid", marker="o", label=label)
    ax.set_xlabel("order r")
    ax.set_ylabel("kernel dimension k_r")
    ax.set_title("generator-space dimensions by order")
    ax.set_xticks(list(range(1, len(filtrations[0].dims) + 1)))
    ax.legend(fontsize=7, title="sample", title_fontsize=7)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return True
