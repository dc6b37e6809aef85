"""Figure rendering for reports. Uses the non-interactive Agg backend."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_LABELS = {
    "d_eff": ("D_eff", "m"),
    "lap_phi": ("Laplacian of phase", "rad/m$^2$"),
    "phi": ("phase", "rad"),
    "residual_rms": ("residual RMS", "rel. intensity"),
    "degenerate": ("degenerate pixels", ""),
}


def _extent_mm(shape, pitch):
    return [0, shape[1] * pitch * 1e3, shape[0] * pitch * 1e3, 0]


def save_field_figure(values, pitch, path, title=None, unit="", cmap="gray", dpi=100):
    """Render a single 2D array as an image with a colorbar."""
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(values, cmap=cmap, extent=_extent_mm(values.shape, pitch))
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    if title:
        ax.set_title(title)
    cb = fig.colorbar(im, ax=ax)
    if unit:
        cb.set_label(unit)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def save_named_field(name, field, path):
    title, unit = _LABELS.get(name, (name, ""))
    return save_field_figure(field.values, field.pitch, path, title, unit)


def save_cnr_sweep(n_values, cnr_values, path, maps=None, pitch=1.0):
    """CNR against number of mask positions, optionally with the D_eff maps."""
    n_maps = len(maps) if maps else 0
    fig, axes = plt.subplots(1, 1 + n_maps, figsize=(4 * (1 + n_maps), 3.6), squeeze=False)
    ax = axes[0, 0]
    ax.plot(n_values, cnr_values, "o-", color="k")
    ax.set_xlabel("number of mask positions N")
    ax.set_ylabel("CNR of D_eff")
    ax.set_xticks(list(n_values))
    ax.grid(alpha=0.3)
    for ax, n, d in zip(axes[0, 1:], n_values, maps or []):
        lo, hi = np.percentile(d, [1, 99])
        ax.imshow(d, cmap="gray", vmin=lo, vmax=hi, extent=_extent_mm(d.shape, pitch))
        ax.set_title(f"D_eff, N={n}")
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
