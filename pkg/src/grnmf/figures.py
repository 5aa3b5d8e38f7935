"""Figure rendering for the command-line report paths.

All entry points take data plus an output path and write a PNG next to
the delimited output files.  The Agg backend keeps rendering headless
and the saved bytes reproducible.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 150, "metadata": {"Software": None}}


def save_objective_trace(trace, path):
    trace = np.asarray(trace, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(trace.size), trace, lw=1.2)
    if trace.min() > 0:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.grid(True, which="both", ls=":", alpha=0.5)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_energy_map(energy, path, width=None, height=None):
    """Outlier energy per pixel, as an image when the scene shape is known."""
    energy = np.asarray(energy, dtype=float).ravel()
    fig, ax = plt.subplots(figsize=(6, 4))
    if width and height and width * height == energy.size:
        im = ax.imshow(energy.reshape(height, width), cmap="inferno")
        fig.colorbar(im, ax=ax, label="column energy")
        ax.set_xticks([])
        ax.set_yticks([])
    else:
        ax.plot(energy, lw=0.8)
        ax.set_xlabel("pixel")
        ax.set_ylabel("column energy")
        ax.grid(True, ls=":", alpha=0.5)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_endmember_spectra(M, path, M_ref=None):
    """Estimated spectra, optionally overlaid on reference spectra."""
    M = np.asarray(M, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    for k in range(M.shape[1]):
        ax.plot(M[:, k], lw=1.2, label="endmember %d" % (k + 1))
    if M_ref is not None:
        M_ref = np.asarray(M_ref, dtype=float)
        for k in range(M_ref.shape[1]):
            ax.plot(M_ref[:, k], lw=0.8, ls="--", color="k", alpha=0.6)
    ax.set_xlabel("band")
    ax.set_ylabel("reflectance")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_interpolation_curves(rows, path):
    """Mean held-out angle vs divergence shape, one curve per mask fraction."""
    fractions = sorted({r["fraction_observed"] for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    for frac in fractions:
        sub = [r for r in rows if r["fraction_observed"] == frac]
        betas = sorted({r["beta"] for r in sub})
        means, stds = [], []
        for b in betas:
            vals = np.array([r["heldout_asam"] for r in sub if r["beta"] == b])
            means.append(vals.mean())
            stds.append(vals.std())
        ax.errorbar(betas, means, yerr=stds, marker="o", capsize=3,
                    label="%d%% observed" % round(100 * frac))
    ax.set_xlabel("beta")
    ax.set_ylabel("held-out spectral angle (rad)")
    ax.grid(True, ls=":", alpha=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_detection_overview(energy, path, mask_true=None, threshold=None):
    """Sorted energies with the detection threshold, colored by truth."""
    energy = np.asarray(energy, dtype=float).ravel()
    order = np.argsort(energy)
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(energy.size)
    if mask_true is not None:
        mask_true = np.asarray(mask_true, dtype=bool).ravel()[order]
        ax.scatter(x[~mask_true], energy[order][~mask_true], s=4, label="linear")
        ax.scatter(x[mask_true], energy[order][mask_true], s=4, label="nonlinear")
        ax.legend(fontsize=8)
    else:
        ax.plot(x, energy[order], lw=0.8)
    if threshold is not None:
        ax.axhline(threshold, color="r", ls="--", lw=1, label="threshold")
    ax.set_xlabel("pixels (sorted)")
    ax.set_ylabel("column energy")
    ax.grid(True, ls=":", alpha=0.5)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_experiment_summary(rows, path):
    """Aggregate metric bars per experiment cell."""
    labels = ["%s K=%s %s" % (r.get("model", "?"), r.get("K", "?"),
                              "pure" if r.get("pure_pixels") else "no-pure")
              for r in rows]
    asam_vals = [r.get("asam", float("nan")) for r in rows]
    gmse_vals = [r.get("gmse_sq", float("nan")) for r in rows]
    x = np.arange(len(rows))
    fig, axes = plt.subplots(2, 1, figsize=(max(6, 0.5 * len(rows)), 6), sharex=True)
    axes[0].bar(x, asam_vals)
    axes[0].set_ylabel("aSAM (rad)")
    axes[1].bar(x, gmse_vals)
    axes[1].set_ylabel("squared abundance MSE")
    axes[1].set_xticks(x)
    axes[1].set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    for ax in axes:
        ax.grid(True, axis="y", ls=":", alpha=0.5)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
