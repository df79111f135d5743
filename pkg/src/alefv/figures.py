"""Report figures rendered to files alongside the delimited output."""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

PROFILE_FIELDS = [("rho_s", 0), ("u_s", 1), ("p_s", 3),
                  ("rho_g", 4), ("u_g", 5), ("p_g", 7), ("phi_s", 8)]


def profile_figure(path, x, prim, oracle=None, title=""):
    """2D cut of the primitive fields, optionally against the 1D reference."""
    fig, axes = plt.subplots(4, 2, figsize=(9, 11), sharex=True)
    axes = axes.ravel()
    for ax, (name, comp) in zip(axes, PROFILE_FIELDS):
        if oracle is not None:
            ax.plot(oracle[0], oracle[1][:, comp], "-", color="0.4", lw=1.2,
                    label="reference")
        ax.plot(x, prim[:, comp], "o", ms=2.2, color="tab:red", label="scheme")
        ax.set_ylabel(name)
        ax.grid(alpha=0.3)
    axes[0].legend(loc="best", fontsize=8)
    axes[-1].axis("off")
    axes[-2].set_xlabel("x")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def mesh_figure(path, nodes, tris, values=None, title=""):
    fig, ax = plt.subplots(figsize=(6, 6))
    if values is not None:
        t = ax.tripcolor(nodes[:, 0], nodes[:, 1], tris, facecolors=values,
                         cmap="viridis")
        fig.colorbar(t, ax=ax, shrink=0.8)
    ax.triplot(nodes[:, 0], nodes[:, 1], tris, lw=0.25, color="k", alpha=0.6)
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def convergence_figure(path, rows, title=""):
    """rows: list of (label, [(N, err), ...])."""
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    for label, data in rows:
        N = np.array([d[0] for d in data], dtype=float)
        e = np.array([d[1] for d in data])
        ax.loglog(N, e, "o-", label=label)
    ax.set_xlabel("$N_G$")
    ax.set_ylabel("$L_2$ error")
    ax.grid(which="both", alpha=0.3)
    ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
