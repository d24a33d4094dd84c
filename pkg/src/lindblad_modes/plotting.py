"""Static figures of observable tables, rendered off-screen next to the CSV."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLES = ("-", "--", ":", "-.")
# populations that never exceed this are left out of the figure
POPULATION_FLOOR = 1e-3


def _split(name):
    """``(method, quantity)`` from a column name such as ``oracle.pop_2``."""
    if name.startswith("td."):
        return name[3:], "trace distance"
    method, _, quantity = name.rpartition(".")
    return method, quantity


def _family(quantity):
    return "populations" if quantity.startswith("pop_") else quantity


def plot_observables(times, table, path, title=""):
    """One panel per observable family; methods differ by line style, quantities by colour.

    Complex series plot their real part.  Pairwise trace distances share a
    log-scale panel.
    """
    methods, groups = [], {}
    for name, values in table.items():
        method, quantity = _split(name)
        values = np.real(np.asarray(values))
        if quantity.startswith("pop_") and np.max(np.abs(values)) < POPULATION_FLOOR:
            continue
        if method and quantity != "trace distance" and method not in methods:
            methods.append(method)
        groups.setdefault(_family(quantity), []).append((method, quantity, values))

    fig, axes = plt.subplots(len(groups), 1, figsize=(6.4, 1.9 * len(groups) + 0.8),
                             sharex=True, squeeze=False, layout="constrained")
    colours = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for ax, (family, members) in zip(axes[:, 0], groups.items()):
        quantities = list(dict.fromkeys(q if family != "trace distance" else m
                                        for m, q, _ in members))
        for method, quantity, values in members:
            key = quantity if family != "trace distance" else method
            colour = colours[quantities.index(key) % len(colours)]
            style = STYLES[methods.index(method) % len(STYLES)] if method in methods else "-"
            if family == "trace distance":
                ax.semilogy(times, np.maximum(values, 1e-17), color=colour, lw=1.2, label=method)
            else:
                ax.plot(times, values, color=colour, ls=style, lw=1.2)
        ax.set_ylabel(family)
        ax.grid(alpha=0.3)
        flat = np.concatenate([v for _, _, v in members])
        if family != "trace distance" and np.ptp(flat) < 1e-9 * max(1.0, np.max(np.abs(flat))):
            # a conserved quantity: show it on a readable scale instead of the rounding noise
            centre = float(np.mean(flat))
            ax.set_ylim(centre - 0.05 * max(1.0, abs(centre)), centre + 0.05 * max(1.0, abs(centre)))
            ax.ticklabel_format(axis="y", useOffset=False)
        if family == "trace distance":
            ax.legend(fontsize="x-small", frameon=False)
        elif len(quantities) > 1:
            handles = [plt.Line2D([], [], color=colours[i % len(colours)], label=q.replace("pop_", "n="))
                       for i, q in enumerate(quantities)]
            ax.legend(handles=handles, fontsize="x-small", frameon=False,
                      ncol=min(len(quantities), 6), loc="best")
    if len(methods) > 1:
        handles = [plt.Line2D([], [], color="0.3", ls=STYLES[i % len(STYLES)], label=m)
                   for i, m in enumerate(methods)]
        fig.legend(handles=handles, loc="outside upper right", ncol=len(methods),
                   fontsize="small", frameon=False)
    axes[-1, 0].set_xlabel("t")
    if title:
        fig.suptitle(title, fontsize="medium", x=0.02, ha="left")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
