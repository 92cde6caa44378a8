"""Matplotlib figures for the report stage (file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 8,
    "axes.labelsize": 8,
    "axes.titlesize": 9,
    "legend.fontsize": 6,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "lines.linewidth": 1.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.dpi": 100,
    "savefig.dpi": 120,
}


def _save(fig, path) -> None:
    # no Software/date metadata, so reruns give identical bytes
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def unit_errors_figure(path, t, unit_ids, amplitude, phase, eps_a, eps_p, title: str) -> None:
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(9, 5.5), sharex=True)
        for j, uid in enumerate(unit_ids):
            axes[0, 0].plot(t, amplitude[:, j], label=uid)
            axes[0, 1].plot(t, eps_a[:, j] * 100, label=uid)
            axes[1, 0].plot(t, phase[:, j], label=uid)
            axes[1, 1].plot(t, eps_p[:, j], label=uid)
        axes[0, 0].set_ylabel("amplitude (V)")
        axes[0, 1].set_ylabel("relative amplitude error (%)")
        axes[1, 0].set_ylabel("phase (rad)")
        axes[1, 1].set_ylabel("phase error (rad)")
        for ax in axes[1]:
            ax.set_xlabel("t (s)")
        axes[0, 0].legend(ncol=4)
        fig.suptitle(title)
        fig.tight_layout()
        _save(fig, path)


def q_monitor_figure(path, t, series: dict[str, tuple[np.ndarray, float]]) -> None:
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(series), 1, figsize=(6, 2.4 * len(series)), sharex=True)
        for ax, (kind, (q, limit)) in zip(np.atleast_1d(axes), series.items()):
            ax.semilogy(t, np.maximum(q, 1e-300), label="Q")
            ax.axhline(limit, color="r", ls="--", label="control limit")
            ax.set_ylabel(f"Q ({kind})")
            ax.legend()
        np.atleast_1d(axes)[-1].set_xlabel("t (s)")
        fig.tight_layout()
        _save(fig, path)


def pair_sums_figure(path, pairs: dict[str, list[tuple[str, float]]]) -> None:
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(pairs), 1, figsize=(8, 2.6 * len(pairs)))
        for ax, (kind, items) in zip(np.atleast_1d(axes), pairs.items()):
            labels = [p for p, _ in items]
            ax.bar(range(len(items)), [max(v, 1e-300) for _, v in items])
            ax.set_yscale("log")
            ax.set_xticks(range(len(items)), labels, rotation=90)
            ax.set_ylabel(f"sum of Q ({kind})")
        fig.tight_layout()
        _save(fig, path)


def triple_q_figure(path, t, traces: dict[str, dict[str, tuple[np.ndarray, float]]],
                    reference: dict[str, str]) -> None:
    kinds = list(traces)
    rows = max(len(v) for v in traces.values())
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(rows, len(kinds), figsize=(4 * len(kinds), 1.3 * rows + 0.6),
                                 sharex=True, squeeze=False)
        for c, kind in enumerate(kinds):
            axes[0, c].set_title(f"{kind}, with {reference[kind]}")
            for r in range(len(traces[kind]), rows):
                axes[r, c].set_visible(False)
            for r, (uid, (q, limit)) in enumerate(traces[kind].items()):
                ax = axes[r, c]
                ax.semilogy(t, np.maximum(q, 1e-300))
                ax.axhline(limit, color="r", ls="--")
                ax.set_ylabel(uid)
        for ax in axes[-1]:
            ax.set_xlabel("t (s)")
        fig.tight_layout()
        _save(fig, path)


def current_errors_figure(path, t, conv_a, conv_p, healed_a, healed_p) -> None:
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 4.5), sharex=True)
        ax1.plot(t, conv_a * 100, label="all units")
        ax1.plot(t, healed_a * 100, label="abnormal units excluded")
        ax1.set_ylabel("relative amplitude error (%)")
        ax1.legend()
        ax2.plot(t, conv_p, label="all units")
        ax2.plot(t, healed_p, label="abnormal units excluded")
        ax2.set_ylabel("phase error (rad)")
        ax2.set_xlabel("t (s)")
        fig.tight_layout()
        _save(fig, path)
