"""Figures for the experiment reports, rendered off-screen to PNG."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from ..stability import joint_popov_line, popov_coeffs, popov_point

_STYLE = {"linewidth": 1.2}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    return path


def plot_pi_bench(result, path) -> Path:
    tr = result.trace
    fig = Figure(figsize=(7, 3.5))
    ax = fig.add_subplot()
    ax.plot(tr["t"], tr["tau_ref"], label="reference", **_STYLE)
    ax.plot(tr["t"], tr["tau_l"], label="output", **_STYLE)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("knee torque (N m)")
    ax.set_title(f"amplitude ratio {result.amplitude_ratio:.3f}, "
                 f"lag {result.phase_lag_deg:.1f} deg")
    ax.legend(loc="upper right")
    return _save(fig, path)


def plot_spring_tables(tables, path) -> Path:
    fig = Figure(figsize=(4 * len(tables), 3.5))
    for k, table in enumerate(tables):
        ax = fig.add_subplot(1, len(tables), k + 1)
        d = np.array([p.deflection for p in table.points])
        ax.plot(d, [p.expected for p in table.points], "-", label="commanded", **_STYLE)
        ax.plot(d, [p.force for p in table.points], "o", label="measured")
        ax.set_xlabel("radial deflection (m)")
        ax.set_ylabel("radial force (N)")
        ax.set_title(table.schedule.label)
        ax.legend(loc="upper left")
    return _save(fig, path)


def plot_tracking(results, path) -> Path:
    fig = Figure(figsize=(7, 5))
    top = fig.add_subplot(2, 1, 1)
    bottom = fig.add_subplot(2, 1, 2, sharex=top)
    top.plot(results[0].trace["t"], results[0].trace["radial_des"], "k--", label="reference",
             **_STYLE)
    for res in results:
        tr = res.trace
        top.plot(tr["t"], tr["radial"], label=res.schedule.label, **_STYLE)
        bottom.plot(tr["t"], 1e3 * (tr["radial_des"] - tr["radial"]), label=res.schedule.label,
                    **_STYLE)
    top.set_ylabel("leg length (m)")
    bottom.set_ylabel("radial error (mm)")
    bottom.set_xlabel("time (s)")
    top.legend(loc="upper right", fontsize="small")
    return _save(fig, path)


def plot_impact(reports, traces, impulse, path, z_nominal=None) -> Path:
    """Knee load, COM height and the two schedule gains around the landing."""
    fig = Figure(figsize=(9, 6))
    axes = [fig.add_subplot(2, 2, k + 1) for k in range(4)]
    for rep in reports:
        if rep.impulse != impulse:
            continue
        tr = traces[(rep.impulse, rep.schedule)]
        t = tr["t"] - rep.impact_time
        axes[0].plot(t, np.abs(tr["tau_l_knee"]), label=rep.schedule, **_STYLE)
        axes[1].plot(t, tr["com_height"], **_STYLE)
        axes[2].plot(t, tr["K_vs"], **_STYLE)
        axes[3].plot(t, tr["K_d"], **_STYLE)
    if z_nominal is not None:
        axes[1].axhline(z_nominal, color="k", linestyle=":", linewidth=0.8)
    labels = ("knee load (N m)", "COM height (m)", "K_vs (N/m)", "K_d (N s/m)")
    for ax, label in zip(axes, labels):
        ax.set_ylabel(label)
        ax.set_xlabel("time from impact (s)")
        ax.set_xlim(-0.1, 1.0)
    axes[0].legend(loc="upper right", fontsize="x-small")
    fig.suptitle(f"impulse {impulse:g} N")
    return _save(fig, path)


def plot_popov(params, K_d, path, omega=None) -> Path:
    """Popov locus of the joint loop with its best Popov line."""
    coeffs = popov_coeffs(params, K_d)
    kvs_max, q = joint_popov_line(params, K_d)
    if omega is None:
        w0 = coeffs.omega_0
        omega = np.logspace(np.log10(w0) - 3, np.log10(w0) + 3, 2000)
    x, y = popov_point(coeffs, params.K_w, omega)
    fig = Figure(figsize=(5, 4))
    ax = fig.add_subplot()
    ax.plot(x, y, label="locus", **_STYLE)
    if np.isfinite(kvs_max):
        label = f"Popov line, K = {kvs_max:.4g}"
        if q > 0:
            xs = np.array([-1.0 / kvs_max, np.max(x)])
            ax.plot(xs, (xs + 1.0 / kvs_max) / q, "k:", linewidth=0.8, label=label)
        else:
            ax.axvline(-1.0 / kvs_max, color="k", linestyle=":", linewidth=0.8, label=label)
    ax.set_xlabel("Re P(jw)")
    ax.set_ylabel("w Im P(jw)")
    ax.set_title(f"K_d = {K_d:.4g} N m s/rad")
    ax.legend(loc="lower right")
    return _save(fig, path)


def plot_swing(trace, path) -> Path:
    fig = Figure(figsize=(7, 3.5))
    ax = fig.add_subplot()
    ax.plot(trace["t"], trace["omega_l_knee"], label="true", **_STYLE)
    ax.plot(trace["t"], trace["omega_l_hat"], "--", label="estimate", **_STYLE)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("knee load velocity (rad/s)")
    ax.legend(loc="upper right")
    return _save(fig, path)
