"""Uniformly sampled signal traces and their CSV form."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..kinematics import _fk

COLUMNS = (
    "t",
    "q_hip", "w_hip", "theta_m_knee", "omega_m_knee", "theta_l_knee", "omega_l_knee",
    "tau_l_knee",
    "tau_out_hip", "tau_out_knee", "tau_ref_hip", "tau_ref_knee",
    "tau_alpha_hip", "tau_alpha_knee",
    "ground_force",
    "foot_x_des", "foot_z_des", "foot_x", "foot_z", "radial_des", "radial",
    "K_vs", "K_des", "K_d", "omega_l_hat",
    "com_height", "com_height_kin", "force_ff_z",
    "saturated", "stance",
)


class Trace:
    """Column store with one row per outer control cycle.

    Each row holds the plant state at the start of the cycle and the
    controller signals computed from it; ``tau_out`` is the last inner-loop
    output of the cycle.
    """

    def __init__(self, columns=COLUMNS):
        self.columns = tuple(columns)
        self.data = {name: [] for name in self.columns}

    def __len__(self):
        return len(self.data[self.columns[0]])

    def __getitem__(self, name) -> np.ndarray:
        return np.asarray(self.data[name], dtype=float)

    def append(self, row: dict):
        for name in self.columns:
            self.data[name].append(float(row[name]))

    def record(self, t, state, ref, signals, loop):
        leg = loop.leg
        geom = leg.geom
        fx, fz = _fk(state[0], state[4], geom.l1, geom.l2)
        foot_meas = signals["foot_meas"]
        ground = leg.ground.ground_height
        body = state[7] if leg.body_mode == "free" else leg.body_z
        self.append({
            "t": t,
            "q_hip": state[0], "w_hip": state[1],
            "theta_m_knee": state[2], "omega_m_knee": state[3],
            "theta_l_knee": state[4], "omega_l_knee": state[5], "tau_l_knee": state[6],
            "tau_out_hip": signals["tau_out"][0], "tau_out_knee": signals["tau_out"][1],
            "tau_ref_hip": signals["tau_ref"][0], "tau_ref_knee": signals["tau_ref"][1],
            "tau_alpha_hip": signals["tau_alpha"][0], "tau_alpha_knee": signals["tau_alpha"][1],
            "ground_force": signals["ground_force"],
            "foot_x_des": ref.x_des[0], "foot_z_des": ref.x_des[1],
            "foot_x": fx, "foot_z": fz,
            "radial_des": math.hypot(ref.x_des[0], ref.x_des[1]),
            "radial": math.hypot(fx, fz),
            "K_vs": signals["K_vs"], "K_des": signals["K_des"], "K_d": signals["K_d"],
            "omega_l_hat": signals["omega_l_hat"],
            "com_height": body,
            "com_height_kin": ground - foot_meas.x[1],
            "force_ff_z": signals["force_ff"][1],
            "saturated": 1.0 if signals["saturated"] else 0.0,
            "stance": 1.0 if signals["phase"] == "stance" else 0.0,
        })

    def window(self, t0: float, t1: float) -> np.ndarray:
        t = self["t"]
        return (t >= t0) & (t < t1)


def _format(x: float) -> str:
    return repr(float(x))


def emit_trace(trace: Trace, path, metadata: dict | None = None) -> Path:
    """Write ``trace`` as CSV and a ``.meta.json`` sidecar next to it."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(trace.columns)
            cols = [trace.data[name] for name in trace.columns]
            for row in zip(*cols):
                writer.writerow([_format(v) for v in row])
        meta = {"columns": list(trace.columns), "rows": len(trace)}
        if metadata:
            meta["scenario"] = metadata
        with open(sidecar_path(path), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"could not write trace to {path}: {exc}") from exc
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def read_trace(path) -> Trace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        trace = Trace(header)
        for row in reader:
            for name, value in zip(header, row):
                trace.data[name].append(float(value))
    return trace
