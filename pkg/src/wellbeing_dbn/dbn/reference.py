"""A hand-parameterized model on the default structure.

Effect directions follow the study's significant findings: aligned AV
actions raise the user's well-being and misaligned ones lower it, AV
yielding raises trust and the other road user's well-being, robot yielding
raises the user's well-being, yielding intention and higher prior trust
nudge well-being upward. Used for demos and for checking qualitative
trajectory behaviour when no learned model is at hand.
"""

from __future__ import annotations

import numpy as np

from ..core import DEFAULT_N_BINS
from .model import DbnModel, default_structure


def shift_kernel(n: int, p_up: float, p_down: float) -> np.ndarray:
    """Row-stochastic matrix moving one bin up/down, clamped at the ends."""
    k = np.zeros((n, n))
    for s in range(n):
        k[s, min(s + 1, n - 1)] += p_up
        k[s, max(s - 1, 0)] += p_down
        k[s, s] += 1.0 - p_up - p_down
    return k


def reference_model(n_bins: int = DEFAULT_N_BINS) -> DbnModel:
    structure = default_structure(n_bins)
    n = n_bins
    trust_level = np.arange(n) / (n - 1)

    # R regime ------------------------------------------------------------
    w_r = np.zeros((n, n, 2, 2, 2, n))  # w_prev, t_prev, i, al, a_O_prev, w
    for tp in range(n):
        for i in range(2):
            for al in range(2):
                for ao in range(2):
                    if al:
                        up = 0.40 + 0.05 * i + 0.05 * ao + 0.05 * trust_level[tp]
                        down = 0.05
                    else:
                        up = 0.05
                        down = 0.40 + 0.05 * (1 - i) + 0.05 * (1 - ao) + 0.05 * (1 - trust_level[tp])
                    w_r[:, tp, i, al, ao, :] = shift_kernel(n, up, down)

    t_r = np.zeros((n, 2, 2, n))  # t_prev, a_R, al, t
    for ar in range(2):
        for al in range(2):
            up = 0.05 + 0.30 * al + 0.15 * ar
            down = 0.05 + 0.30 * (1 - al) + 0.15 * (1 - ar)
            t_r[:, ar, al, :] = shift_kernel(n, up, down)

    persist_i = np.array([[0.85, 0.15], [0.15, 0.85]])

    wo_r = np.zeros((n, 2, n))  # wO_prev, a_R, wO
    wo_r[:, 0, :] = shift_kernel(n, 0.05, 0.40)
    wo_r[:, 1, :] = shift_kernel(n, 0.40, 0.05)

    # O regime ------------------------------------------------------------
    w_o = np.zeros((n, n, 2, n))  # w_prev, t_prev, a_O, w
    for tp in range(n):
        w_o[:, tp, 0, :] = shift_kernel(n, 0.05, 0.35 + 0.05 * (1 - trust_level[tp]))
        w_o[:, tp, 1, :] = shift_kernel(n, 0.35 + 0.05 * trust_level[tp], 0.05)
    t_o = shift_kernel(n, 0.05, 0.05)
    wo_o = np.zeros((n, 2, n))
    wo_o[:, 0, :] = shift_kernel(n, 0.10, 0.10)
    wo_o[:, 1, :] = shift_kernel(n, 0.10, 0.10)

    arrays = {
        "R": {"w": w_r, "t": t_r, "i": persist_i, "wO": wo_r},
        "O": {"w": w_o, "t": t_o, "i": persist_i, "wO": wo_o},
    }
    return DbnModel.from_arrays(structure, arrays)
