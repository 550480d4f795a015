"""Legacy benchmark: RSS handover with a 7 dB margin, all free RRBs at P_max."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .environment import Action, ActionSpace, encode_action


@dataclass(frozen=True)
class BaselineState:
    serving_bs: int
    ho_timer: int = 0


@njit(cache=True)
def baseline_key(rss, free, serving, ho_ok, margin_db, n_bs, n_rrb, n_pow):
    """Action key of the RSS scheme.

    Handover to the strongest BS only when it beats the serving one by more
    than ``margin_db``, the handover window is open and the target has a
    free RRB. The power index 0 is P_max.
    """
    target = serving
    if ho_ok:
        best = 0
        for b in range(1, n_bs):
            if rss[b] > rss[best]:
                best = b
        if best != serving and rss[best] - rss[serving] > margin_db and free[best] >= 1:
            target = best
    r = min(free[target], n_rrb)
    return encode_action(target, r, 0, serving, n_bs, n_rrb, n_pow)


def baseline_action(state: BaselineState, rss_per_bs: Sequence[float], occupancy: Sequence[int],
                    space: ActionSpace, margin_db: float = 7.0,
                    frame_boundary: bool = True) -> Action:
    rss = np.asarray(rss_per_bs, dtype=float)
    free = np.asarray(occupancy, dtype=np.int64)
    if rss.shape[0] != space.n_bs or free.shape[0] != space.n_bs:
        raise ValueError("rss and occupancy must cover every BS")
    key = baseline_key(rss, free, state.serving_bs, state.ho_timer == 0 and frame_boundary,
                       margin_db, space.n_bs, space.n_rrb, space.n_pow)
    return space.action(int(key), state.serving_bs)
