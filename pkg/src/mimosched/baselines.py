"""Reference schedulers: semi-orthogonal user selection (SUS) and the
QoS-weighted single-user-per-RBG heuristic (mSHS)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .beamforming import TransceiverSet
from .scenario import Association


@dataclass(frozen=True)
class SusConfig:
    alpha: float = 0.5
    max_layers: int | None = None  # None -> min(N_t, 8)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.max_layers is not None and self.max_layers < 1:
            raise ValueError(f"max_layers must be >= 1, got {self.max_layers}")


@dataclass(frozen=True)
class MshsConfig:
    weight_floor: float = 1e-3

    def __post_init__(self):
        if not self.weight_floor >= 0:
            raise ValueError(f"weight_floor must be >= 0, got {self.weight_floor}")


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(n > 0, n, 1.0)


def sus_select(lam: np.ndarray, vectors: np.ndarray, alpha: float, max_layers: int) -> list[int]:
    """Greedy semi-orthogonal selection on one BS and RBG.

    ``lam`` (n,) ranks candidates, ``vectors`` (n, N_t) are their right
    vectors. Returns positions into the candidate list in selection order.
    """
    n = lam.shape[0]
    if n == 0:
        return []
    unit = _unit(vectors)
    order = np.argsort(-lam, kind="stable")
    chosen = [int(order[0])]
    remaining = [int(i) for i in order[1:]]
    while remaining and len(chosen) < max_layers:
        corr = np.abs(unit[remaining].conj() @ unit[chosen].T)  # (rem, chosen)
        ok = [i for i, row in zip(remaining, corr) if np.all(row <= alpha)]
        if not ok:
            break
        # ``remaining`` is already sorted by decreasing lam
        chosen.append(ok[0])
        remaining.remove(ok[0])
    return chosen


def sus_schedule(transceivers: TransceiverSet, association: Association,
                 config: SusConfig = SusConfig()) -> np.ndarray:
    """Per-BS SUS on every RBG; a JT UE is kept only if all its servers pick it."""
    M, K, C, R, nt = transceivers.v.shape
    max_layers = min(nt, 8) if config.max_layers is None else min(config.max_layers, nt)
    served = association.served
    b = np.zeros((K, C, R), dtype=bool)
    for c in range(C):
        for r in range(R):
            votes = np.zeros(K, dtype=int)
            for m in range(M):
                cand = np.flatnonzero(served[m] & (transceivers.lam[:, c, r] > 0))
                picked = sus_select(transceivers.lam[cand, c, r], transceivers.v[m, cand, c, r],
                                    config.alpha, max_layers)
                votes[cand[picked]] += 1
            b[:, c, r] = (votes > 0) & (votes == association.n_serving)
    return b


def mshs_weights(totals: np.ndarray, qos_mask: np.ndarray, targets: np.ndarray,
                 weight_floor: float) -> np.ndarray:
    """``1 + shortfall / Q`` for unmet QoS UEs, ``weight_floor`` otherwise."""
    shortfall = np.maximum(targets - totals, 0.0)
    unmet = qos_mask & (shortfall > 0) & (targets > 0)
    safe = np.where(targets > 0, targets, 1.0)
    return np.where(unmet, 1.0 + shortfall / safe, weight_floor)


def mshs_schedule(transceivers: TransceiverSet, association: Association, qos_targets,
                  rbg_rates: Callable[[np.ndarray, int, int], np.ndarray],
                  config: MshsConfig = MshsConfig()) -> np.ndarray:
    """One UE per BS per RBG, picked by QoS-weighted channel strength.

    RBGs are visited carrier-major. On each RBG the BSs pick in index order
    among UEs whose serving BSs are all still free; a JT pick occupies every
    serving BS. ``rbg_rates(b_cr, c, r)`` returns the exact per-UE rates on
    that RBG and drives the accumulated shortfall.
    """
    M, K, C, R, _ = transceivers.v.shape
    served = association.served
    if qos_targets is None:
        qos_targets = association.qos_targets
    qos_mask = np.zeros(K, dtype=bool)
    targets = np.zeros(K)
    for j, q in qos_targets.items():
        qos_mask[j] = True
        targets[j] = q
    totals = np.zeros(K)
    b = np.zeros((K, C, R), dtype=bool)
    for c in range(C):
        for r in range(R):
            weights = mshs_weights(totals, qos_mask, targets, config.weight_floor)
            score = weights * transceivers.lam[:, c, r]
            busy = np.zeros(M, dtype=bool)
            for m in range(M):
                if busy[m]:
                    continue
                free = ~np.any(served & busy[:, None], axis=0)
                cand = np.flatnonzero(served[m] & free)
                if cand.size == 0:
                    continue
                k = int(cand[np.argmax(score[cand])])
                b[k, c, r] = True
                busy |= served[:, k]
            totals += rbg_rates(b[:, c, r], c, r)
    return b
