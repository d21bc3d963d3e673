"""Penalty-based block coordinate descent over the binary schedule, plus an
exhaustive oracle for tiny instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rates import (
    RateCoefficients,
    Schedule,
    penalized_total,
    qos_arrays,
    surrogate_objective,
    surrogate_rates,
)
from .scenario import Association

EXHAUSTIVE_MAX_VARS = 20


@dataclass(frozen=True)
class BcdConfig:
    """Sweep controls.

    ``rho=None`` selects the scale-free default, see :func:`default_rho`.
    ``tol`` is the minimum objective improvement (nats) per sweep to keep going.
    """

    rho: float | None = None
    max_iters: int = 20
    init: str = "zero"
    sweep_order: str = "ue-major-rbg-minor"
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.init not in ("zero", "one", "random"):
            raise ValueError(f"init must be 'zero', 'one' or 'random', got {self.init!r}")
        if self.sweep_order != "ue-major-rbg-minor":
            raise ValueError(f"unsupported sweep_order {self.sweep_order!r}")
        if self.rho is not None and not self.rho >= 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")


def default_rho(coeffs: RateCoefficients, qos_targets) -> float:
    """``10 * max psi / min Q_j``; 1 when there is nothing to penalize."""
    targets = [q for q in dict(qos_targets or {}).values() if q > 0]
    live = coeffs.psi[coeffs.served[:, :, None, None] & (coeffs.psi > -1e8)]
    if not targets or live.size == 0 or live.max() <= 0:
        return 1.0
    return float(10.0 * live.max() / min(targets))


@dataclass
class BcdState:
    """Mutable caches behind the incremental gain.

    ``interf[m, k, c, r]`` holds ``sum_j b_j d[m, c, r, j, k]`` and ``a`` the
    per-BS layer counts, so a coordinate gain needs only O(M K) work.
    """

    coeffs: RateCoefficients
    qos_mask: np.ndarray
    targets: np.ndarray
    rho: float
    b: np.ndarray
    a: np.ndarray = field(init=False)
    interf: np.ndarray = field(init=False)
    per_ue_rbg_rate: np.ndarray = field(init=False)
    per_ue_total: np.ndarray = field(init=False)
    objective: float = field(init=False)
    iteration: int = 0

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float).copy()
        self.refresh()

    def refresh(self):
        """Rebuild every cache from ``b``."""
        co = self.coeffs
        self.a = np.einsum("mk,kcr->mcr", co.served.astype(float), self.b)
        self.interf = np.einsum("mcrjk,jcr->mkcr", co.d, self.b)
        self.per_ue_rbg_rate = surrogate_rates(self.b, co)
        self.per_ue_total = self.per_ue_rbg_rate.sum(axis=(1, 2))
        self.objective = float(penalized_total(self.per_ue_total, self.qos_mask, self.targets, self.rho))

    @property
    def schedule_array(self) -> np.ndarray:
        return self.b.astype(bool)

    def _rbg_rates(self, bcr, interf, a, c, r):
        co = self.coeffs
        ln_a = np.log(np.maximum(a, 1.0))
        per_bs = co.psi_tilde[:, :, c, r] + interf - ln_a[:, None]
        per_bs = np.where(co.served, per_bs, 0.0)
        return bcr * per_bs.sum(axis=0) / co.n_serving

    def _toggle_pair(self, k, c, r):
        """Rates and caches for the RBG with ``b_k`` off and on."""
        co = self.coeffs
        cur = self.b[k, c, r]
        dk = co.d[:, c, r, k, :]
        sk = co.served[:, k].astype(float)
        interf_off = self.interf[:, :, c, r] - cur * dk
        a_off = self.a[:, c, r] - cur * sk
        interf_on = interf_off + dk
        a_on = a_off + sk
        b_off = self.b[:, c, r].copy()
        b_off[k] = 0.0
        b_on = b_off.copy()
        b_on[k] = 1.0
        off = (b_off, interf_off, a_off, self._rbg_rates(b_off, interf_off, a_off, c, r))
        on = (b_on, interf_on, a_on, self._rbg_rates(b_on, interf_on, a_on, c, r))
        return off, on

    def gain(self, k, c, r) -> float:
        return _gain_from_pair(self, *self._toggle_pair(k, c, r), c, r)

    def set(self, k, c, r, value: int) -> None:
        """Assign ``b[k, c, r]`` and update all caches."""
        if float(value) == self.b[k, c, r]:
            return
        off, on = self._toggle_pair(k, c, r)
        self._apply(on if value else off, c, r)

    def _apply(self, side, c, r, delta=None):
        """Commit one side of a toggle.

        With ``delta`` (the exact objective change) the cached objective is
        advanced by it instead of re-summed, so accepted moves never register
        as a rounding-level decrease.
        """
        b_new, interf_new, a_new, rates_new = side
        self.per_ue_total = self.per_ue_total - self.per_ue_rbg_rate[:, c, r] + rates_new
        self.per_ue_rbg_rate[:, c, r] = rates_new
        self.b[:, c, r] = b_new
        self.interf[:, :, c, r] = interf_new
        self.a[:, c, r] = a_new
        if delta is None:
            self.objective = float(penalized_total(self.per_ue_total, self.qos_mask, self.targets,
                                                   self.rho))
        else:
            self.objective += delta


def _gain_from_pair(state: BcdState, off, on, c, r) -> float:
    old = state.per_ue_rbg_rate[:, c, r]
    rate_off, rate_on = off[3], on[3]
    delta = rate_on - rate_off
    mask = state.qos_mask
    free = np.where(mask, 0.0, delta).sum()
    total_off = state.per_ue_total - old + rate_off
    total_on = state.per_ue_total - old + rate_on
    capped = np.where(mask, np.minimum(total_on, state.targets) - np.minimum(total_off, state.targets),
                      0.0).sum()
    return float(free + state.rho * capped)


def make_state(coeffs: RateCoefficients, qos_targets, rho, b=None) -> BcdState:
    M, K, C, R = coeffs.shape
    mask, targets = qos_arrays(qos_targets, K)
    if b is None:
        b = np.zeros((K, C, R))
    return BcdState(coeffs=coeffs, qos_mask=mask, targets=targets, rho=float(rho),
                    b=np.asarray(getattr(b, "b", b), dtype=float))


def gain(state: BcdState, coeffs: RateCoefficients, qos_targets, rho, k, c, r) -> float:
    """``G(b_k^{c,r} = 1) - G(b_k^{c,r} = 0)`` with every other variable fixed.

    ``coeffs``, ``qos_targets`` and ``rho`` must be the ones ``state`` was built with.
    """
    if state.coeffs is not coeffs or state.rho != rho:
        raise ValueError("state was built for different coefficients or rho")
    return state.gain(k, c, r)


def _initial(config: BcdConfig, shape, coeffs: RateCoefficients):
    K, C, R = shape
    if config.init == "zero":
        return np.zeros(shape)
    if config.init == "one":
        b = np.ones(shape)
    else:
        b = np.random.default_rng(config.seed).integers(0, 2, size=shape).astype(float)
    # keep the start inside the layer cap: drop highest-index UEs first
    for m in range(coeffs.served.shape[0]):
        ues = np.flatnonzero(coeffs.served[m])
        for c in range(C):
            for r in range(R):
                on = ues[b[ues, c, r] > 0]
                if on.size > coeffs.nt:
                    b[on[coeffs.nt:], c, r] = 0.0
    return b


def _layer_cap_ok(state: BcdState, k, c, r) -> bool:
    co = state.coeffs
    if state.b[k, c, r]:
        return True
    bs = co.served[:, k]
    return bool(np.all(state.a[bs, c, r] + 1 <= co.nt))


def bcd_schedule(coeffs: RateCoefficients, association: Association | None, qos_targets,
                 config: BcdConfig = BcdConfig(),
                 callback: Callable[[int, BcdState], None] | None = None):
    """Run coordinate sweeps until no variable changes, the improvement drops
    below ``tol``, or ``max_iters`` sweeps are done.

    Returns ``(schedule_array, trace)`` where ``trace[0]`` is the initial
    objective and ``trace[i]`` the objective after sweep ``i``. ``callback``
    is invoked after initialization and after every sweep.
    """
    M, K, C, R = coeffs.shape
    if association is not None and association.n_ue != K:
        raise ValueError("association and coefficients disagree on the number of UEs")
    if qos_targets is None and association is not None:
        qos_targets = association.qos_targets
    rho = default_rho(coeffs, qos_targets) if config.rho is None else float(config.rho)
    state = make_state(coeffs, qos_targets, rho, _initial(config, (K, C, R), coeffs))
    trace = [state.objective]
    if callback is not None:
        callback(0, state)
    for it in range(1, config.max_iters + 1):
        changed = 0
        for k in range(K):
            for c in range(C):
                for r in range(R):
                    off, on = state._toggle_pair(k, c, r)
                    g = _gain_from_pair(state, off, on, c, r)
                    want = 1.0 if (g > 0 and _layer_cap_ok(state, k, c, r)) else 0.0
                    if want != state.b[k, c, r]:
                        state._apply(on if want else off, c, r, delta=abs(g))
                        changed += 1
        state.iteration = it
        trace.append(state.objective)
        if callback is not None:
            callback(it, state)
        if changed == 0 or trace[-1] - trace[-2] < config.tol:
            break
    return state.schedule_array, trace


def _enumerate(n: int, start: int, stop: int) -> np.ndarray:
    """0/1 vectors with indices ``start..stop-1`` in lexicographic order, shape (stop-start, n)."""
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(float)


def exhaustive_schedule(coeffs: RateCoefficients, qos_targets, rho: float = 1.0,
                        objective: str = "surrogate", exact_evaluator=None, chunk: int = 4096):
    """Global maximizer of the penalized objective by full enumeration.

    ``objective="surrogate"`` scores candidates with the surrogate rates;
    ``"exact"`` calls ``exact_evaluator(b)`` which must return the per-RBG
    exact rate array or ``None`` when the precoder cannot be built. Candidates
    that exceed the layer cap are skipped. Ties keep the first candidate in
    lexicographic order (all-zero first).
    """
    M, K, C, R = coeffs.shape
    n = K * C * R
    if n > EXHAUSTIVE_MAX_VARS:
        raise ValueError(f"instance too large for enumeration: K*C*R = {n} > {EXHAUSTIVE_MAX_VARS}")
    if objective not in ("surrogate", "exact"):
        raise ValueError(f"unknown objective {objective!r}")
    if objective == "exact" and exact_evaluator is None:
        raise ValueError("exact objective needs an exact_evaluator")
    mask, targets = qos_arrays(qos_targets, K)
    served = coeffs.served.astype(float)
    best_g, best_b = -np.inf, None
    for start in range(0, 2 ** n, chunk):
        batch = _enumerate(n, start, min(start + chunk, 2 ** n)).reshape(-1, K, C, R)
        a = np.einsum("mk,nkcr->nmcr", served, batch)
        ok = np.all(a <= coeffs.nt, axis=(1, 2, 3))
        if objective == "surrogate":
            vals = penalized_total(surrogate_rates(batch, coeffs).sum(axis=(-2, -1)), mask, targets, rho)
        else:
            vals = np.full(batch.shape[0], -np.inf)
            for i in np.flatnonzero(ok):
                rates = exact_evaluator(batch[i].astype(bool))
                if rates is not None:
                    vals[i] = penalized_total((rates * batch[i]).sum(axis=(1, 2)), mask, targets, rho)
        vals = np.where(ok, vals, -np.inf)
        i = int(np.argmax(vals))
        if vals[i] > best_g:
            best_g, best_b = float(vals[i]), batch[i].astype(bool)
    return best_b, best_g


def check_objective(state: BcdState) -> float:
    """Absolute gap between the cached objective and a from-scratch evaluation."""
    qos = {int(j): float(state.targets[j]) for j in np.flatnonzero(state.qos_mask)}
    return abs(state.objective - surrogate_objective(state.b, state.coeffs, qos, state.rho))


__all__ = [
    "BcdConfig",
    "BcdState",
    "Schedule",
    "bcd_schedule",
    "check_objective",
    "default_rho",
    "exhaustive_schedule",
    "gain",
    "make_state",
]
