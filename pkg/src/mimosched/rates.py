"""Exact SINR/rate evaluation, the separable surrogate rate, and the ESR/Sat metrics.

All logarithms are natural; rates are in nats per RBG use and QoS targets in
nats per frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beamforming import PrecoderSet, TransceiverSet
from .scenario import Association, ChannelTensor

D_CLAMP = float(np.log(1e-12))
ETA_CLAMP = 1.0 - 1e-12
PSI_SENTINEL = -1e9


@dataclass(frozen=True)
class Schedule:
    """Binary assignment ``b[k, c, r]`` and per-BS layer counts ``a[m, c, r]``."""

    b: np.ndarray
    a: np.ndarray

    @classmethod
    def from_array(cls, b, association: Association) -> Schedule:
        b = np.asarray(b).astype(bool)
        a = np.einsum("mk,kcr->mcr", association.served.astype(np.int64), b.astype(np.int64))
        return cls(b=b, a=a)

    @classmethod
    def empty(cls, association: Association, n_carriers: int, rbg_count: int) -> Schedule:
        return cls.from_array(np.zeros((association.n_ue, n_carriers, rbg_count), bool), association)

    def tobytes(self) -> bytes:
        return np.ascontiguousarray(self.b, dtype=np.uint8).tobytes()


def _b_of(schedule) -> np.ndarray:
    return np.asarray(getattr(schedule, "b", schedule))


def _noise(sigma2, c=None):
    s = np.asarray(sigma2, dtype=float)
    if s.ndim == 0 or c is None:
        return s
    return s[c]


def _noise_grid(sigma2, C: int) -> np.ndarray:
    s = np.asarray(sigma2, dtype=float)
    return np.broadcast_to(s if s.ndim else s[None], (C,))


# --- exact evaluation -------------------------------------------------------

def received_amplitudes(effective: np.ndarray, precoders: PrecoderSet, c: int, r: int) -> np.ndarray:
    """``Z[k, j] = u_k^H sum_l H_{l,k} w_{l,j}`` on one RBG, shape (K, K)."""
    g = effective[:, :, c, r]  # (M, K, N_t)
    w = precoders.w[:, :, c, r]
    return np.einsum("lkt,ljt->kj", g, w)


def exact_sinr_all(schedule, precoders: PrecoderSet, channels: ChannelTensor,
                   transceivers: TransceiverSet, sigma2, effective=None) -> np.ndarray:
    """SINR of every UE on every RBG with full inter-cell interference, shape (K, C, R).

    Unscheduled UEs get SINR 0.
    """
    b = _b_of(schedule).astype(bool)
    K, C, R = b.shape
    if effective is None:
        effective = transceivers.effective_channels(channels)
    noise = _noise_grid(sigma2, C)
    out = np.zeros((K, C, R))
    for c in range(C):
        for r in range(R):
            if not b[:, c, r].any():
                continue
            z = np.abs(received_amplitudes(effective, precoders, c, r)) ** 2
            sig = np.diag(z).copy()
            interf = z.sum(axis=1) - sig
            out[:, c, r] = np.where(b[:, c, r], sig / (interf + noise[c]), 0.0)
    return out


def exact_sinr(schedule, precoders, channels, transceivers, sigma2, k, c, r) -> float:
    """SINR of UE ``k`` on RBG ``(c, r)``; 0 when unscheduled."""
    b = _b_of(schedule)
    if not b[k, c, r]:
        return 0.0
    u = transceivers.u[k, c, r].conj()
    h = channels.h[:, k, c, r]  # (M, N_r, N_t)
    amp = np.einsum("i,mit,mjt->j", u, h, precoders.w[:, :, c, r])
    sig = abs(amp[k]) ** 2
    interf = np.sum(np.abs(amp) ** 2) - sig
    return float(sig / (interf + _noise(sigma2, c)))


def exact_rate(schedule, precoders, channels, transceivers, sigma2, k, c, r) -> float:
    b = _b_of(schedule)
    if not b[k, c, r]:
        return 0.0
    return float(np.log1p(exact_sinr(schedule, precoders, channels, transceivers, sigma2, k, c, r)))


def exact_rates(schedule, precoders, channels, transceivers, sigma2, effective=None) -> np.ndarray:
    """``ln(1 + b * sinr)`` for every (k, c, r)."""
    b = _b_of(schedule).astype(float)
    return np.log1p(b * exact_sinr_all(schedule, precoders, channels, transceivers, sigma2, effective))


# --- simplified SINR chain ----------------------------------------------------

def per_bs_sinr_component(lam, w_hat_norm, a_m, p_m, sigma2):
    """SINR share from one serving BS: ``lam^2 P / (A sigma^2 ||w_hat||^2)``."""
    return lam ** 2 * p_m / (a_m * sigma2 * w_hat_norm ** 2)


def simplified_sinr(transceivers: TransceiverSet, precoders: PrecoderSet, association: Association,
                    p_m, sigma2, k, c, r) -> float:
    """Coherent-sum SINR with interference from non-serving BSs removed."""
    bs = list(association.serving[k])
    lam = transceivers.lam[k, c, r]
    amp = sum(lam * np.sqrt(p_m / precoders.a[m, c, r]) / precoders.w_hat_norm[m, k, c, r] for m in bs)
    return float(abs(amp) ** 2 / _noise(sigma2, c))


def jt_lower_bound_sinr(transceivers, precoders, association, p_m, sigma2, k, c, r) -> float:
    """Sum of per-BS components, a lower bound on :func:`simplified_sinr`."""
    lam = transceivers.lam[k, c, r]
    return float(sum(
        per_bs_sinr_component(lam, precoders.w_hat_norm[m, k, c, r], precoders.a[m, c, r], p_m,
                              _noise(sigma2, c))
        for m in association.serving[k]))


def jensen_separated_rate(components) -> float:
    """``sum_m ln(|B| gamma_m) / |B|``, never above ``ln(sum_m gamma_m)``."""
    g = np.asarray(components, dtype=float)
    return float(np.mean(np.log(g.size * g)))


# --- surrogate ----------------------------------------------------------------

@dataclass(frozen=True)
class RateCoefficients:
    """Precomputed surrogate-rate terms.

    Attributes
    ----------
    psi : ndarray, shape (M, K, C, R)
        Single-user log-SNR term, 0 on non-serving links, ``PSI_SENTINEL`` where
        the served link has no gain.
    psi_tilde : ndarray, shape (M, K, C, R)
        ``psi + ln |B_k|``; equals ``psi`` for single-BS UEs.
    eta : ndarray, shape (M, C, R, K, K)
        Normalized squared correlation of right vectors at BS m, 0 unless both
        UEs are attached to m and distinct.
    d : ndarray, shape (M, C, R, K, K)
        ``ln(1 - eta)`` clamped at ``D_CLAMP``.
    served : ndarray of bool, shape (M, K)
    n_serving : ndarray of int, shape (K,)
    nt : int
        Layer cap per BS and RBG.
    """

    psi: np.ndarray
    psi_tilde: np.ndarray
    eta: np.ndarray
    d: np.ndarray
    served: np.ndarray
    n_serving: np.ndarray
    nt: int

    @property
    def shape(self):
        """``(M, K, C, R)``."""
        return self.psi.shape


def correlation_to_penalty(eta):
    eta = np.asarray(eta, dtype=float)
    return np.where(eta >= ETA_CLAMP, D_CLAMP, np.log1p(-np.minimum(eta, ETA_CLAMP)))


def compute_coefficients(transceivers: TransceiverSet, association: Association, p_m,
                         sigma2) -> RateCoefficients:
    M, K, C, R, nt = transceivers.v.shape
    served = association.served
    n_serving = association.n_serving
    noise = _noise_grid(sigma2, C)

    vnorm2 = np.sum(np.abs(transceivers.v) ** 2, axis=-1)  # (M, K, C, R)
    snr = transceivers.lam[None] ** 2 * vnorm2 * p_m / noise[None, None, :, None]
    live = served[:, :, None, None] & (snr > 0)
    psi = np.where(live, np.log(np.where(live, snr, 1.0)), 0.0)
    psi = np.where(served[:, :, None, None] & ~live, PSI_SENTINEL, psi)
    psi_tilde = np.where(live, psi + np.log(n_serving)[None, :, None, None], psi)

    eta = np.zeros((M, C, R, K, K))
    for m in range(M):
        ues = np.flatnonzero(served[m])
        if ues.size < 2:
            continue
        vm = transceivers.v[m, ues]  # (n, C, R, N_t)
        nrm = np.sqrt(vnorm2[m, ues])
        vn = vm / np.where(nrm > 0, nrm, 1.0)[..., None]
        corr = np.abs(np.einsum("jcrt,kcrt->crjk", vn.conj(), vn)) ** 2
        corr = np.minimum(corr, 1.0)
        idx = np.arange(ues.size)
        corr[:, :, idx, idx] = 0.0
        eta[m][np.ix_(range(C), range(R), ues, ues)] = corr
    d = correlation_to_penalty(eta)
    return RateCoefficients(psi=psi, psi_tilde=psi_tilde, eta=eta, d=d, served=served,
                            n_serving=n_serving, nt=nt)


def surrogate_rates(b, coeffs: RateCoefficients) -> np.ndarray:
    """Per-UE per-RBG surrogate rate for one or a batch of schedules.

    ``b`` has shape ``(..., K, C, R)``; the result has the same shape.
    """
    b = np.asarray(_b_of(b), dtype=float)
    served = coeffs.served.astype(float)
    a = np.einsum("mk,...kcr->...mcr", served, b)
    interf = np.einsum("mcrjk,...jcr->...mkcr", coeffs.d, b)
    ln_a = np.log(np.maximum(a, 1.0))
    per_bs = coeffs.psi_tilde + interf - ln_a[..., :, None, :, :]
    per_bs = np.where(coeffs.served[:, :, None, None], per_bs, 0.0)
    return b * per_bs.sum(axis=-4) / coeffs.n_serving[:, None, None]


def approx_rate(schedule, coeffs: RateCoefficients, k: int, c: int, r: int) -> float:
    b = np.asarray(_b_of(schedule), dtype=float)
    if not b[k, c, r]:
        return 0.0
    bcr = b[:, c, r]
    total = 0.0
    for m in np.flatnonzero(coeffs.served[:, k]):
        a_m = float(coeffs.served[m] @ bcr)
        total += coeffs.psi_tilde[m, k, c, r] + coeffs.d[m, c, r, :, k] @ bcr - np.log(a_m)
    return float(total / coeffs.n_serving[k])


def qos_arrays(qos_targets, n_ue: int):
    """``(mask, targets)`` arrays from a ``{ue: target}`` mapping."""
    mask = np.zeros(n_ue, dtype=bool)
    targets = np.zeros(n_ue)
    for j, q in dict(qos_targets or {}).items():
        mask[j] = True
        targets[j] = q
    return mask, targets


def penalized_total(per_ue_total, qos_mask, targets, rho) -> np.ndarray:
    """``sum_{k not in Q} T_k + rho * sum_{j in Q} min(T_j, Q_j)`` over the last axis."""
    t = np.asarray(per_ue_total, dtype=float)
    free = np.where(qos_mask, 0.0, t).sum(axis=-1)
    capped = np.where(qos_mask, np.minimum(t, targets), 0.0).sum(axis=-1)
    return free + rho * capped


def surrogate_objective(schedule, coeffs: RateCoefficients, qos_targets, rho) -> float:
    totals = surrogate_rates(schedule, coeffs).sum(axis=(-2, -1))
    mask, targets = qos_arrays(qos_targets, coeffs.shape[1])
    return float(penalized_total(totals, mask, targets, rho))


def effective_sum_rate(schedule, rates, qos_targets) -> float:
    """ESR from exact per-RBG rates: QoS UEs contribute at most their target."""
    rates = np.asarray(rates, dtype=float) * np.asarray(_b_of(schedule), dtype=float)
    mask, targets = qos_arrays(qos_targets, rates.shape[0])
    return float(penalized_total(rates.sum(axis=(1, 2)), mask, targets, 1.0))


def satisfaction_rate(schedule, rates, qos_targets) -> float:
    targets = dict(qos_targets or {})
    if not targets:
        return 1.0
    rates = np.asarray(rates, dtype=float) * np.asarray(_b_of(schedule), dtype=float)
    totals = rates.sum(axis=(1, 2))
    return sum(totals[j] >= q for j, q in targets.items()) / len(targets)


def qos_shortfall(rates, qos_targets) -> dict[int, float]:
    totals = np.asarray(rates, dtype=float).sum(axis=(1, 2))
    return {int(j): float(max(q - totals[j], 0.0)) for j, q in sorted(dict(qos_targets or {}).items())}
