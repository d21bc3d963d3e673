"""Eigen-based transceivers and EZF precoding with equal power split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Association, ChannelTensor

COND_LIMIT = 1e10


class PrecoderError(ValueError):
    """EZF precoder cannot be built for a scheduled set."""


def svd_rank1_parts(matrix):
    """Dominant singular triple of ``matrix``.

    Returns ``(lam, left, right)`` with ``matrix ~ lam * left @ right.conj().T``.
    The phase is fixed so the largest-magnitude entry of ``right`` is real
    and positive; ``left`` is rotated by the same phase to keep the triple
    consistent. An all-zero matrix gives ``lam = 0`` and first basis vectors.
    """
    a = np.asarray(matrix, dtype=np.complex128)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    n_left, n_right = a.shape
    if not np.any(a):
        e_l = np.zeros(n_left, dtype=np.complex128)
        e_r = np.zeros(n_right, dtype=np.complex128)
        e_l[0] = e_r[0] = 1.0
        return 0.0, e_l, e_r
    t, s, vh = np.linalg.svd(a, full_matrices=False)
    left, right = t[:, 0], vh[0].conj()
    idx = int(np.argmax(np.abs(right)))
    phase = right[idx] / abs(right[idx])
    # H = lam * t v^H is invariant under t -> t p*, v -> v p* (|p| = 1)
    right = right * np.conj(phase)
    left = left * np.conj(phase)
    return float(s[0]), left, right


def aggregate_jt_channel(channels: ChannelTensor, association: Association, i: int,
                         c: int, r: int) -> np.ndarray:
    """Horizontally stacked ``[H_m]`` over the serving set of UE ``i``, strongest BS first."""
    bs = association.serving[i]
    if len(bs) < 2:
        raise ValueError(f"UE {i} is not a JT UE (serving set {bs})")
    return np.concatenate([channels.h[m, i, c, r] for m in bs], axis=1)


@dataclass(frozen=True)
class TransceiverSet:
    """Dominant eigenmode per UE and RBG.

    Attributes
    ----------
    lam : ndarray, shape (K, C, R)
        Largest singular value (amplitude) of the served (aggregated) channel.
    v : ndarray, shape (M, K, C, R, N_t)
        Right singular sub-vector per serving BS; zero for non-serving BSs.
    u : ndarray, shape (K, C, R, N_r)
        Unit-norm combiner.
    """

    lam: np.ndarray
    v: np.ndarray
    u: np.ndarray

    def effective_channels(self, channels: ChannelTensor) -> np.ndarray:
        """``u_k^H H_{m,k}`` for every (m, k, c, r), shape (M, K, C, R, N_t)."""
        return np.einsum("kcri,mkcrit->mkcrt", self.u.conj(), channels.h)


def build_transceivers(channels: ChannelTensor, association: Association) -> TransceiverSet:
    M, K, C, R, nr, nt = channels.h.shape
    lam = np.zeros((K, C, R))
    v = np.zeros((M, K, C, R, nt), dtype=np.complex128)
    u = np.zeros((K, C, R, nr), dtype=np.complex128)
    for k, bs in enumerate(association.serving):
        bs = list(bs)
        # (C, R, N_r, |B_k| N_t); batched SVD over RBGs
        stacked = np.concatenate([channels.h[m, k] for m in bs], axis=-1)
        t, s, vh = np.linalg.svd(stacked, full_matrices=False)
        left = t[..., :, 0]
        right = vh[..., 0, :].conj()
        idx = np.argmax(np.abs(right), axis=-1)
        pivot = np.take_along_axis(right, idx[..., None], axis=-1)[..., 0]
        mag = np.abs(pivot)
        phase = np.where(mag > 0, pivot / np.where(mag > 0, mag, 1.0), 1.0)
        right = right * np.conj(phase)[..., None]
        left = left * np.conj(phase)[..., None]
        lam[k] = s[..., 0]
        u[k] = left
        for i, m in enumerate(bs):
            v[m, k] = right[..., i * nt:(i + 1) * nt]
    return TransceiverSet(lam=lam, v=v, u=u)


@dataclass(frozen=True)
class PrecoderSet:
    """Normalized EZF precoders for one schedule.

    Attributes
    ----------
    w : ndarray, shape (M, K, C, R, N_t)
        Zero wherever the UE is unscheduled or BS m does not serve it.
    w_hat_norm : ndarray, shape (M, K, C, R)
        Norm of the un-normalized EZF column (0 where undefined).
    a : ndarray, shape (M, C, R)
        Number of UEs scheduled at BS m on RBG (c, r).
    """

    w: np.ndarray
    w_hat_norm: np.ndarray
    a: np.ndarray


def ezf_rbg(v_cr: np.ndarray, served: np.ndarray, b_cr: np.ndarray, p_m: float, where=""):
    """EZF precoders of every BS on one RBG.

    ``v_cr`` has shape (M, K, N_t). Returns ``(w, w_hat_norm, a)`` with shapes
    (M, K, N_t), (M, K) and (M,).
    """
    M, K, nt = v_cr.shape
    w = np.zeros_like(v_cr)
    w_norm = np.zeros((M, K))
    a = np.zeros(M, dtype=np.int64)
    for m in range(M):
        ues = np.flatnonzero(served[m] & b_cr)
        a[m] = ues.size
        if ues.size == 0:
            continue
        if ues.size > nt:
            raise PrecoderError(f"BS {m} RBG {where}: {ues.size} scheduled UEs exceed N_t={nt}")
        v_hat = v_cr[m, ues].T
        gram = v_hat.conj().T @ v_hat
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise PrecoderError(
                f"BS {m} RBG {where}: rank-deficient UE set {ues.tolist()} (cond={cond:.3g})")
        w_hat = v_hat @ np.linalg.inv(gram)
        norms = np.linalg.norm(w_hat, axis=0)
        w[m, ues] = (w_hat * (np.sqrt(p_m / ues.size) / norms)).T
        w_norm[m, ues] = norms
    return w, w_norm, a


def build_ezf_precoders(transceivers: TransceiverSet, schedule, association: Association,
                        p_m: float) -> PrecoderSet:
    """EZF precoders ``V (V^H V)^{-1}`` rescaled to power ``p_m / A_m`` per column.

    Raises :class:`PrecoderError` when a BS carries more than N_t layers or
    its stacked right vectors are (numerically) rank deficient.
    """
    b = np.asarray(getattr(schedule, "b", schedule), dtype=bool)
    M, K, C, R, nt = transceivers.v.shape
    served = association.served
    w = np.zeros_like(transceivers.v)
    w_norm = np.zeros((M, K, C, R))
    a = np.zeros((M, C, R), dtype=np.int64)
    for c in range(C):
        for r in range(R):
            if not b[:, c, r].any():
                continue
            w[:, :, c, r], w_norm[:, :, c, r], a[:, c, r] = ezf_rbg(
                transceivers.v[:, :, c, r], served, b[:, c, r], p_m, where=f"({c},{r})")
    return PrecoderSet(w=w, w_hat_norm=w_norm, a=a)
