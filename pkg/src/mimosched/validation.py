"""Input checks shared by the scheduler estimators."""

from __future__ import annotations

import numpy as np

from .network import NetworkInstance


def check_instance(instance) -> NetworkInstance:
    if not isinstance(instance, NetworkInstance):
        raise TypeError(
            f"expected a NetworkInstance (see mimosched.build_instance), got {type(instance).__name__}")
    M, K, C, R = instance.shape
    if instance.association.n_ue != K or instance.transceivers.lam.shape != (K, C, R):
        raise ValueError("instance components disagree on (K, C, R)")
    if not np.all(np.isfinite(instance.coefficients.d)):
        raise ValueError("interference penalties must be finite")
    return instance


def check_schedule(b, shape) -> np.ndarray:
    """Coerce ``b`` (array or Schedule) to a boolean array of ``shape`` (K, C, R)."""
    arr = np.asarray(getattr(b, "b", b))
    if arr.shape != tuple(shape):
        raise ValueError(f"schedule shape {arr.shape} does not match {tuple(shape)}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("schedule entries must be 0 or 1")
    return arr.astype(bool)


def check_qos_targets(qos_targets, n_ue: int) -> dict[int, float]:
    out = {}
    for j, q in dict(qos_targets or {}).items():
        j = int(j)
        if not 0 <= j < n_ue:
            raise ValueError(f"QoS UE index {j} out of range [0, {n_ue})")
        if not np.isfinite(q) or q < 0:
            raise ValueError(f"QoS target for UE {j} must be finite and >= 0, got {q}")
        out[j] = float(q)
    return out
