"""End-to-end instance: scenario -> channels -> association -> transceivers -> coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beamforming import (
    PrecoderError,
    TransceiverSet,
    build_ezf_precoders,
    build_transceivers,
    ezf_rbg,
)
from .rates import (
    RateCoefficients,
    Schedule,
    compute_coefficients,
    effective_sum_rate,
    exact_rates,
    satisfaction_rate,
)
from .scenario import (
    Association,
    ChannelTensor,
    Scenario,
    ScenarioConfig,
    associate_users,
    generate_scenario,
    select_qos_users,
    synthesize_channels,
)


@dataclass(frozen=True)
class NetworkInstance:
    """One drop of the network with everything the schedulers consume."""

    config: ScenarioConfig
    scenario: Scenario
    channels: ChannelTensor
    association: Association
    transceivers: TransceiverSet
    coefficients: RateCoefficients
    p_m: float
    sigma2: np.ndarray  # per carrier, mW
    _effective: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def shape(self):
        """``(M, K, C, R)``."""
        return self.coefficients.shape

    @property
    def qos_targets(self) -> dict[int, float]:
        return self.association.qos_targets

    @property
    def effective_channels(self) -> np.ndarray:
        if "g" not in self._effective:
            self._effective["g"] = self.transceivers.effective_channels(self.channels)
        return self._effective["g"]

    def schedule(self, b) -> Schedule:
        return Schedule.from_array(b, self.association)

    def exact_rates(self, b) -> np.ndarray:
        """Per-RBG exact rates after a full EZF rebuild; raises PrecoderError."""
        b = np.asarray(getattr(b, "b", b), dtype=bool)
        pre = build_ezf_precoders(self.transceivers, b, self.association, self.p_m)
        return exact_rates(b, pre, self.channels, self.transceivers, self.sigma2,
                           effective=self.effective_channels)

    def rbg_exact_rates(self, b_cr, c: int, r: int) -> np.ndarray:
        """Exact rates of all UEs on one RBG, shape (K,)."""
        b_cr = np.asarray(b_cr, dtype=bool)
        w, _, _ = ezf_rbg(self.transceivers.v[:, :, c, r], self.association.served, b_cr, self.p_m,
                          where=f"({c},{r})")
        z = np.abs(np.einsum("lkt,ljt->kj", self.effective_channels[:, :, c, r], w)) ** 2
        sig = np.diag(z).copy()
        sinr = np.where(b_cr, sig / (z.sum(axis=1) - sig + self.sigma2[c]), 0.0)
        return np.log1p(sinr)

    def try_exact_rates(self, b):
        try:
            return self.exact_rates(b)
        except PrecoderError:
            return None

    def metrics(self, b) -> dict:
        """Exact-rate ESR (nats) and Sat for a schedule."""
        rates = self.exact_rates(b)
        return {
            "rates": rates,
            "esr": effective_sum_rate(b, rates, self.qos_targets),
            "sat": satisfaction_rate(b, rates, self.qos_targets),
        }


def build_instance(config: ScenarioConfig) -> NetworkInstance:
    scenario = generate_scenario(config)
    channels = synthesize_channels(scenario)
    association = select_qos_users(scenario, associate_users(channels, config.beta_db))
    transceivers = build_transceivers(channels, association)
    sigma2 = config.noise_power()
    coeffs = compute_coefficients(transceivers, association, config.p_m, sigma2)
    return NetworkInstance(config=config, scenario=scenario, channels=channels,
                           association=association, transceivers=transceivers,
                           coefficients=coeffs, p_m=config.p_m, sigma2=sigma2)
