"""Network instance construction: geometry, synthetic channels, association, QoS users."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

# path-loss model constants
PATHLOSS_EXPONENT = 3.5
PATHLOSS_REF_DB = 32.4
REF_DISTANCE_M = 1.0
REF_FREQ_HZ = 3.5e9
MIN_DISTANCE_M = 10.0

# named RNG substreams
_STREAM_UE_DROP = 0
_STREAM_FADING = 1
_STREAM_QOS = 2


class ConfigError(ValueError):
    """Raised when a scenario or experiment config fails validation."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class CarrierConfig:
    center_freq_hz: float
    rbg_count: int
    subcarriers_per_rbg: int = 48
    subcarrier_spacing_hz: float = 30e3

    @property
    def rbg_bandwidth_hz(self) -> float:
        return self.subcarriers_per_rbg * self.subcarrier_spacing_hz


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to build a network instance deterministically.

    Positions are in meters, powers in dBm. ``qos_target`` is the per-UE
    rate target in nats per scheduling frame (summed over all RBGs).
    """

    bs_positions: tuple[tuple[float, float, float], ...]
    ue_count: int
    ue_region: tuple[tuple[float, float], tuple[float, float]]
    ue_height: float
    nt: int
    nr: int
    carriers: tuple[CarrierConfig, ...]
    p_m_dbm: float = 10.0
    noise_density_dbm_hz: float = -174.0
    beta_db: float = 5.0
    qos_fraction: float = 1.0 / 3.0
    qos_target: float = 40.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "bs_positions", tuple(tuple(float(x) for x in p) for p in self.bs_positions)
        )
        object.__setattr__(
            self, "ue_region", tuple(tuple(float(x) for x in span) for span in self.ue_region)
        )
        object.__setattr__(
            self,
            "carriers",
            tuple(c if isinstance(c, CarrierConfig) else CarrierConfig(**c) for c in self.carriers),
        )
        self._validate()

    def _validate(self):
        if len(self.bs_positions) < 1:
            raise ConfigError("bs_positions", "at least one BS required")
        for p in self.bs_positions:
            if len(p) != 3 or not all(math.isfinite(x) for x in p):
                raise ConfigError("bs_positions", f"expected finite 3D coordinates, got {p}")
        if int(self.ue_count) != self.ue_count or self.ue_count < 1:
            raise ConfigError("ue_count", f"must be an integer >= 1, got {self.ue_count}")
        if len(self.ue_region) != 2 or any(len(s) != 2 for s in self.ue_region):
            raise ConfigError("ue_region", "expected [[xmin, xmax], [ymin, ymax]]")
        for lo, hi in self.ue_region:
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ConfigError("ue_region", f"invalid span [{lo}, {hi}]")
        if not math.isfinite(self.ue_height):
            raise ConfigError("ue_height", "must be finite")
        if self.nr < 1:
            raise ConfigError("nr", f"must be >= 1, got {self.nr}")
        if self.nt < self.nr:
            raise ConfigError("nt", f"must be >= nr ({self.nr}), got {self.nt}")
        if not self.carriers:
            raise ConfigError("carriers", "at least one carrier required")
        rbg_counts = {c.rbg_count for c in self.carriers}
        if len(rbg_counts) != 1:
            raise ConfigError("carriers", "all carriers must have the same rbg_count")
        for c in self.carriers:
            if c.rbg_count < 1:
                raise ConfigError("carriers.rbg_count", f"must be >= 1, got {c.rbg_count}")
            if not (c.center_freq_hz > 0 and c.subcarriers_per_rbg > 0 and c.subcarrier_spacing_hz > 0):
                raise ConfigError("carriers", f"frequencies and sizes must be positive: {c}")
        for name in ("p_m_dbm", "noise_density_dbm_hz", "qos_target"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(name, "must be finite")
        if not (self.beta_db >= 0 and math.isfinite(self.beta_db)):
            raise ConfigError("beta_db", f"must be finite and >= 0, got {self.beta_db}")
        if not 0 <= self.qos_fraction <= 1:
            raise ConfigError("qos_fraction", f"must lie in [0, 1], got {self.qos_fraction}")
        if self.qos_target < 0:
            raise ConfigError("qos_target", f"must be >= 0, got {self.qos_target}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed", f"must be a non-negative integer, got {self.seed}")

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def n_carriers(self) -> int:
        return len(self.carriers)

    @property
    def rbg_count(self) -> int:
        return self.carriers[0].rbg_count

    @property
    def p_m(self) -> float:
        """Per-BS per-RBG power budget in mW."""
        return 10.0 ** (self.p_m_dbm / 10.0)

    def noise_power(self) -> np.ndarray:
        """Noise power per RBG in mW, one value per carrier."""
        return np.array(
            [10.0 ** ((self.noise_density_dbm_hz + 10 * np.log10(c.rbg_bandwidth_hz)) / 10.0)
             for c in self.carriers]
        )

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ScenarioConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown key")
        missing = {f.name for f in dataclasses.fields(cls)
                   if f.default is dataclasses.MISSING} - set(data)
        if missing:
            raise ConfigError(sorted(missing)[0], "missing required key")
        carriers = []
        carrier_keys = {f.name for f in dataclasses.fields(CarrierConfig)}
        for c in data["carriers"]:
            bad = set(c) - carrier_keys
            if bad:
                raise ConfigError(f"carriers.{sorted(bad)[0]}", "unknown key")
            carriers.append(CarrierConfig(**c))
        return cls(**{**data, "carriers": tuple(carriers)})

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["bs_positions"] = [list(p) for p in self.bs_positions]
        d["ue_region"] = [list(s) for s in self.ue_region]
        d["carriers"] = [dict(c) for c in d["carriers"]]
        return d

    @classmethod
    def from_json(cls, path: str | Path) -> ScenarioConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)


def desk_profile(**overrides) -> ScenarioConfig:
    """Three-cell, three-carrier profile: M=3, K=45, N_t=64, N_r=4, C=3, R=13."""
    base = dict(
        bs_positions=((0.0, -300.0, 25.0), (-1000.0, -300.0, 25.0), (-500.0, -1200.0, 25.0)),
        ue_count=45,
        ue_region=((-1400.0, 400.0), (-1400.0, -100.0)),
        ue_height=1.5,
        nt=64,
        nr=4,
        carriers=tuple(CarrierConfig(f, 13, 48, 30e3) for f in (3.2e9, 3.5e9, 3.8e9)),
        p_m_dbm=10.0,
        noise_density_dbm_hz=-174.0,
        beta_db=5.0,
        qos_fraction=1.0 / 3.0,
        qos_target=40.0,
        seed=0,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def _substream(seed: int, stream: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, *key)))


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    bs_positions: np.ndarray  # (M, 3)
    ue_positions: np.ndarray  # (K, 3)

    @property
    def n_bs(self) -> int:
        return self.bs_positions.shape[0]

    @property
    def n_ue(self) -> int:
        return self.ue_positions.shape[0]


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Drop UEs uniformly in the configured region.

    Each UE draws its position from its own substream, so growing ``ue_count``
    keeps the positions of existing UEs unchanged.
    """
    (xlo, xhi), (ylo, yhi) = config.ue_region
    ue = np.empty((config.ue_count, 3))
    for k in range(config.ue_count):
        rng = _substream(config.seed, _STREAM_UE_DROP, k)
        u = rng.random(2)
        ue[k] = (xlo + (xhi - xlo) * u[0], ylo + (yhi - ylo) * u[1], config.ue_height)
    # degenerate spans collapse exactly onto the bound
    if xlo == xhi:
        ue[:, 0] = xlo
    if ylo == yhi:
        ue[:, 1] = ylo
    return Scenario(config=config, bs_positions=np.array(config.bs_positions, dtype=float),
                    ue_positions=ue)


def pathloss_db(distance_m, freq_hz) -> np.ndarray:
    """Log-distance path loss with a 20 log10 frequency term, in dB."""
    d = np.maximum(np.asarray(distance_m, dtype=float), MIN_DISTANCE_M)
    f = np.asarray(freq_hz, dtype=float)
    return (PATHLOSS_REF_DB + 10 * PATHLOSS_EXPONENT * np.log10(d / REF_DISTANCE_M)
            + 20 * np.log10(f / REF_FREQ_HZ))


@dataclass(frozen=True)
class ChannelTensor:
    """Per-RBG MIMO channels.

    Attributes
    ----------
    h : ndarray, shape (M, K, C, R, N_r, N_t), complex
    large_scale_gain : ndarray, shape (M, K)
        Linear gain at the reference carrier.
    carrier_gain : ndarray, shape (M, K, C)
    reference_carrier : int
    """

    h: np.ndarray
    large_scale_gain: np.ndarray
    carrier_gain: np.ndarray
    reference_carrier: int

    @property
    def shape(self):
        return self.h.shape


def synthesize_channels(scenario: Scenario) -> ChannelTensor:
    """Path loss times i.i.d. unit-variance Rayleigh fading, independent per RBG."""
    cfg = scenario.config
    M, K, C, R = scenario.n_bs, scenario.n_ue, cfg.n_carriers, cfg.rbg_count
    dist = np.linalg.norm(scenario.bs_positions[:, None, :] - scenario.ue_positions[None, :, :], axis=-1)
    freqs = np.array([c.center_freq_hz for c in cfg.carriers])
    gain = 10.0 ** (-pathloss_db(dist[:, :, None], freqs[None, None, :]) / 10.0)  # (M, K, C)

    h = np.empty((M, K, C, R, cfg.nr, cfg.nt), dtype=np.complex128)
    shape = (M, C, R, cfg.nr, cfg.nt, 2)
    for k in range(K):
        rng = _substream(cfg.seed, _STREAM_FADING, k)
        z = rng.standard_normal(shape) * np.sqrt(0.5)
        h[:, k] = z[..., 0] + 1j * z[..., 1]
    h *= np.sqrt(gain)[:, :, :, None, None, None]

    ref = int(np.argmin(np.abs(freqs - REF_FREQ_HZ)))
    return ChannelTensor(h=h, large_scale_gain=gain[:, :, ref].copy(), carrier_gain=gain,
                         reference_carrier=ref)


@dataclass(frozen=True)
class Association:
    """BS-UE association and the QoS subset.

    ``serving[k]`` is the ordered serving set of UE k, strongest first.
    """

    serving: tuple[tuple[int, ...], ...]
    n_bs: int
    qos_set: tuple[int, ...] = ()
    qos_targets: dict[int, float] = field(default_factory=dict)

    @property
    def n_ue(self) -> int:
        return len(self.serving)

    @property
    def served(self) -> np.ndarray:
        """Boolean mask of shape (M, K): BS m serves UE k."""
        mask = np.zeros((self.n_bs, self.n_ue), dtype=bool)
        for k, bs in enumerate(self.serving):
            mask[list(bs), k] = True
        return mask

    @property
    def n_serving(self) -> np.ndarray:
        return np.array([len(b) for b in self.serving])

    @property
    def is_jt(self) -> np.ndarray:
        return self.n_serving > 1

    @property
    def cell_center(self) -> dict[int, set[int]]:
        out = {m: set() for m in range(self.n_bs)}
        for k, bs in enumerate(self.serving):
            if len(bs) == 1:
                out[bs[0]].add(k)
        return out

    @property
    def cell_edge(self) -> dict[int, set[int]]:
        out = {m: set() for m in range(self.n_bs)}
        for k, bs in enumerate(self.serving):
            if len(bs) > 1:
                for m in bs:
                    out[m].add(k)
        return out

    @property
    def attached(self) -> dict[int, set[int]]:
        return {m: self.cell_center[m] | self.cell_edge[m] for m in range(self.n_bs)}

    @property
    def qos_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_ue, dtype=bool)
        mask[list(self.qos_set)] = True
        return mask

    def target_array(self) -> np.ndarray:
        """Per-UE targets, 0 for UEs outside the QoS set."""
        t = np.zeros(self.n_ue)
        for j, q in self.qos_targets.items():
            t[j] = q
        return t

    def with_qos(self, qos_targets: dict[int, float]) -> Association:
        return dataclasses.replace(self, qos_set=tuple(sorted(qos_targets)),
                                   qos_targets=dict(qos_targets))


def associate_users(channels: ChannelTensor, beta_db: float) -> Association:
    """Strongest-BS association plus JT links within ``beta_db`` of the strongest."""
    if beta_db < 0:
        raise ConfigError("beta_db", f"must be >= 0, got {beta_db}")
    gain_db = 10 * np.log10(channels.large_scale_gain)
    serving = []
    for k in range(gain_db.shape[1]):
        g = gain_db[:, k]
        best = int(np.argmax(g))  # first maximum, i.e. lowest index on ties
        extra = [m for m in np.argsort(-g, kind="stable")
                 if m != best and g[best] - g[m] <= beta_db and not (beta_db == 0 and g[m] == g[best])]
        serving.append((best, *(int(m) for m in extra)))
    return Association(serving=tuple(serving), n_bs=gain_db.shape[0])


def select_qos_users(scenario: Scenario, association: Association) -> Association:
    """Draw floor(qos_fraction * K) UEs without replacement and attach targets."""
    cfg = scenario.config
    n = int(math.floor(cfg.qos_fraction * cfg.ue_count + 1e-9))
    rng = _substream(cfg.seed, _STREAM_QOS)
    chosen = rng.choice(cfg.ue_count, size=n, replace=False) if n else []
    return association.with_qos({int(j): float(cfg.qos_target) for j in chosen})
