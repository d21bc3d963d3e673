import numpy as np
import pytest

from mimosched import desk_profile
from mimosched.beamforming import build_transceivers
from mimosched.network import NetworkInstance, build_instance
from mimosched.rates import compute_coefficients
from mimosched.scenario import Association, CarrierConfig, ChannelTensor, Scenario


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def small_config(**overrides):
    """Desk geometry with one carrier and few RBGs, for fast tests."""
    base = dict(ue_count=12, carriers=(CarrierConfig(3.5e9, 2, 48, 30e3),))
    base.update(overrides)
    return desk_profile(**base)


def instance_from_channels(h, serving, qos_targets=None, p_m=1.0, sigma2=1.0):
    """Wrap a hand-made channel tensor (M, K, C, R, N_r, N_t) as a NetworkInstance."""
    h = np.asarray(h, dtype=np.complex128)
    M, K, C, R, nr, nt = h.shape
    cfg = desk_profile(
        bs_positions=tuple((100.0 * m, 0.0, 25.0) for m in range(M)),
        ue_count=K, nt=nt, nr=nr,
        carriers=tuple(CarrierConfig(3.5e9, R, 48, 30e3) for _ in range(C)),
    )
    scen = Scenario(config=cfg, bs_positions=np.zeros((M, 3)), ue_positions=np.zeros((K, 3)))
    gain = np.mean(np.abs(h) ** 2, axis=(2, 3, 4, 5))
    channels = ChannelTensor(h=h, large_scale_gain=gain, carrier_gain=np.repeat(gain[..., None], C, -1),
                             reference_carrier=0)
    assoc = Association(serving=tuple(tuple(s) for s in serving), n_bs=M).with_qos(qos_targets or {})
    tx = build_transceivers(channels, assoc)
    sig = np.full(C, float(sigma2))
    coeffs = compute_coefficients(tx, assoc, p_m, sig)
    return NetworkInstance(config=cfg, scenario=scen, channels=channels, association=assoc,
                           transceivers=tx, coefficients=coeffs, p_m=p_m, sigma2=sig)


@pytest.fixture(scope="session")
def desk_instance():
    return build_instance(desk_profile(seed=7))


@pytest.fixture(scope="session")
def small_instance():
    return build_instance(small_config(seed=3))


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance._line(n))
