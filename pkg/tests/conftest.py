import numpy as np
import pytest

from greensched.power import DvfsMode, ServerSpec, ThermalState


def make_spec(
    *,
    server_id=0,
    a_dyn=14.3505,
    b_cpu=(8e-4,),
    c_cpu=(-1e-5,),
    d_volt=0.3,
    e_const=5.0,
    g_mem=(2e-4,),
    h_mem=(-0.01,),
    modes=None,
    cpi=1.0,
    n_sockets=1,
) -> ServerSpec:
    if modes is None:
        modes = (
            DvfsMode(1, 1.73e9, 0.85),
            DvfsMode(2, 1.86e9, 0.9493),
            DvfsMode(3, 2.13e9, 1.1507),
            DvfsMode(4, 2.26e9, 1.2478),
            DvfsMode(5, 2.39e9, 1.3448),
            DvfsMode(6, 2.40e9, 1.35),
        )
    return ServerSpec(
        server_id=server_id,
        label="test",
        a_dyn=a_dyn,
        b_cpu=b_cpu,
        c_cpu=c_cpu,
        d_volt=d_volt,
        e_const=e_const,
        g_mem=g_mem,
        h_mem=h_mem,
        modes=modes,
        cpi=cpi,
        n_sockets=n_sockets,
    )


@pytest.fixture
def spec() -> ServerSpec:
    return make_spec()


@pytest.fixture
def thermal() -> ThermalState:
    return ThermalState((301.0,), 301.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
