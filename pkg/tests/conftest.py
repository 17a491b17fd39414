'''
Shared fixtures for the BankSpill test suite.
'''
import numpy as np
import pytest

from src.panel import PanelDataset
from src.simulate import DgpSpec, gen_dsdm, gen_sdid, ring_weights
from src.spatial import row_normalize


def write_text(path, text):
    path.write_text(text, encoding='utf-8')
    return str(path)


def random_weights(n, seed):
    rng = np.random.default_rng(seed)
    raw = rng.uniform(0.1, 1.0, size=(n, n))
    np.fill_diagonal(raw, 0.0)
    return row_normalize(raw, labels=[f'B{i + 1:03d}' for i in range(n)])


@pytest.fixture
def six_node_weights():
    return random_weights(6, 7)


@pytest.fixture
def small_panel():
    # 8 entities x 6 quarters, two adopters from 2023Q1, distinct sizes
    rng = np.random.default_rng(11)
    n, t = 8, 6
    treatment = np.zeros((n, t))
    treatment[:2, 4:] = 1.0
    log_assets = np.repeat(np.arange(1.0, n + 1.0)[:, None], t, axis=1)
    return PanelDataset(
        entity_ids=[f'B{i + 1:03d}' for i in range(n)],
        quarters=['2022Q1', '2022Q2', '2022Q3', '2022Q4', '2023Q1', '2023Q2'],
        outcomes={'ROA': rng.normal(1.0, 0.2, size=(n, t)), 'ROE': rng.normal(10.0, 2.0, size=(n, t))},
        treatment=treatment,
        controls={'log_assets': log_assets, 'tier1_ratio': rng.normal(12.0, 1.0, size=(n, t))},
        coordinates=np.column_stack([np.linspace(30, 45, n), np.linspace(-120, -75, n)]),
    )


@pytest.fixture
def dsdm_spec():
    return DgpSpec(n=20, t=15, tau=0.3, rho=0.3, eta=-0.1, beta=0.5, theta=0.3, gamma=(0.4,), sigma=1.0,
                   weights=ring_weights(20, 2), fe_scale=1.0, seed=3)


@pytest.fixture
def dsdm_panel(dsdm_spec):
    return gen_dsdm(dsdm_spec)


@pytest.fixture
def sdid_panel():
    # 30 entities, 12 quarters, adoption in column 8 (2017Q1), parallel trends, ATT 2
    spec = DgpSpec(n=30, t=12, t0=8, treat_share=0.3, sdid_variant='parallel', effect=2.0, sigma=0.5,
                   fe_scale=1.0, seed=5)
    return gen_sdid(spec)


@pytest.fixture
def noiseless_sdid_panel():
    spec = DgpSpec(n=20, t=10, t0=6, treat_share=0.25, sdid_variant='parallel', effect=1.0, sigma=0.0,
                   fe_scale=1.0, seed=9)
    return gen_sdid(spec)
