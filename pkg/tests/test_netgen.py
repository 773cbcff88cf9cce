from collections import Counter

import numpy as np
import pytest

from bn2o.model import Bn2oNetwork
from bn2o.netgen import STRENGTHS, NetGenConfig, generate, stats


@pytest.fixture(scope="module")
def default_net():
    return generate(NetGenConfig(seed=11))


def test_default_sizes_and_mean_degree(default_net):
    assert default_net.num_diseases == 600 and default_net.num_findings == 4000
    degree = np.bincount(np.concatenate(default_net.parents), minlength=600)
    # repair edges can only add; they are rare at this density
    assert abs(degree.mean() - 70) <= 3


def test_zero_half_width_gives_exact_degree():
    # dense enough that no finding is left without a parent, so no repair edges
    net = generate(NetGenConfig(K=40, I=80, mean_degree=70, degree_half_width=0, seed=5))
    assert net.meta["repaired_findings"] == 0
    degree = np.bincount(np.concatenate(net.parents), minlength=40)
    assert np.all(degree == 70)


def test_repair_attaches_orphans():
    net = generate(NetGenConfig(K=3, I=200, mean_degree=5, degree_half_width=0, seed=1))
    assert net.meta["repaired_findings"] > 0
    assert stats(net)["parentless_findings"] == 0
    assert all(len(pa) >= 1 for pa in net.parents)


def test_strength_frequencies(default_net):
    q = np.concatenate(default_net.q)[:10_000]
    freq = Counter(float(x) for x in q)
    assert set(freq) == set(STRENGTHS)
    for s in STRENGTHS:
        assert abs(freq[s] / len(q) - 0.2) <= 0.02


def test_parameters_inside_ranges(default_net):
    assert np.all((default_net.prior >= 2e-5) & (default_net.prior <= 2e-2))
    assert np.all((default_net.leak >= 5.8e-8) & (default_net.leak <= 0.153))


def test_stats_default_net(default_net):
    s = stats(default_net)
    assert s["parentless_findings"] == 0
    assert abs(s["expected_positives_per_disease"] - 35) <= 5


def test_stats_hand_built():
    # 2 diseases x 3 findings
    net = Bn2oNetwork.build([0.1, 0.2], [0.01, 0.02, 0.03], [[0], [0, 1], [1]], [[0.5], [0.2, 0.8], [0.5]])
    s = stats(net)
    assert s["disease_degree_hist"] == {2: 2}
    assert s["finding_degree_hist"] == {1: 2, 2: 1}
    assert s["strength_hist"] == {"0.2": 1, "0.5": 2, "0.8": 1}
    assert s["num_edges"] == 4
    assert s["expected_positives_per_disease"] == pytest.approx((0.5 + 0.2 + 0.8 + 0.5) / 2)


def test_same_seed_same_bytes():
    cfg = NetGenConfig(K=40, I=300, seed=9)
    assert generate(cfg).to_json() == generate(cfg).to_json()
    assert generate(cfg).to_json() != generate(NetGenConfig(K=40, I=300, seed=10)).to_json()


@pytest.mark.parametrize("kwargs", [
    {"prior_range": (0.1, 0.01)},
    {"leak_range": (0.0, 0.1)},
    {"mean_degree": 70, "degree_half_width": 70},
    {"I": 50},
    {"K": 0},
])
def test_invalid_configs(kwargs):
    with pytest.raises(ValueError):
        generate(NetGenConfig(**kwargs))
