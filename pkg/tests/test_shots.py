import numpy as np
import pytest
from hypothesis import given, strategies as st

from cvd.shots import as_rng, map_shots, shot_rng, worker_count


@given(st.integers(0, 2 ** 40), st.integers(0, 1000))
def test_shot_seed_is_base_plus_index(base, i):
    a = shot_rng(base, i).random(3)
    b = np.random.Generator(np.random.Philox(base + i)).random(3)
    assert np.array_equal(a, b)


def test_as_rng_passthrough():
    g = np.random.default_rng(1)
    assert as_rng(g) is g
    assert as_rng(5).random() == shot_rng(5, 0).random()


def test_map_shots_order_and_thread_independence():
    def draw(rng, i):
        return (i, float(rng.random()))
    serial = map_shots(draw, 200, 17, workers=0)
    threaded = map_shots(draw, 200, 17, workers=4)
    assert serial == threaded
    assert [s[0] for s in serial] == list(range(200))


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv("CVD_THREADS", raising=False)
    assert worker_count() == 0
    monkeypatch.setenv("CVD_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("CVD_THREADS", "-2")
    assert worker_count() == 0
    monkeypatch.setenv("CVD_THREADS", "many")
    with pytest.raises(ValueError):
        worker_count()
