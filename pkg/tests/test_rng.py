import numpy as np

from marketsel.rng import label_key, run_seed, substream


def test_substream_deterministic():
    a = substream(42, "states").random(10)
    b = substream(42, "states").random(10)
    np.testing.assert_array_equal(a, b)


def test_substreams_differ_by_label():
    a = substream(42, "states").random(10)
    b = substream(42, "agent:0").random(10)
    assert not np.array_equal(a, b)


def test_substreams_differ_by_seed():
    a = substream(42, "states").random(10)
    b = substream(43, "states").random(10)
    assert not np.array_equal(a, b)


def test_label_key_stable():
    # frozen: adding agents must never reshuffle existing streams,
    # so the label hash has to stay put across releases
    assert label_key("states") == 0x09E1388ECE065B36
    assert label_key("agent:0") == 0x701A7FF71740F273


def test_vectorized_draws_match_scalar_draws():
    r1 = substream(7, "states")
    r2 = substream(7, "states")
    vec = r1.random(50)
    scalars = np.array([r2.random() for _ in range(50)])
    np.testing.assert_array_equal(vec, scalars)


def test_run_seed_arithmetic():
    assert run_seed(100, 0) == 100
    assert run_seed(100, 7) == 107
    assert run_seed(2**64 - 1, 2) == 1
