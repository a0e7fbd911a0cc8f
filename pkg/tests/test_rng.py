import numpy as np
import pytest

from shiftlab.core.rng import RngSeed, as_seed


def test_same_seed_same_draws():
    a = RngSeed(7).generator().random(5)
    b = RngSeed(7).generator().random(5)
    np.testing.assert_array_equal(a, b)


def test_substreams_are_independent_of_each_other():
    root = RngSeed(7)
    a = root.substream("folds", "young").generator().random(5)
    b = root.substream("folds", "old").generator().random(5)
    assert not np.array_equal(a, b)


def test_substream_path_composes():
    root = RngSeed(3)
    assert root.substream("repetition", 2) == root.substream("repetition").substream(2)


def test_substream_does_not_consume_parent():
    root = RngSeed(11)
    before = root.generator().random(3)
    root.substream("weights").generator().random(100)
    np.testing.assert_array_equal(root.generator().random(3), before)


def test_as_seed_accepts_int_and_seed():
    seed = RngSeed(5)
    assert as_seed(seed) is seed
    assert as_seed(5) == seed


@pytest.mark.parametrize("bad", [-1, 2**64])
def test_out_of_range_seed_rejected(bad):
    with pytest.raises(ValueError):
        RngSeed(bad)


def test_boolean_seed_and_label_rejected():
    with pytest.raises(TypeError):
        RngSeed(True)
    with pytest.raises(TypeError):
        RngSeed(1).substream(False)
