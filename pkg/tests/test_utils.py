import numpy as np
import pytest

from dirlap.utils import (
    THREADS_ENV_VAR,
    child_seed,
    content_hash,
    json_dumps,
    json_loads,
    make_rng,
    thread_limit,
)


class TestJson:
    @pytest.mark.parametrize(
        "data, expected",
        [
            ('{"a":"b","c":1}', b'{"a":"b","c":1}'),
            (b'{"a":"b","c":1}', b'{"a":"b","c":1}'),
            (bytearray(b'{"a":"b","c":1}'), b'{"a":"b","c":1}'),
        ],
        ids=["str", "bytes", "bytearray"],
    )
    def test_dumps_passthrough(self, data, expected):
        assert json_dumps(data) == expected

    def test_dumps_numpy(self):
        data = {"values": np.array([1.0, 2.5]), "count": np.int64(3)}
        assert json_loads(json_dumps(data)) == {"values": [1.0, 2.5], "count": 3}

    def test_dumps_is_indented(self):
        assert json_dumps({"a": 1}) == b'{\n  "a": 1\n}'


class TestSeeds:
    def test_make_rng_is_reproducible(self):
        first = make_rng(42).random(5)
        second = make_rng(42).random(5)
        np.testing.assert_array_equal(first, second)

    def test_child_seed_is_deterministic(self):
        assert child_seed(5, 1, 2) == child_seed(5, 1, 2)

    @pytest.mark.parametrize(
        "keys_a, keys_b",
        [((0,), (1,)), ((1, 0), (0, 1)), ((), (0,))],
        ids=["sibling", "order", "depth"],
    )
    def test_child_seed_distinct_paths(self, keys_a, keys_b):
        assert child_seed(5, *keys_a) != child_seed(5, *keys_b)

    def test_content_hash(self):
        a = np.arange(4)
        assert content_hash(a) == content_hash(np.arange(4))
        assert content_hash(a) != content_hash(np.arange(5))
        assert content_hash(a) != content_hash(a.astype(np.float64))
        assert 0 <= content_hash(a) < 2**63


class TestThreadLimit:
    def test_from_environment(self, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "3")
        assert thread_limit() == 3

    def test_floor(self, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "0")
        assert thread_limit() == 1

    def test_invalid(self, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "many")
        with pytest.raises(ValueError, match="must be a positive integer"):
            thread_limit()

    def test_default(self, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
        assert thread_limit() >= 1
