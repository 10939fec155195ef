import hashlib
import os

from typing import Any

import numpy as np
import orjson

from numpy.typing import NDArray

THREADS_ENV_VAR = "DIRLAP_THREADS"


def json_dumps(data: str | bytes | bytearray | Any) -> bytes:
    """
    Serialize data to a JSON formatted bytes object.

    Numpy arrays and scalars are serialized natively.
    Already serialized JSON (str, bytes) is passed through.

    Parameters
    ----------
    data : str | bytes | bytearray | Any
        Data to be serialized.

    Returns
    -------
    bytes
        JSON formatted bytes object.

    """
    if isinstance(data, str):
        return data.encode("utf-8")
    if isinstance(data, bytearray):
        return bytes(data)
    if isinstance(data, bytes):
        return data
    return orjson.dumps(
        data,
        option=orjson.OPT_SERIALIZE_NUMPY
        | orjson.OPT_INDENT_2
        | orjson.OPT_NON_STR_KEYS,
    )


def json_loads(data: str | bytes | bytearray) -> Any:
    """Parse a report, manifest or any other JSON document."""
    return orjson.loads(data)


def make_rng(seed: int) -> np.random.Generator:
    """
    Create a counter-based random generator.

    Parameters
    ----------
    seed : int
        Non-negative 64-bit seed.

    Returns
    -------
    numpy.random.Generator
        Philox-backed generator.

    """
    return np.random.Generator(np.random.Philox(seed))


def child_seed(seed: int, *keys: int) -> int:
    """
    Derive an independent 64-bit seed for a sub-operation.

    The same (seed, keys) pair always yields the same child,
    and distinct key paths yield independent streams.

    Parameters
    ----------
    seed : int
        Parent seed.
    *keys : int
        Non-negative integers naming the sub-operation (vertex, piece, level...).

    Returns
    -------
    int
        Child seed.

    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def content_hash(*arrays: NDArray[Any]) -> int:
    """Stable 63-bit hash of array contents, used to seed recursion branches."""
    digest = hashlib.blake2b(digest_size=8)
    for array in arrays:
        contiguous = np.ascontiguousarray(array)
        digest.update(str(contiguous.dtype).encode("ascii"))
        digest.update(contiguous.tobytes())
    return int.from_bytes(digest.digest(), "little") >> 1


def thread_limit() -> int:
    """
    Maximum number of worker threads.

    Reads `DIRLAP_THREADS`; falls back to the CPU count.

    """
    value = os.environ.get(THREADS_ENV_VAR)
    if value is not None:
        try:
            return max(1, int(value))
        except ValueError as exc:
            raise ValueError(
                f"{THREADS_ENV_VAR} must be a positive integer, got '{value}'"
            ) from exc
    return max(1, os.cpu_count() or 1)
