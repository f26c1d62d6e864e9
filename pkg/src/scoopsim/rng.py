"""Counter-based random numbers (Philox4x64-10).

Every draw is a pure function of ``(seed, stream, index, event)``, so a
particle's random stream does not depend on how many other particles were
processed before it, or on which thread processed it.  The block function is
bit-compatible with :class:`numpy.random.Philox`.
"""

import numpy as np

__all__ = ["philox4x64", "uniform_block", "uniforms", "exponentials",
           "PARTICLE_STREAM", "CLOCK_STREAM", "OBSERVATION_STREAM"]

PARTICLE_STREAM = 0
CLOCK_STREAM = 1
OBSERVATION_STREAM = 2

_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_MUL0 = np.uint64(0xD2E7470EE14C6C93)
_MUL1 = np.uint64(0xCA5A826395121157)
_WEYL0 = np.uint64(0x9E3779B97F4A7C15)
_WEYL1 = np.uint64(0xBB67AE8584CAA73B)
_ROUNDS = 10
_TO_UNIT = 2.0 ** -53


def _mulhilo(a, b):
    """Full 64x64 -> 128 bit product, returned as (high, low) words."""
    a0, a1 = a & _MASK32, a >> _SHIFT32
    b0, b1 = b & _MASK32, b >> _SHIFT32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    p11 = a1 * b1
    carry = (p00 >> _SHIFT32) + (p01 & _MASK32) + (p10 & _MASK32)
    hi = p11 + (p01 >> _SHIFT32) + (p10 >> _SHIFT32) + (carry >> _SHIFT32)
    return hi, a * b


def _as_u64(x):
    x = np.asarray(x)
    if x.dtype == np.uint64:
        return x
    if x.dtype.kind == "i":
        return x.astype(np.int64).view(np.uint64)
    return x.astype(np.uint64)


def _seed_word(seed):
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


def philox4x64(counter, key):
    """Apply the Philox4x64-10 bijection.

    Args:
        counter: sequence of four uint64-compatible arrays (broadcastable).
        key: sequence of two uint64-compatible scalars or arrays.

    Returns:
        Tuple of four uint64 arrays.
    """
    c0, c1, c2, c3 = (_as_u64(c) for c in counter)
    k0, k1 = (_as_u64(k) for k in key)
    with np.errstate(over="ignore"):
        for r in range(_ROUNDS):
            if r:
                k0 = k0 + _WEYL0
                k1 = k1 + _WEYL1
            hi0, lo0 = _mulhilo(_MUL0, c0)
            hi1, lo1 = _mulhilo(_MUL1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def _to_unit(words):
    # 53 high bits -> [0, 1); shift by half an ulp to land in (0, 1)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _TO_UNIT


def uniform_block(seed, stream, index, block):
    """Four uniforms on (0, 1) for each ``(index, block)`` pair.

    Returns an array of shape ``broadcast(index, block).shape + (4,)``.
    Output word ``j`` of block ``b`` is the draw for event ``4*b + j``.
    """
    index = _as_u64(index)
    block = _as_u64(block)
    zero = np.uint64(0)
    words = philox4x64((index, block, zero, zero),
                       (_seed_word(seed), np.uint64(stream)))
    words = np.broadcast_arrays(*words)
    return np.stack([_to_unit(w) for w in words], axis=-1)


def uniforms(seed, stream, index, event):
    """Uniform draw on (0, 1) keyed by ``(seed, stream, index, event)``.

    ``index`` and ``event`` broadcast against each other.
    """
    event = np.asarray(event, dtype=np.int64)
    block = uniform_block(seed, stream, index, event // 4)
    lane = np.broadcast_to(event % 4, block.shape[:-1])
    return np.take_along_axis(block, lane[..., None], axis=-1)[..., 0]


def exponentials(seed, stream, n, rate):
    """``n`` exponential waiting times with the given rate, keyed by event."""
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    n_blocks = -(-n // 4)
    u = uniform_block(seed, stream, 0, np.arange(n_blocks)).reshape(-1)[:n]
    return -np.log(u) / rate
