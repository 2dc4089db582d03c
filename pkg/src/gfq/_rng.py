"""Counter-seeded random streams compiled with numba.

Every replicate of every Monte Carlo routine in the package draws from its
own stream, keyed by ``(seed, replicate, stream)``.  The key is hashed by
SplitMix64 into the 256-bit state of a xoshiro256** generator, so a
replicate's numbers do not depend on which thread or batch produced it.
Normal variates use the 256-layer ziggurat of Marsaglia and Tsang (the same
table layout numpy uses for ``standard_normal``).
"""

import math

import numpy as np
from numba import njit

from .errors import DomainError

MAX_SEED = 2**63 - 1

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_TWO53_INV = 1.0 / 9007199254740992.0


def _ziggurat_tables():
    r = 3.6541528853610088
    v = 0.00492867323399
    m = 2.0**52

    def f(x):
        return math.exp(-0.5 * x * x)

    ki = np.zeros(256, dtype=np.uint64)
    wi = np.zeros(256)
    fi = np.zeros(256)
    dn = tn = r
    q = v / f(dn)
    ki[0] = np.uint64((dn / q) * m)
    ki[1] = 0
    wi[0] = q / m
    wi[255] = dn / m
    fi[0] = 1.0
    fi[255] = f(dn)
    for i in range(254, 0, -1):
        dn = math.sqrt(-2.0 * math.log(v / dn + f(dn)))
        ki[i + 1] = np.uint64((dn / tn) * m)
        tn = dn
        fi[i] = f(dn)
        wi[i] = dn / m
    return ki, wi, fi, r


_KI, _WI, _FI, _ZIG_R = _ziggurat_tables()
_ZIG_INV_R = 1.0 / _ZIG_R


@njit(cache=True)
def _splitmix(x):
    x = x + _GOLDEN
    z = x
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return x, z ^ (z >> _U64(31))


@njit(cache=True)
def _finalize(z):
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


@njit(cache=True)
def seed_state(seed, replicate, stream, state):
    """Fill ``state`` (4 x uint64) for the stream keyed by the triple."""
    h = _finalize(_U64(seed) + _GOLDEN)
    h = _finalize(h ^ _U64(replicate))
    h = _finalize(h ^ (_U64(stream) * _GOLDEN))
    x = h
    for k in range(4):
        x, z = _splitmix(x)
        state[k] = z
    if state[0] == 0 and state[1] == 0 and state[2] == 0 and state[3] == 0:
        state[0] = _GOLDEN


@njit(cache=True, inline="always")
def xoshiro_next(s0, s1, s2, s3):
    """One xoshiro256** step on state held in locals; returns (u64, state...)."""
    m = s1 * _U64(5)
    r = ((m << _U64(7)) | (m >> _U64(57))) * _U64(9)
    t = s1 << _U64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = (s3 << _U64(45)) | (s3 >> _U64(19))
    return r, s0, s1, s2, s3


@njit(cache=True, inline="always")
def uniform_next(s0, s1, s2, s3):
    """Uniform on [0, 1) with 53 random bits."""
    r, s0, s1, s2, s3 = xoshiro_next(s0, s1, s2, s3)
    return float(np.int64(r >> _U64(11))) * _TWO53_INV, s0, s1, s2, s3


@njit(cache=True)
def _normal_slow(idx, rabs, x, s0, s1, s2, s3):
    if idx == 0:
        while True:
            u1, s0, s1, s2, s3 = uniform_next(s0, s1, s2, s3)
            u2, s0, s1, s2, s3 = uniform_next(s0, s1, s2, s3)
            xx = -_ZIG_INV_R * math.log1p(-u1)
            yy = -math.log1p(-u2)
            if yy + yy > xx * xx:
                if (rabs >> _U64(8)) & _U64(1):
                    return True, -(_ZIG_R + xx), s0, s1, s2, s3
                return True, _ZIG_R + xx, s0, s1, s2, s3
    u1, s0, s1, s2, s3 = uniform_next(s0, s1, s2, s3)
    if (_FI[idx - 1] - _FI[idx]) * u1 + _FI[idx] < math.exp(-0.5 * x * x):
        return True, x, s0, s1, s2, s3
    return False, 0.0, s0, s1, s2, s3


@njit(cache=True, inline="always")
def normal_next(s0, s1, s2, s3):
    """Standard normal by the 256-layer ziggurat; returns (z, state...)."""
    while True:
        r, s0, s1, s2, s3 = xoshiro_next(s0, s1, s2, s3)
        idx = int(r & _U64(0xFF))
        r = r >> _U64(8)
        rabs = (r >> _U64(1)) & _U64(0x000FFFFFFFFFFFFF)
        x = float(np.int64(rabs)) * _WI[idx]
        if r & _U64(1):
            x = -x
        if rabs < _KI[idx]:
            return x, s0, s1, s2, s3
        ok, x, s0, s1, s2, s3 = _normal_slow(idx, rabs, x, s0, s1, s2, s3)
        if ok:
            return x, s0, s1, s2, s3


@njit(cache=True)
def fill_normals(s, out):
    s0, s1, s2, s3 = s[0], s[1], s[2], s[3]
    for k in range(out.shape[0]):
        z, s0, s1, s2, s3 = normal_next(s0, s1, s2, s3)
        out[k] = z
    s[0], s[1], s[2], s[3] = s0, s1, s2, s3


@njit(cache=True)
def fill_uniforms(s, out):
    s0, s1, s2, s3 = s[0], s[1], s[2], s[3]
    for k in range(out.shape[0]):
        v, s0, s1, s2, s3 = uniform_next(s0, s1, s2, s3)
        out[k] = v
    s[0], s[1], s[2], s[3] = s0, s1, s2, s3


@njit(cache=True, nogil=True)
def fill_normal_rows(seed, first_replicate, stream, out):
    """Row ``r`` of ``out`` gets the stream of replicate ``first_replicate + r``."""
    state = np.empty(4, dtype=np.uint64)
    for r in range(out.shape[0]):
        seed_state(seed, first_replicate + r, stream, state)
        fill_normals(state, out[r])


def check_seed(seed):
    """Validate a seed: an integer in ``[0, 2**63 - 1]``."""
    if isinstance(seed, float) and not seed.is_integer():
        raise DomainError(f"seed must be an integer, got {seed}")
    seed = int(seed)
    if seed < 0 or seed > MAX_SEED:
        raise DomainError(f"seed must lie in [0, 2**63 - 1], got {seed}")
    return seed


def normals(seed, replicate, n, stream=0):
    """Standard normals of the ``(seed, replicate, stream)`` stream (convenience)."""
    state = np.empty(4, dtype=np.uint64)
    seed_state(check_seed(seed), int(replicate), int(stream), state)
    out = np.empty(int(n))
    fill_normals(state, out)
    return out


def uniforms(seed, replicate, n, stream=0):
    state = np.empty(4, dtype=np.uint64)
    seed_state(check_seed(seed), int(replicate), int(stream), state)
    out = np.empty(int(n))
    fill_uniforms(state, out)
    return out
