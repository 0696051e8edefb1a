import os
import random

import pytest
from hypothesis import given, strategies as st

from crnsim import _gf256_py, gf256

try:
    from crnsim import _gf256_ext
except ImportError:  # pragma: no cover - extension not built
    _gf256_ext = None

BACKENDS = [_gf256_py] + ([_gf256_ext] if _gf256_ext is not None else [])
byte = st.integers(0, 255)


def slow_mul(a, b):
    """Shift-and-add multiply reduced by x^8 + x^4 + x^3 + x^2 + 1."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= 0x11D
    return out


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def gf(request):
    return request.param


def test_polynomial(gf):
    assert gf.POLY == 0x11D


def test_full_multiplication_table(gf):
    for a in range(256):
        for b in range(256):
            assert gf.mul(a, b) == slow_mul(a, b)


def test_inverses(gf):
    for a in range(1, 256):
        assert gf.mul(a, gf.inv(a)) == 1
    with pytest.raises(ZeroDivisionError):
        gf.inv(0)


def test_distributivity_random_triples(gf):
    rng = random.Random(0)
    for _ in range(1000):
        a, b, c = rng.randrange(256), rng.randrange(256), rng.randrange(256)
        assert gf.mul(a, b ^ c) == gf.mul(a, b) ^ gf.mul(a, c)


def test_active_backend_reported():
    assert gf256.BACKEND in ("cython", "python")
    if os.environ.get("CRNSIM_PURE_PYTHON"):
        assert gf256.BACKEND == "python"
    elif _gf256_ext is not None:
        assert gf256.BACKEND == "cython"


@pytest.mark.skipif(_gf256_ext is None, reason="extension not built")
@given(rows=st.lists(st.binary(min_size=12, max_size=12), min_size=1, max_size=12),
       coeffs=st.data())
def test_backend_parity_combine_rank(rows, coeffs):
    c = coeffs.draw(st.binary(min_size=len(rows), max_size=len(rows)))
    assert _gf256_py.combine(rows, c) == _gf256_ext.combine(rows, c)
    assert _gf256_py.rank(rows) == _gf256_ext.rank(rows)


@pytest.mark.skipif(_gf256_ext is None, reason="extension not built")
@given(st.binary(min_size=16, max_size=16), byte, st.binary(min_size=16, max_size=16))
def test_backend_parity_scale_axpy(y, c, x):
    assert _gf256_py.scale(x, c) == _gf256_ext.scale(x, c)
    assert _gf256_py.axpy(y, c, x) == _gf256_ext.axpy(y, c, x)


@pytest.mark.skipif(_gf256_ext is None, reason="extension not built")
@given(st.integers(0, 2**32 - 1))
def test_backend_parity_solve_and_span(seed):
    rng = random.Random(seed)
    n = 6
    rows = [rng.randbytes(n) for _ in range(n)]
    pay = [rng.randbytes(9) for _ in range(n)]
    assert _gf256_py.solve(rows, pay) == _gf256_ext.solve(rows, pay)
    a, b = _gf256_py.Span(n), _gf256_ext.Span(n)
    for _ in range(3 * n):
        v = rng.randbytes(n) if rng.random() < 0.7 else rows[rng.randrange(n)]
        assert a.add(v) == b.add(v)
        probe = rng.randbytes(n)
        assert a.contains(probe) == b.contains(probe)
    assert a.rank == b.rank


def test_scale_matches_elementwise(gf):
    row = bytes(range(256))
    for c in (0, 1, 2, 0x53, 0xFF):
        assert gf.scale(row, c) == bytes(slow_mul(c, x) for x in row)


def test_combine_matches_elementwise(gf):
    rng = random.Random(3)
    rows = [rng.randbytes(20) for _ in range(5)]
    coeffs = rng.randbytes(5)
    want = bytearray(20)
    for c, r in zip(coeffs, rows):
        for t in range(20):
            want[t] ^= slow_mul(c, r[t])
    assert gf.combine(rows, coeffs) == bytes(want)


def test_solve_singular_returns_none(gf):
    rows = [b"\x01\x02", b"\x02\x04"]
    assert gf.solve(rows, [b"a", b"b"]) is None


def test_span_rejects_dependent(gf):
    s = gf.Span(3)
    assert s.add(b"\x01\x00\x00")
    assert not s.add(b"\x05\x00\x00")
    assert s.add(b"\x01\x01\x00")
    assert s.contains(b"\x00\x07\x00")
    assert not s.contains(b"\x00\x00\x01")
    assert s.rank == 2
