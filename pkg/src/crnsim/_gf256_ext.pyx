# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled GF(256) kernels (same interface as ``_gf256_py``)."""

from libc.string cimport memcpy, memset
from cpython.bytes cimport PyBytes_FromStringAndSize, PyBytes_AS_STRING

DEF MAXN = 256

cdef unsigned char EXP_T[510]
cdef unsigned char LOG_T[256]
cdef unsigned char MUL_T[256][256]
cdef unsigned char INV_T[256]


cdef void _build_tables():
    cdef int x = 1, i, a, b
    for i in range(255):
        EXP_T[i] = x
        LOG_T[x] = i
        x <<= 1
        if x & 0x100:
            x ^= 0x11D
    for i in range(255, 510):
        EXP_T[i] = EXP_T[i - 255]
    LOG_T[0] = 0
    for a in range(256):
        for b in range(256):
            if a == 0 or b == 0:
                MUL_T[a][b] = 0
            else:
                MUL_T[a][b] = EXP_T[LOG_T[a] + LOG_T[b]]
    INV_T[0] = 0
    for a in range(1, 256):
        INV_T[a] = EXP_T[255 - LOG_T[a]]


_build_tables()

POLY = 0x11D


def mul(int a, int b):
    return MUL_T[a & 0xFF][b & 0xFF]


def inv(int a):
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return INV_T[a]


def scale(row, int c):
    cdef const unsigned char[:] r = row
    cdef Py_ssize_t n = r.shape[0], i
    out = PyBytes_FromStringAndSize(NULL, n)
    cdef unsigned char *o = <unsigned char *> PyBytes_AS_STRING(out)
    cdef unsigned char *m = MUL_T[c]
    for i in range(n):
        o[i] = m[r[i]]
    return out


def axpy(y, int c, x):
    cdef const unsigned char[:] yv = y
    cdef const unsigned char[:] xv = x
    cdef Py_ssize_t n = yv.shape[0], i
    if xv.shape[0] != n:
        raise ValueError("row length mismatch")
    out = PyBytes_FromStringAndSize(NULL, n)
    cdef unsigned char *o = <unsigned char *> PyBytes_AS_STRING(out)
    cdef unsigned char *m = MUL_T[c]
    for i in range(n):
        o[i] = yv[i] ^ m[xv[i]]
    return out


def combine(rows, coeffs):
    cdef Py_ssize_t nr = len(rows), j, i, n
    if nr != len(coeffs):
        raise ValueError("rows and coeffs differ in length")
    if nr == 0:
        raise ValueError("empty combination")
    n = len(rows[0])
    out = PyBytes_FromStringAndSize(NULL, n)
    cdef unsigned char *o = <unsigned char *> PyBytes_AS_STRING(out)
    memset(o, 0, n)
    cdef const unsigned char[:] rv
    cdef unsigned char *m
    cdef int c
    for j in range(nr):
        c = coeffs[j]
        rv = rows[j]
        if rv.shape[0] != n:
            raise ValueError("row length mismatch")
        if c == 0:
            continue
        m = MUL_T[c]
        for i in range(n):
            o[i] ^= m[rv[i]]
    return out


cdef class Span:
    """Incrementally maintained echelon basis of a subspace of GF(256)^n."""

    cdef public int n
    cdef int _rank
    cdef unsigned char rows[MAXN][MAXN]
    cdef int pivots[MAXN]

    def __init__(self, int n):
        if n <= 0 or n > MAXN:
            raise ValueError("dimension must be in 1..256")
        self.n = n
        self._rank = 0

    @property
    def rank(self):
        return self._rank

    cdef int _reduce(self, unsigned char *v):
        cdef int r, i, p, n = self.n
        cdef unsigned char c
        cdef unsigned char *m
        for r in range(self._rank):
            p = self.pivots[r]
            c = v[p]
            if c:
                m = MUL_T[c]
                for i in range(p, n):
                    v[i] ^= m[self.rows[r][i]]
        for i in range(n):
            if v[i]:
                return i
        return -1

    def contains(self, vec):
        cdef const unsigned char[:] vv = vec
        cdef unsigned char buf[MAXN]
        cdef int i
        if vv.shape[0] != self.n:
            raise ValueError("vector length mismatch")
        for i in range(self.n):
            buf[i] = vv[i]
        return self._reduce(buf) < 0

    def add(self, vec):
        cdef const unsigned char[:] vv = vec
        cdef unsigned char buf[MAXN]
        cdef int i, p, n = self.n
        cdef unsigned char *m
        if vv.shape[0] != n:
            raise ValueError("vector length mismatch")
        for i in range(n):
            buf[i] = vv[i]
        p = self._reduce(buf)
        if p < 0:
            return False
        m = MUL_T[INV_T[buf[p]]]
        for i in range(n):
            self.rows[self._rank][i] = m[buf[i]]
        self.pivots[self._rank] = p
        self._rank += 1
        return True


def rank(rows):
    if not rows:
        return 0
    cdef Span s = Span(len(rows[0]))
    for row in rows:
        s.add(row)
    return s.rank


def solve(coef_rows, payloads):
    cdef Py_ssize_t n = len(coef_rows), plen, r, col, piv, i
    if len(payloads) != n:
        raise ValueError("coefficient and payload counts differ")
    if n == 0:
        return []
    if len(coef_rows[0]) != n:
        raise ValueError("coefficient matrix must be square")
    plen = len(payloads[0])
    a = [bytearray(x) for x in coef_rows]
    b = [bytearray(x) for x in payloads]
    cdef unsigned char[:] ar, ac, br, bc
    cdef unsigned char *m
    cdef unsigned char c
    for col in range(n):
        piv = -1
        for r in range(col, n):
            ar = a[r]
            if ar[col]:
                piv = r
                break
        if piv < 0:
            return None
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        ac = a[col]
        bc = b[col]
        m = MUL_T[INV_T[ac[col]]]
        for i in range(n):
            ac[i] = m[ac[i]]
        for i in range(plen):
            bc[i] = m[bc[i]]
        for r in range(n):
            if r == col:
                continue
            ar = a[r]
            c = ar[col]
            if c == 0:
                continue
            m = MUL_T[c]
            for i in range(n):
                ar[i] ^= m[ac[i]]
            br = b[r]
            for i in range(plen):
                br[i] ^= m[bc[i]]
    return [bytes(x) for x in b]
