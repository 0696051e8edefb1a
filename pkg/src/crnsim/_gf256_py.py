"""Pure-Python GF(256) kernels.

Used when the compiled extension is unavailable or when ``CRNSIM_PURE_PYTHON``
is set. Rows are ``bytes``; scaling a row uses ``bytes.translate`` with a
precomputed 256-entry table per multiplier and row addition is an integer XOR,
so no per-byte Python loop is needed on the hot path.
"""

POLY = 0x11D  # x^8 + x^4 + x^3 + x^2 + 1

EXP = [0] * 510
LOG = [0] * 256
_x = 1
for _i in range(255):
    EXP[_i] = _x
    LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= POLY
for _i in range(255, 510):
    EXP[_i] = EXP[_i - 255]
del _x, _i


def mul(a, b):
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def inv(a):
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return EXP[255 - LOG[a]]


MUL = [bytes(mul(c, x) for x in range(256)) for c in range(256)]
INV = [0] + [inv(a) for a in range(1, 256)]


def _xor(a, b, n):
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(n, "little")


def scale(row, c):
    return bytes(row).translate(MUL[c])


def axpy(y, c, x):
    """Return ``y + c*x`` over GF(256)."""
    if len(x) != len(y):
        raise ValueError("row length mismatch")
    if c == 0:
        return bytes(y)
    return _xor(y, bytes(x).translate(MUL[c]), len(y))


def combine(rows, coeffs):
    """Linear combination ``sum(coeffs[j] * rows[j])``."""
    if len(rows) != len(coeffs):
        raise ValueError("rows and coeffs differ in length")
    if not rows:
        raise ValueError("empty combination")
    n = len(rows[0])
    acc = 0
    for row, c in zip(rows, coeffs):
        if len(row) != n:
            raise ValueError("row length mismatch")
        if c:
            acc ^= int.from_bytes(bytes(row).translate(MUL[c]), "little")
    return acc.to_bytes(n, "little")


def _first_nonzero(v):
    for i, b in enumerate(v):
        if b:
            return i
    return -1


class Span:
    """Incrementally maintained echelon basis of a subspace of GF(256)^n."""

    def __init__(self, n):
        if n <= 0:
            raise ValueError("dimension must be positive")
        self.n = n
        self._rows = []
        self._pivots = []

    @property
    def rank(self):
        return len(self._rows)

    def _reduce(self, vec):
        n = self.n
        for row, p in zip(self._rows, self._pivots):
            c = vec[p]
            if c:
                vec = _xor(vec, row.translate(MUL[c]), n)
        return vec

    def contains(self, vec):
        if len(vec) != self.n:
            raise ValueError("vector length mismatch")
        return _first_nonzero(self._reduce(bytes(vec))) < 0

    def add(self, vec):
        """Insert ``vec``; return True iff it was linearly independent."""
        if len(vec) != self.n:
            raise ValueError("vector length mismatch")
        r = self._reduce(bytes(vec))
        p = _first_nonzero(r)
        if p < 0:
            return False
        self._rows.append(r.translate(MUL[INV[r[p]]]))
        self._pivots.append(p)
        return True


def rank(rows):
    if not rows:
        return 0
    span = Span(len(rows[0]))
    for row in rows:
        span.add(row)
    return span.rank


def solve(coef_rows, payloads):
    """Gauss-Jordan solve of ``C @ X = payloads`` for square full-rank ``C``.

    Returns the rows of ``X`` or ``None`` if ``C`` is singular.
    """
    n = len(coef_rows)
    if len(payloads) != n:
        raise ValueError("coefficient and payload counts differ")
    if n == 0:
        return []
    width = len(coef_rows[0])
    if width != n:
        raise ValueError("coefficient matrix must be square")
    plen = len(payloads[0]) if n else 0
    a = [bytearray(r) for r in coef_rows]
    b = [bytes(p) for p in payloads]
    for col in range(n):
        piv = -1
        for r in range(col, n):
            if a[r][col]:
                piv = r
                break
        if piv < 0:
            return None
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        s = INV[a[col][col]]
        a[col] = bytearray(bytes(a[col]).translate(MUL[s]))
        b[col] = b[col].translate(MUL[s])
        arow = bytes(a[col])
        brow = b[col]
        for r in range(n):
            c = a[r][col]
            if r != col and c:
                a[r] = bytearray(_xor(a[r], arow.translate(MUL[c]), n))
                if plen:
                    b[r] = _xor(b[r], brow.translate(MUL[c]), plen)
    return b
