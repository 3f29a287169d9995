"""Independent reference constructions shared by the test modules."""

import numpy as np
import pytest

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.diag([-1.0, 1.0])  # basis order (bit 0, bit 1) = (sz=-1, sz=+1)


def site_op(op, site, n):
    """Operator on 0-based ``site``; site 0 is the least significant bit.

    np.kron puts its first factor on the most significant bit, so sites are
    listed from n-1 down to 0.
    """
    out = np.ones((1, 1))
    for k in reversed(range(n)):
        out = np.kron(out, op if k == site else np.eye(2))
    return out


def kron_hamiltonian(n, delta, coupling, gain, periodic=True):
    """Brute-force tensor-product Hamiltonian, written straight from the formula."""
    dim = 1 << n
    h = np.zeros((dim, dim), dtype=complex)
    for k in range(n):
        sign = 1.0 if k % 2 == 0 else -1.0  # site k+1 carries (-1)**k
        h += delta * site_op(SX, k, n) + 1j * gain * sign * site_op(SZ, k, n)
    bonds = [(k, k + 1) for k in range(n - 1)]
    if periodic and n > 1:
        bonds.append((n - 1, 0))
    for a, b in bonds:
        h -= coupling * site_op(SZ, a, n) @ site_op(SZ, b, n)
    return h


def dense_correlation(vec, n, ref=0):
    """C(j) = <v| sz_ref sz_{ref+j} |v> / <v|v> by explicit operators."""
    vec = np.asarray(vec, dtype=complex)
    norm = np.vdot(vec, vec)
    out = []
    for j in range(n + 1):
        op = site_op(SZ, ref, n) @ site_op(SZ, (ref + j) % n, n)
        out.append(np.vdot(vec, op @ vec) / norm)
    return np.array(out)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)



class _Criterion:
    def __init__(self):
        self.line = None

    def report(self, number, ok, detail):
        self.line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {detail}"
        return ok


@pytest.fixture
def criterion(request):
    """Records one verdict line per acceptance criterion for the run summary."""
    c = _Criterion()
    yield c
    lines = request.config.stash.setdefault(_VERDICTS_KEY, [])
    lines.append(c.line or f"{request.node.name}: FAIL: no verdict (error before the check)")


_VERDICTS_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
