import numpy as np
import pytest

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def bell_pair_ket(phase=0.0):
    """(|00> + e^{i phase}|11>)/sqrt(2) on two qubits, written out by hand."""
    return np.array([1, 0, 0, np.exp(1j * phase)], dtype=complex) / np.sqrt(2)


def hand_hyperentangled_ket(phi_p=0.0, phi_t=0.0):
    """Pol pair x time pair reordered to (photon A, photon B) with explicit index loops."""
    pol = bell_pair_ket(phi_p)
    tim = bell_pair_ket(phi_t)
    out = np.zeros(16, dtype=complex)
    for pa in range(2):
        for pb in range(2):
            for ta in range(2):
                for tb in range(2):
                    a = 2 * pa + ta
                    b = 2 * pb + tb
                    out[4 * a + b] += pol[2 * pa + pb] * tim[2 * ta + tb]
    return out
