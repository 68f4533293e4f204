import time

import numpy as np
import pytest

from channelforge import channels, realization

_SESSION_START = time.perf_counter()
SUITE_BUDGET = 360.0

# every plan built through plan_channel during the session, checked by the extremal-range criterion
PRODUCED_PLANS = []
_plan_channel = realization.plan_channel


def _recording_plan_channel(K, *args, **kwargs):
    plan = _plan_channel(K, *args, **kwargs)
    PRODUCED_PLANS.append((plan.d, plan.p_succ))
    return plan


realization.plan_channel = _recording_plan_channel

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def extremal_violations():
    return [(d, p) for d, p in PRODUCED_PLANS if not 1 / d - 1e-9 <= p <= 1 + 1e-9]


def basis_ops(d):
    out = []
    for j in range(d):
        for k in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[j, k] = 1
            out.append(E)
    return out


def same_action(K1, K2, tol):
    """Largest entry-wise gap between two channels over the |j><k| basis."""
    gap = 0.0
    for E in basis_ops(K1.d):
        gap = max(gap, np.max(np.abs(channels.apply_channel(K1, E) - channels.apply_channel(K2, E))))
    return gap <= tol


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - _SESSION_START
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        bad = extremal_violations()
        if 7 in ACCEPTANCE:
            ok7, detail = ACCEPTANCE[7]
            ACCEPTANCE[7] = (ok7 and not bad, f"{detail}; {len(PRODUCED_PLANS)} plans over the whole session, "
                                              f"{len(bad)} outside [1/d, 1]")
        for n in sorted(ACCEPTANCE):
            ok, detail = ACCEPTANCE[n]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n}: {detail}")
    terminalreporter.write_line(f"suite wall-clock: {elapsed:.1f} s (budget {SUITE_BUDGET:.0f} s) "
                                f"{'PASS' if elapsed <= SUITE_BUDGET else 'FAIL'}")


def pytest_sessionfinish(session, exitstatus):
    # a plan outside the extremal range anywhere in the run fails the session
    if extremal_violations() and session.exitstatus == 0:
        session.exitstatus = 1
