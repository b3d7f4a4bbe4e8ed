import numpy as np
import pytest

from fdrelay.channel import EffectiveChannel, decompose, generate_channels
from fdrelay.config import SystemConfig, dbm_to_watts


def synthetic_channel(lambda_h, lambda_g, f_tilde_sq=None, nr=None):
    """Effective channel built from eigenvalues directly (identity bases)."""
    lambda_h = np.asarray(lambda_h, dtype=float)
    lambda_g = np.asarray(lambda_g, dtype=float)
    nr = nr or max(lambda_h.size, lambda_g.size)
    if f_tilde_sq is None:
        f_tilde_sq = np.zeros((nr, nr))
    eye = np.eye(nr, dtype=complex)
    return EffectiveChannel(
        lambda_h=lambda_h, lambda_g=lambda_g, f_tilde_sq=np.asarray(f_tilde_sq, dtype=float),
        u_h=eye, s_h=np.sqrt(lambda_h), v_h=np.eye(lambda_h.size, dtype=complex),
        u_g=np.eye(lambda_g.size, dtype=complex), s_g=np.sqrt(lambda_g), v_g=eye,
    )


def default_instance(seed, ps_dbm=35.0, **overrides):
    cfg = SystemConfig(ps_watts=dbm_to_watts(ps_dbm), **overrides)
    return cfg, decompose(generate_channels(cfg, seed))


@pytest.fixture
def cfg35():
    return SystemConfig(ps_watts=dbm_to_watts(35.0))


# one line per acceptance criterion, printed after the test summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
