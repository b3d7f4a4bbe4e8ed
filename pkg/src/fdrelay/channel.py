"""Fading channel generation and the eigenmode reduction of the relay link.

The S-R and R-D links are i.i.d. Rayleigh with amplitude path loss
``d**-gamma``; the relay loop-back channel is Rician around a fixed
full-rank line-of-sight matrix.  ``decompose`` rotates everything into the
singular bases of H and G so the optimization only sees eigenvalues and the
rotated self-interference gains ``|U_H^* F V_G|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig, db_to_linear

RANK_RTOL = 1e-12
_SEED_MASK = (1 << 64) - 1


def split_seed(seed: int, index: int) -> int:
    """Per-realization seed: base seed XOR realization index (64-bit)."""
    return (int(seed) ^ int(index)) & _SEED_MASK


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray  # nr x ns, S-R
    g: np.ndarray  # nd x nr, R-D
    f: np.ndarray  # nr x nr, relay loop-back (RF)
    seed: int


@dataclass(frozen=True)
class EffectiveChannel:
    """Eigen-domain view of one realization.

    ``f_tilde_sq`` is the full nr x nr matrix ``|U_H^* F V_G|^2``; rows are
    relay receive beams, columns relay transmit beams.  Only the first
    ``k2`` columns carry power in the optimized schemes (``si_gain``).
    """

    lambda_h: np.ndarray
    lambda_g: np.ndarray
    f_tilde_sq: np.ndarray
    u_h: np.ndarray
    s_h: np.ndarray
    v_h: np.ndarray
    u_g: np.ndarray
    s_g: np.ndarray
    v_g: np.ndarray

    @property
    def k1(self) -> int:
        return self.lambda_h.size

    @property
    def k2(self) -> int:
        return self.lambda_g.size

    @property
    def nr(self) -> int:
        return self.f_tilde_sq.shape[0]

    @property
    def degenerate(self) -> bool:
        return self.k1 == 0 or self.k2 == 0

    @property
    def si_gain(self) -> np.ndarray:
        """nr x k2 block of rotated SI gains seen by the active transmit beams."""
        return self.f_tilde_sq[:, : self.k2]

    def without_si(self) -> "EffectiveChannel":
        """Same channel with the RF self-interference gains zeroed."""
        return _replace(self, f_tilde_sq=np.zeros_like(self.f_tilde_sq))


def _replace(eff: EffectiveChannel, **changes) -> EffectiveChannel:
    import dataclasses

    return dataclasses.replace(eff, **changes)


def los_matrix(nr: int) -> np.ndarray:
    """Deterministic unit-modulus, full-rank line-of-sight SI component."""
    k = np.arange(nr)
    return np.exp(1j * np.pi * np.outer(k, k) / nr)


def _cn(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_channels(config: SystemConfig, seed: int) -> ChannelRealization:
    """Draw H, G and F for one realization.

    Draw order is fixed (H, then G, then the scattered part of F) so the
    output is a pure function of ``(config, seed)``.
    """
    seed = int(seed) & _SEED_MASK
    rng = np.random.default_rng(seed)
    h = config.d_sr ** (-config.gamma) * _cn(rng, (config.nr, config.ns))
    g = config.d_rd ** (-config.gamma) * _cn(rng, (config.nd, config.nr))
    f_w = _cn(rng, (config.nr, config.nr))

    k = db_to_linear(config.rician_k_db)
    omega = db_to_linear(config.omega_db)
    if np.isinf(k):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los, w_nlos = np.sqrt(k / (k + 1.0)), np.sqrt(1.0 / (k + 1.0))
    f = np.sqrt(omega) * (w_los * los_matrix(config.nr) + w_nlos * f_w)
    return ChannelRealization(h=h, g=g, f=f, seed=seed)


def _rank(s: np.ndarray) -> int:
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.count_nonzero(s >= RANK_RTOL * s[0]))


def decompose(realization: ChannelRealization) -> EffectiveChannel:
    h, g, f = realization.h, realization.g, realization.f
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(g)) and np.all(np.isfinite(f))):
        raise ValueError("channel matrices must be finite")
    u_h, s_h, vh_h = np.linalg.svd(h)
    u_g, s_g, vh_g = np.linalg.svd(g)
    v_h = vh_h.conj().T
    v_g = vh_g.conj().T
    k1, k2 = _rank(s_h), _rank(s_g)
    f_tilde = u_h.conj().T @ f @ v_g
    return EffectiveChannel(
        lambda_h=s_h[:k1] ** 2,
        lambda_g=s_g[:k2] ** 2,
        f_tilde_sq=np.abs(f_tilde) ** 2,
        u_h=u_h, s_h=s_h, v_h=v_h,
        u_g=u_g, s_g=s_g, v_g=v_g,
    )


def reconstruct_covariances(effective: EffectiveChannel, primal) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Matrix-domain source/relay covariances and relay receive combiner.

    ``primal`` is anything with ``p`` (length k1) and ``q`` (length k2).
    Returns ``(Ws, Wr, Qr)`` with ``Ws = V_H diag(p) V_H^*``,
    ``Wr = V_G diag(q) V_G^*`` and ``Qr = U_H^*``.
    """
    p = np.asarray(primal.p, dtype=float)
    q = np.asarray(primal.q, dtype=float)
    if p.shape != (effective.k1,) or q.shape != (effective.k2,):
        raise ValueError(
            f"primal shapes p{p.shape}, q{q.shape} do not match k1={effective.k1}, k2={effective.k2}")
    vh = effective.v_h[:, : effective.k1]
    vg = effective.v_g[:, : effective.k2]
    ws = (vh * p) @ vh.conj().T
    wr = (vg * q) @ vg.conj().T
    return ws, wr, effective.u_h.conj().T


def matrix_rates_and_power(realization: ChannelRealization, ws, wr, qr, rho, cfg: SystemConfig,
                           harvest_si: bool = True) -> tuple[float, float, float]:
    """Hop rates (bits/s/Hz) and relay power straight from the covariance matrices.

    Log-det first-hop rate after power splitting, log-det second-hop rate,
    and trace-form harvested power minus the cancellation draw.  Used to
    cross-check the scalar eigen-domain expressions.
    """
    h, g, f = realization.h, realization.g, realization.f
    rho = np.asarray(rho, dtype=float)
    lam_rho = np.diag(rho)
    nr, nd = h.shape[0], g.shape[0]
    rx = qr @ h @ ws @ h.conj().T @ qr.conj().T
    _, ld1 = np.linalg.slogdet(np.eye(nr) + (np.eye(nr) - lam_rho) @ rx / cfg.noise_relay)
    _, ld2 = np.linalg.slogdet(np.eye(nd) + g @ wr @ g.conj().T / cfg.sigma_d2)
    harvested = np.trace(lam_rho @ rx).real
    if harvest_si:
        harvested += np.trace(lam_rho @ qr @ f @ wr @ f.conj().T @ qr.conj().T).real
    pr = cfg.eta * harvested - cfg.p_ic_watts
    return ld1 / np.log(2.0), ld2 / np.log(2.0), float(pr)
