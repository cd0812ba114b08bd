"""Posterior Fisher information, PCRB scalarization and the extended Kalman filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .dynamics import MotionModel, measurement_jacobian, to_polar, wrap_angle

_EIG_FLOOR = 1e-12
_RANK_TOL = 256 * np.finfo(float).eps


class NumericalError(ArithmeticError):
    pass


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _checked_inv(a: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e15:
        raise NumericalError(f"{what} is singular or ill-conditioned (cond={cond:.3e})")
    return _sym(np.linalg.inv(a))


def prior_fim(j_prev: np.ndarray, transition: np.ndarray, process_cov: np.ndarray) -> np.ndarray:
    """FIM after one motion step: ``(Phi + F J^-1 F^T)^-1``."""
    c_prev = _checked_inv(j_prev, "previous FIM")
    return _checked_inv(prior_pcrb(c_prev, transition, process_cov), "predicted PCRB")


def prior_pcrb(c_prev: np.ndarray, transition: np.ndarray, process_cov: np.ndarray) -> np.ndarray:
    """Covariance form of :func:`prior_fim`; avoids inverting a stiff FIM."""
    return _sym(process_cov + transition @ c_prev @ transition.T)


def data_fim(jac: np.ndarray, cov: np.ndarray) -> np.ndarray:
    return _sym(jac.T @ np.diag(1.0 / np.diag(cov)) @ jac)


def pcrb_trace(j: np.ndarray) -> float:
    return float(np.trace(_checked_inv(j, "FIM")))


def posterior_pcrb(c_prior: np.ndarray, jac: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """``(C_p^-1 + Q^T Sigma^-1 Q)^-1`` through the Woodbury identity."""
    s = cov + jac @ c_prior @ jac.T
    gain = np.linalg.solve(s, jac @ c_prior).T
    return _sym(c_prior - gain @ jac @ c_prior)


@dataclass(frozen=True)
class ScalarizedPcrb:
    """``trace((E + s V)^-1) = sum_j 1 / (a_j + b_j s)`` in the eigenbasis ``G``."""

    a: np.ndarray
    b: np.ndarray
    basis: np.ndarray
    eigvals: np.ndarray

    def value(self, s) -> np.ndarray | float:
        s = np.asarray(s, dtype=float)
        out = np.sum(1.0 / (self.a + self.b * s[..., None]), axis=-1)
        return float(out) if out.ndim == 0 else out

    def slope(self, s) -> np.ndarray | float:
        """Derivative of :meth:`value` with respect to ``s``."""
        s = np.asarray(s, dtype=float)
        out = -np.sum(self.b / (self.a + self.b * s[..., None]) ** 2, axis=-1)
        return float(out) if out.ndim == 0 else out


def _cov_root(e: np.ndarray | None, e_inv: np.ndarray | None) -> np.ndarray:
    """``R`` with ``R R^T = E^-1``.

    Working on the covariance side keeps round-off relative to the largest
    variance, which is what dominates the trace; a stiff ``E`` (one huge
    information direction) would otherwise produce spurious negative
    eigenvalues.
    """
    if e_inv is None:
        w, u = np.linalg.eigh(_sym(e))
        if w[-1] <= 0 or w[0] <= -_RANK_TOL * w[-1]:
            raise NumericalError(f"E is not positive definite (eigenvalues {w})")
        w = np.maximum(w, _EIG_FLOOR * w[-1])
        return u / np.sqrt(w)
    w, u = np.linalg.eigh(_sym(e_inv))
    if w[-1] <= 0 or w[0] <= -_RANK_TOL * w[-1]:
        raise NumericalError(f"E^-1 is not positive definite (eigenvalues {w})")
    return u * np.sqrt(np.maximum(w, _EIG_FLOOR * w[-1]))


def _factor(v: np.ndarray) -> np.ndarray:
    """Columns ``L`` with ``V = L L^T`` dropping round-off eigenvalues."""
    w, u = np.linalg.eigh(_sym(v))
    if w[-1] <= 0:
        return np.zeros((v.shape[0], 0))
    keep = w > _RANK_TOL * w[-1]
    return u[:, keep] * np.sqrt(w[keep])


def scalarize(e: np.ndarray | None, v: np.ndarray | None = None, *,
              factor: np.ndarray | None = None, e_inv: np.ndarray | None = None,
              ) -> ScalarizedPcrb:
    """Diagonalize ``R^T V R`` (``R R^T = E^-1``) and return the per-direction coefficients.

    ``V`` may be passed as a low-rank factor ``L`` (``V = L L^T``) so that its
    null space is exactly zero rather than round-off.  When ``E^-1`` is known
    accurately, pass it as ``e_inv`` and ``E`` itself is not needed.
    """
    if factor is None:
        factor = _factor(v)
    dim = (e if e_inv is None else e_inv).shape[0]
    factor = np.asarray(factor, dtype=float).reshape(dim, -1)
    r = _cov_root(e, e_inv)
    w = r.T @ factor
    if w.shape[1]:
        g, sv, _ = np.linalg.svd(w, full_matrices=True)
        lam = np.zeros(dim)
        lam[: sv.size] = sv**2
    else:
        g, lam = np.eye(dim), np.zeros(dim)
    cols = r @ g
    a = 1.0 / np.sum(cols * cols, axis=0)
    return ScalarizedPcrb(a, a * lam, g, lam)


def bandwidth_blocks(j_prior: np.ndarray, jac: np.ndarray, gain: float,
                     config: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """``(E, factor of V)`` so that the posterior FIM is ``E + n^2 V``."""
    s2 = config.sigma_s2
    q1, q2 = jac[0], jac[1]
    c_phi = gain / (config.kappa_phi * s2 * config.beamwidth)
    c_d = gain * config.rb_bandwidth**2 / (config.kappa_d * s2)
    e = _sym(j_prior + c_phi * np.outer(q2, q2))
    return e, (np.sqrt(c_d) * q1)[:, None]


def scalarize_bandwidth(j_prior: np.ndarray, jac: np.ndarray, gain: float,
                        config: ScenarioConfig, c_prior: np.ndarray | None = None,
                        ) -> ScalarizedPcrb:
    """Bandwidth-block coefficients; ``c_prior = J_p^-1`` enables the accurate ``E^-1`` path."""
    e, f = bandwidth_blocks(j_prior, jac, gain, config)
    if c_prior is None:
        return scalarize(e, factor=f)
    # E^-1 is the posterior covariance after the bearing row alone
    var_phi = config.kappa_phi * config.sigma_s2 * config.beamwidth / gain
    q2 = jac[1:2]
    cq = c_prior @ q2.T
    e_inv = _sym(c_prior - cq @ cq.T / (var_phi + float((q2 @ cq)[0, 0])))
    return scalarize(None, factor=f, e_inv=e_inv)


def power_factor(jac: np.ndarray, cov_unit: np.ndarray) -> np.ndarray:
    """Factor of ``Q^T Sigma_unit^-1 Q`` where ``Sigma_unit`` is the 1 W covariance."""
    return jac.T / np.sqrt(np.diag(cov_unit))


def scalarize_power(j_prior: np.ndarray, jac: np.ndarray, cov_unit: np.ndarray,
                    config: ScenarioConfig | None = None, c_prior: np.ndarray | None = None,
                    ) -> ScalarizedPcrb:
    if c_prior is not None:
        return scalarize(None, factor=power_factor(jac, cov_unit), e_inv=c_prior)
    return scalarize(j_prior, factor=power_factor(jac, cov_unit))


def ekf_predict(est: np.ndarray, cov: np.ndarray, model: MotionModel) -> tuple[np.ndarray, np.ndarray]:
    f = model.transition
    return f @ est, _sym(f @ cov @ f.T + model.process_cov)


def ekf_update(pred: np.ndarray, cov_pred: np.ndarray, z: np.ndarray,
               sigma_hat: np.ndarray, iterations: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Kalman correction; ``iterations > 1`` relinearizes at the running estimate.

    With one iteration this is the standard extended Kalman update.  More
    iterations are Gauss-Newton steps on the same MAP problem, which matter
    when the prior is far wider than the measurement noise.
    """
    x = pred
    for _ in range(max(1, iterations)):
        q = measurement_jacobian(x)
        s = sigma_hat + q @ cov_pred @ q.T
        if np.linalg.cond(s) > 1e15:
            raise NumericalError("innovation covariance is singular")
        k = np.linalg.solve(s, q @ cov_pred).T
        d, phi = to_polar(x)
        innov = np.array([z[0] - d, wrap_angle(z[1] - phi)]) - q @ (pred - x)
        x_new = pred + k @ innov
        done = np.allclose(x_new, x, rtol=0, atol=1e-12 * (1 + np.abs(x).max()))
        x = x_new
        if done:
            break
    return x, _sym((np.eye(4) - k @ q) @ cov_pred)


def ekf_step(est: np.ndarray, cov: np.ndarray, model: MotionModel, z: np.ndarray,
             sigma_hat: np.ndarray, iterations: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Predict then correct with measurement ``z`` under assumed covariance ``sigma_hat``."""
    pred, cov_pred = ekf_predict(est, cov, model)
    return ekf_update(pred, cov_pred, z, sigma_hat, iterations)
