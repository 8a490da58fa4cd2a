"""Random-walk and AR(1) load/wind models around a mean trajectory."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .network import PROBABILITY_TOL, ContingencyModel


@dataclass(frozen=True)
class ScenarioModel:
    """``kind="rw"``: theta_t = theta_{t-1} + (mean_t - mean_{t-1}) + eps_t.

    ``kind="ar1"``: (theta_t - mean_t) = phi * (theta_{t-1} - mean_{t-1}) + eps_t,
    with ``phi`` applied element-wise.
    """

    kind: Literal["rw", "ar1"]
    mean_trajectory: np.ndarray   # shape (n_times, dim)
    sigma: np.ndarray             # innovation covariance, shape (dim, dim)
    phi: np.ndarray | None = None
    seed: int = 0
    literal_ar1_variance: bool = False

    def __post_init__(self):
        traj = np.asarray(self.mean_trajectory, dtype=float)
        if traj.ndim == 1:
            traj = traj[:, None]
        object.__setattr__(self, "mean_trajectory", traj)
        sig = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sig.shape == (1, 1) and traj.shape[1] > 1:
            sig = sig[0, 0] * np.eye(traj.shape[1])
        object.__setattr__(self, "sigma", sig)
        if self.kind not in ("rw", "ar1"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if sig.shape != (self.dim, self.dim):
            raise ValueError("covariance does not match the trajectory dimension")
        if not np.allclose(sig, sig.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(sig).min() < -1e-10:
            raise ValueError("covariance must be positive semidefinite")
        if self.kind == "ar1":
            if self.phi is None:
                raise ValueError("AR(1) model needs phi")
            phi = np.broadcast_to(np.asarray(self.phi, dtype=float), (self.dim,)).copy()
            if np.any(np.abs(phi) >= 1):
                raise ValueError("AR(1) coefficient must satisfy |phi| < 1")
            object.__setattr__(self, "phi", phi)

    @property
    def dim(self) -> int:
        return self.mean_trajectory.shape[1]

    @property
    def n_times(self) -> int:
        return self.mean_trajectory.shape[0]

    def mean(self, t: int) -> np.ndarray:
        if not 0 <= t < self.n_times:
            raise ValueError(f"time {t} outside the mean trajectory (0..{self.n_times - 1})")
        return self.mean_trajectory[t]


@dataclass(frozen=True)
class ConditionalLaw:
    mean: np.ndarray
    cov: np.ndarray
    horizon: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return gaussian_samples(rng, self.mean, self.cov, n)

    def is_degenerate(self, tol: float = 1e-12) -> bool:
        return bool(np.linalg.eigvalsh(self.cov).min() <= tol * max(1.0, np.abs(self.cov).max()))


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Square factor ``L`` with ``L L' = cov`` that tolerates singular input."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(cov)
        return V * np.sqrt(np.clip(w, 0.0, None))


def gaussian_samples(rng: np.random.Generator, mean, cov, n: int) -> np.ndarray:
    """Draw ``n`` rows from N(mean, cov); standard normals fill row-major."""
    mean = np.asarray(mean, dtype=float)
    z = rng.standard_normal((n, mean.size))
    return mean + z @ _psd_factor(np.asarray(cov, dtype=float)).T


def _symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def conditional_law(model: ScenarioModel, theta_t, t: int, T: int) -> ConditionalLaw:
    """Law of theta_{t+T} given theta_t.

    The AR(1) covariance sums phi^(2i) per the variance of independent
    innovations; ``literal_ar1_variance`` switches to a plain phi^i sum for
    comparison.
    """
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    theta_t = np.atleast_1d(np.asarray(theta_t, dtype=float))
    mean_t, mean_T = model.mean(t), model.mean(t + T)
    if theta_t.shape != mean_t.shape:
        raise ValueError("observed parameter dimension does not match the model")
    if model.kind == "rw":
        return ConditionalLaw(theta_t + mean_T - mean_t, _symmetrize(T * model.sigma), T)
    phi = model.phi
    mean = mean_T + phi ** T * (theta_t - mean_t)
    cov = np.zeros_like(model.sigma)
    for i in range(T):
        d = phi ** i
        if model.literal_ar1_variance:
            cov += 0.5 * (d[:, None] * model.sigma + model.sigma * d[None, :])
        else:
            cov += d[:, None] * model.sigma * d[None, :]
    return ConditionalLaw(mean, _symmetrize(cov), T)


def sample_path(model: ScenarioModel, seed: int | None = None, horizon: int | None = None,
                theta0=None, t0: int = 0) -> np.ndarray:
    """Simulate theta_{t0..t0+horizon} by the model recursion.

    The start value defaults to the mean trajectory at ``t0``.
    """
    rng = np.random.default_rng(model.seed if seed is None else seed)
    last = model.n_times - 1 - t0 if horizon is None else horizon
    if t0 + last >= model.n_times:
        raise ValueError("horizon runs past the mean trajectory")
    path = np.empty((last + 1, model.dim))
    path[0] = model.mean(t0) if theta0 is None else np.asarray(theta0, dtype=float)
    noise = gaussian_samples(rng, np.zeros(model.dim), model.sigma, last)
    traj = model.mean_trajectory
    for s in range(1, last + 1):
        t = t0 + s
        if model.kind == "rw":
            path[s] = path[s - 1] + traj[t] - traj[t - 1] + noise[s - 1]
        else:
            path[s] = traj[t] + model.phi * (path[s - 1] - traj[t - 1]) + noise[s - 1]
    return path


def sample_paths(model: ScenarioModel, n: int, seed: int, horizon: int | None = None,
                 theta0=None, t0: int = 0) -> np.ndarray:
    """``n`` independent paths, vectorised; shape (n, horizon + 1, dim)."""
    rng = np.random.default_rng(seed)
    last = model.n_times - 1 - t0 if horizon is None else horizon
    if t0 + last >= model.n_times:
        raise ValueError("horizon runs past the mean trajectory")
    out = np.empty((n, last + 1, model.dim))
    out[:, 0] = model.mean(t0) if theta0 is None else np.asarray(theta0, dtype=float)
    L = _psd_factor(model.sigma)
    traj = model.mean_trajectory
    for s in range(1, last + 1):
        t = t0 + s
        eps = rng.standard_normal((n, model.dim)) @ L.T
        if model.kind == "rw":
            out[:, s] = out[:, s - 1] + traj[t] - traj[t - 1] + eps
        else:
            out[:, s] = traj[t] + model.phi * (out[:, s - 1] - traj[t - 1]) + eps
    return out


def sample_contingency(model: ContingencyModel | np.ndarray, seed: int | None = None,
                       size: int | None = None, rng: np.random.Generator | None = None):
    """Configuration index drawn with probabilities p_0..p_K."""
    probs = model.probabilities if isinstance(model, ContingencyModel) else np.asarray(model)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROBABILITY_TOL:
        raise ValueError("configuration probabilities must be nonnegative and sum to 1")
    rng = np.random.default_rng(seed) if rng is None else rng
    return rng.choice(len(probs), size=size, p=probs)


def scenario_from_dict(doc: dict) -> ScenarioModel:
    kind = doc.get("model")
    if kind not in ("rw", "ar1"):
        raise ValueError("scenario 'model' must be 'rw' or 'ar1'")
    if "mean_trajectory" not in doc or "sigma" not in doc:
        raise ValueError("scenario needs 'mean_trajectory' and 'sigma'")
    return ScenarioModel(kind, np.asarray(doc["mean_trajectory"], dtype=float),
                         np.asarray(doc["sigma"], dtype=float),
                         None if doc.get("phi") is None else np.asarray(doc["phi"], float),
                         int(doc.get("seed", 0)), bool(doc.get("literal_ar1_variance", False)))


def load_scenario(text: str) -> ScenarioModel:
    return scenario_from_dict(json.loads(text))


def scenario_to_dict(model: ScenarioModel) -> dict:
    traj = model.mean_trajectory
    return {
        "model": model.kind,
        "mean_trajectory": traj[:, 0].tolist() if model.dim == 1 else traj.tolist(),
        "sigma": model.sigma.tolist(),
        "phi": None if model.phi is None else model.phi.tolist(),
        "seed": model.seed,
        "literal_ar1_variance": model.literal_ar1_variance,
    }
