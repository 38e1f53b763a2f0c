"""Distributed combine-then-adapt sensing over the SAP neighbor graph.

Per iteration every SAP smooths its energy measurement, combines the
previous-iteration weights of its neighbors, then adapts the combined value
on channels it senses. Channels it senses combine under adaptive distance
weights; channels it does not sense combine under reference-power weights
restricted (by default) to neighbors that do sense them, freezing when no
such neighbor exists. All SAPs advance synchronously: an iteration reads
only iteration i-1 weights.
"""

from dataclasses import dataclass

import numpy as np

from .model import ConfigurationError


@dataclass(frozen=True)
class DiffusionParams:
    step_size: float = 0.1            # adaptation gain on sensed channels
    smoothing: float = 0.95           # first-order energy filter coefficient
    iterations: int = 200
    epsilon_guard: float = 1e-12      # floor on squared weight distances
    initial_weight: float = 0.0
    beta_set: str = "informative"     # "informative" | "all-neighbors"

    def __post_init__(self):
        if not 0.0 < self.smoothing < 1.0:
            raise ConfigurationError("smoothing must lie in (0, 1)")
        if self.step_size <= 0:
            raise ConfigurationError("step_size must be positive")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.beta_set not in ("informative", "all-neighbors"):
            raise ConfigurationError(f"unknown beta_set {self.beta_set!r}")


@dataclass
class DiffusionState:
    """Weights, smoothed energies, and last combined values after a run."""

    w: np.ndarray        # (K, M)
    d: np.ndarray        # (K, M)
    psi: np.ndarray      # (K, M)
    iteration: int


# ---------------------------------------------------------------------------
# Scalar building blocks (the vectorized loop inlines the same arithmetic)
# ---------------------------------------------------------------------------

def smooth_energy(d_prev, y, smoothing):
    return smoothing * d_prev + (1.0 - smoothing) * y


def compute_gamma(d, y, w_prev):
    return (d - y * w_prev) * y


def alpha_weights(w_self_prev, step_size, gamma, neighbor_w_prev,
                  epsilon_guard=1e-12):
    """Distance-based combination weights over a neighborhood (self included)."""
    target = w_self_prev + step_size * gamma
    dist2 = (target - np.asarray(neighbor_w_prev, dtype=float)) ** 2
    inv = 1.0 / np.maximum(dist2, epsilon_guard)
    return inv / inv.sum()


def beta_weights(reference_powers_of_informative):
    """Reference-power-proportional weights over the informative neighbors."""
    p = np.asarray(reference_powers_of_informative, dtype=float)
    total = p.sum()
    if total <= 0:
        raise ConfigurationError("no informative neighbor with positive reference power")
    return p / total


def adapt(psi, y, d, step_size, senses_channel):
    return psi + (step_size * y * (d - y * psi) if senses_channel else 0.0)


def decide(w, thresholds):
    """Busy verdicts: a block is busy when its weight reaches the threshold."""
    return np.asarray(w) >= np.asarray(thresholds)


# ---------------------------------------------------------------------------
# Synchronous network run
# ---------------------------------------------------------------------------

def _beta_matrices(adjacency, sensing_mask, reference_powers, beta_set):
    """Fixed combination weights for unsensed channels, shape (K, K, M)."""
    k_count = adjacency.shape[0]
    m_count = sensing_mask.shape[1]
    non_self = adjacency & ~np.eye(k_count, dtype=bool)
    if beta_set == "informative":
        informative = non_self[:, :, None] & sensing_mask[None, :, :]
    else:
        informative = np.repeat(non_self[:, :, None], m_count, axis=2)
    p = np.where(informative, reference_powers[:, :, None], 0.0)
    denom = p.sum(axis=1)                      # (K, M)
    has_informative = denom > 0
    beta = np.divide(p, denom[:, None, :], out=np.zeros_like(p),
                     where=denom[:, None, :] > 0)
    return beta, has_informative


def run_diffusion(measurements, sensing_mask, reference_powers, adjacency,
                  params, audit=None, trace=None):
    """Run the full synchronous algorithm and return the final state.

    ``measurements`` is (K, M, N) energies, already conditioned by the
    caller (scaling, receiver clipping). ``audit``, if given, is called each
    iteration with (i, alpha, beta, has_informative) for invariant checks;
    ``trace``, if a list, collects (i, w, d, psi) snapshots.
    """
    y_all = np.asarray(measurements, dtype=float)
    k_count, m_count, n_iter = y_all.shape
    if n_iter < 1:
        raise ConfigurationError("need at least one measurement iteration")
    if params.iterations > n_iter:
        raise ConfigurationError("more iterations requested than measurements")
    sensing_mask = np.asarray(sensing_mask, dtype=bool)
    adjacency = np.asarray(adjacency, dtype=bool)
    mu = params.step_size

    beta, has_informative = _beta_matrices(adjacency, sensing_mask,
                                           reference_powers, params.beta_set)
    freeze = ~sensing_mask & ~has_informative

    w = np.full((k_count, m_count), float(params.initial_weight))
    d = y_all[:, :, 0].copy()
    psi = w.copy()
    adj3 = adjacency[:, :, None]

    for i in range(params.iterations):
        y = y_all[:, :, i]
        d = smooth_energy(d, y, params.smoothing)
        gamma = compute_gamma(d, y, w)

        target = w + mu * gamma                                    # (K, M)
        dist2 = (target[:, None, :] - w[None, :, :]) ** 2          # (K, K, M)
        inv = np.where(adj3, 1.0 / np.maximum(dist2, params.epsilon_guard), 0.0)
        alpha = inv / inv.sum(axis=1, keepdims=True)
        if audit is not None:
            audit(i, alpha, beta, has_informative)

        psi_alpha = np.einsum("kjm,jm->km", alpha, w)
        psi_beta = np.einsum("kjm,jm->km", beta, w)
        psi = np.where(sensing_mask, psi_alpha, psi_beta)
        psi[freeze] = w[freeze]

        w = psi + np.where(sensing_mask, mu * y * (d - y * psi), 0.0)
        if trace is not None:
            trace.append((i, w.copy(), d.copy(), psi.copy()))

    return DiffusionState(w, d, psi, params.iterations)


def clip_dynamic_range(measurements, ceiling):
    """Receiver front-end clamp; ``ceiling=None`` disables it."""
    if ceiling is None:
        return measurements
    return np.minimum(measurements, ceiling)


def default_ceiling(params):
    """Largest energy the adaptation stays contractive for: mu * y^2 <= 1."""
    return float(np.sqrt(1.0 / params.step_size))


def calibrate_threshold(sensing_mask, reference_powers, adjacency, params, rng,
                        reference_level=1.0, calibration_runs=10,
                        estimate_shape=0.7, ceiling=None):
    """Per-(SAP, channel) thresholds from known-energy training runs.

    Feeds the network injected samples of known energy ``reference_level``
    on every channel, corrupted only by the receiver's own estimation noise
    (unit-mean Gamma with ``estimate_shape``; None for noiseless), and
    averages the resulting final weights over ``calibration_runs`` runs.
    The same receiver ``ceiling`` used on live measurements must be
    supplied here. In normalized units the result is threshold-independent.
    """
    k_count, m_count = sensing_mask.shape
    total = np.zeros((k_count, m_count))
    for _ in range(calibration_runs):
        if estimate_shape is None:
            y = np.full((k_count, m_count, params.iterations), reference_level)
        else:
            u = rng.gamma(estimate_shape, 1.0 / estimate_shape,
                          size=(k_count, m_count, params.iterations))
            y = reference_level * u
        y = clip_dynamic_range(y, ceiling)
        state = run_diffusion(y, sensing_mask, reference_powers, adjacency, params)
        total += state.w
    thresholds = total / calibration_runs
    if not np.isfinite(thresholds).all():
        raise ArithmeticError("calibration produced non-finite thresholds")
    return thresholds


def dump_trace_csv(trace, path):
    """Write a run's (i, k, m, w, d, psi) trajectory as CSV."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("i,k,m,w,d,psi\n")
        for i, w, d, psi in trace:
            k_count, m_count = w.shape
            for k in range(k_count):
                for m in range(m_count):
                    fh.write(f"{i},{k},{m},{float(w[k, m])!r},"
                             f"{float(d[k, m])!r},{float(psi[k, m])!r}\n")
