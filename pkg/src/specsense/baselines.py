"""Comparison schemes producing per-block decisions from a shared frame.

Every scheme consumes the same conditioned measurement array within a
realization so differences come only from the decision architecture. A
DecisionMap marks a block no-decision (decided=False) when the scheme has no
verdict for it, which only the non-cooperative single-band scheme does.
"""

from dataclasses import dataclass

import numpy as np

from .diffusion import DiffusionParams, decide, run_diffusion
from .model import ConfigurationError

SCHEME_IDS = (
    "genie",
    "proposed-multiband",
    "proposed-singleband",
    "centralized",
    "noncoop-multiband",
    "noncoop-singleband",
)

# which calibrated threshold structure each diffusion-based scheme decides with
CALIBRATION_STRUCTURE = {
    "proposed-multiband": "coop-full",
    "proposed-singleband": "coop-assigned",
    "noncoop-multiband": "standalone",
    "noncoop-singleband": "standalone",
}


@dataclass
class DecisionMap:
    busy: np.ndarray      # (K, M) bool
    decided: np.ndarray   # (K, M) bool; False marks no-decision blocks

    @property
    def available(self):
        return self.decided & ~self.busy


def _full_map(busy):
    busy = np.asarray(busy, dtype=bool)
    return DecisionMap(busy.copy(), np.ones_like(busy, dtype=bool))


def genie(truth_busy):
    """Perfect knowledge of the ground-truth occupancy."""
    return _full_map(truth_busy)


def centralized_egc(measurements, threshold=1.0):
    """Equal-gain combining at a fusion center: one verdict per channel.

    The statistic is the plain mean energy over all SAPs and iterations, so
    one strong local measurement can drag a whole channel busy everywhere.
    """
    y = np.asarray(measurements)
    k_count = y.shape[0]
    t_m = y.mean(axis=(0, 2))
    busy_row = t_m >= threshold
    return _full_map(np.tile(busy_row, (k_count, 1)))


def _standalone_state(measurements, params):
    """Diffusion on the self-only graph: the per-SAP adaptive filter."""
    k_count, m_count, _ = measurements.shape
    return run_diffusion(
        measurements,
        np.ones((k_count, m_count), dtype=bool),
        np.zeros((k_count, k_count)),
        np.eye(k_count, dtype=bool),
        params,
    )


def _raw_energy_busy(measurements, energy_threshold):
    """Plain energy detection on the latest sensing window.

    Without the adaptive filter a SAP has no smoothed statistic; it compares
    its current window's energy estimate against the threshold directly,
    which is what makes raw decisions fluctuate window to window.
    """
    return np.asarray(measurements)[:, :, -1] >= energy_threshold


def noncoop_multiband(measurements, params, thresholds, raw_energy=False,
                      energy_threshold=1.0):
    """Every SAP senses all channels and decides alone."""
    if raw_energy:
        return _full_map(_raw_energy_busy(measurements, energy_threshold))
    state = _standalone_state(measurements, params)
    return _full_map(decide(state.w, thresholds))


def noncoop_singleband(measurements, channel_picks, params, thresholds,
                       raw_energy=False, energy_threshold=1.0):
    """Every SAP senses one random channel; all other blocks stay undecided."""
    y = np.asarray(measurements)
    k_count, m_count, _ = y.shape
    picks = np.asarray(channel_picks, dtype=int)
    if picks.shape != (k_count,) or picks.min() < 0 or picks.max() >= m_count:
        raise ConfigurationError("need one valid channel pick per SAP")
    decided = np.zeros((k_count, m_count), dtype=bool)
    decided[np.arange(k_count), picks] = True
    if raw_energy:
        busy = _raw_energy_busy(y, energy_threshold)
    else:
        # the self-only filter evolves each channel independently, so running
        # every channel and masking afterwards matches sensing only the pick
        state = _standalone_state(y, params)
        busy = decide(state.w, thresholds)
    return DecisionMap(busy & decided, decided)


def proposed_multiband(measurements, reference_powers, adjacency, params,
                       thresholds):
    """Cooperative diffusion with every SAP sensing the whole spectrum."""
    k_count, m_count, _ = measurements.shape
    state = run_diffusion(
        measurements,
        np.ones((k_count, m_count), dtype=bool),
        reference_powers,
        adjacency,
        params,
    )
    return _full_map(decide(state.w, thresholds))


def proposed_singleband(measurements, sensing_mask, reference_powers,
                        adjacency, params, thresholds):
    """Full pipeline: scheduler-assigned subsets plus cooperative diffusion.

    Decisions exist for every block; unsensed channels are inferred through
    the reference-power combination branch.
    """
    state = run_diffusion(measurements, sensing_mask, reference_powers,
                          adjacency, params)
    return _full_map(decide(state.w, thresholds))


def run_scheme(name, *, measurements, truth_busy=None, sensing_mask=None,
               reference_powers=None, adjacency=None, params=None,
               thresholds=None, channel_picks=None, raw_energy=False,
               energy_threshold=1.0):
    """Dispatch one scheme by id with the inputs it needs."""
    if params is None:
        params = DiffusionParams()
    if name == "genie":
        return genie(truth_busy)
    if name == "centralized":
        return centralized_egc(measurements, energy_threshold)
    if name == "noncoop-multiband":
        return noncoop_multiband(measurements, params, thresholds,
                                 raw_energy, energy_threshold)
    if name == "noncoop-singleband":
        return noncoop_singleband(measurements, channel_picks, params,
                                  thresholds, raw_energy, energy_threshold)
    if name == "proposed-multiband":
        return proposed_multiband(measurements, reference_powers, adjacency,
                                  params, thresholds)
    if name == "proposed-singleband":
        return proposed_singleband(measurements, sensing_mask,
                                   reference_powers, adjacency, params,
                                   thresholds)
    raise ConfigurationError(f"unknown scheme {name!r}")
