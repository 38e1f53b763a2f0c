"""Evaluation metrics over decision maps and ground truth.

Metrics with an empty denominator return None ("absent"); aggregation skips
those realizations and reports how many contributed.
"""

import numpy as np


def utilization_ratio(decision_map, truth_busy):
    """Correctly identified available blocks relative to all truly available."""
    truth_busy = np.asarray(truth_busy, dtype=bool)
    truly_available = ~truth_busy
    denom = truly_available.sum()
    if denom == 0:
        return None
    hits = (decision_map.available & truly_available).sum()
    return float(hits / denom)


def misdetection_probability(decision_map, truth_busy):
    """Probability of declaring a truly busy block available."""
    truth_busy = np.asarray(truth_busy, dtype=bool)
    denom = truth_busy.sum()
    if denom == 0:
        return None
    misses = (decision_map.available & truth_busy).sum()
    return float(misses / denom)


def correct_decision_pct(decision_map, truth_busy, scope_mask=None):
    """Percentage of evaluated blocks whose verdict matches the truth.

    No-decision blocks are never evaluated; ``scope_mask`` further restricts
    the evaluated set (e.g. to each SAP's own sensed channels).
    """
    truth_busy = np.asarray(truth_busy, dtype=bool)
    evaluated = decision_map.decided
    if scope_mask is not None:
        evaluated = evaluated & np.asarray(scope_mask, dtype=bool)
    denom = evaluated.sum()
    if denom == 0:
        return None
    matches = ((decision_map.busy == truth_busy) & evaluated).sum()
    return float(100.0 * matches / denom)


def attach_devices(device_positions, sap_positions):
    """Nearest-SAP attachment; ties go to the smaller SAP id."""
    dev = np.asarray(device_positions, dtype=float).reshape(-1, 2)
    sap = np.asarray(sap_positions, dtype=float)
    d2 = ((dev[:, None, :] - sap[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def schedule_devices(decision_map, truth_busy, device_positions, sap_positions,
                     capacity_per_block=1):
    """Devices served over correctly identified available blocks.

    Each device asks its nearest SAP; a SAP serves up to capacity_per_block
    devices per correct-available block, first-come by device index.
    """
    if capacity_per_block < 1:
        raise ValueError("capacity_per_block must be >= 1")
    truth_busy = np.asarray(truth_busy, dtype=bool)
    correct_available = decision_map.available & ~truth_busy
    slots = correct_available.sum(axis=1) * capacity_per_block
    home = attach_devices(device_positions, sap_positions)
    demand = np.bincount(home, minlength=slots.shape[0])
    return int(np.minimum(demand, slots).sum())


def aggregate(values):
    """Mean/std over defined per-realization values.

    Returns (mean, std, count); std uses the n-1 denominator and is 0.0 for
    a single sample. All-absent series aggregate to (None, None, 0).
    """
    present = [v for v in values if v is not None]
    if not present:
        return None, None, 0
    arr = np.asarray(present, dtype=float)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std, int(arr.size)
