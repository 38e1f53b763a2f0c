"""Monte-Carlo campaign orchestration and result emission.

A campaign sweeps decision thresholds over many realizations of one
scenario. Per realization one measurement frame is generated at a fixed
reference level and every scheme consumes that same frame; per threshold the
frame is rescaled so the threshold maps to 1.0 in normalized units. Raw
energy detectors (centralized, and the raw-energy non-cooperative variant)
see the rescaled frame as-is; adaptive-filter schemes see it through the
receiver's dynamic-range clamp. Decision thresholds for the diffusion
schemes are calibrated once per campaign per network structure on a
representative assignment; in normalized units one calibration covers the
whole sweep.

All randomness flows through named substreams of the master seed, so reruns
are byte-identical and realizations are order-independent.
"""

import csv
import json
import logging
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import CALIBRATION_STRUCTURE, SCHEME_IDS, run_scheme
from .diffusion import (DiffusionParams, calibrate_threshold,
                        clip_dynamic_range, default_ceiling)
from .metrics import (aggregate, correct_decision_pct, misdetection_probability,
                      schedule_devices, utilization_ratio)
from .model import (ConfigurationError, Incumbent, Scenario,
                    build_grid_topology, build_random_topology,
                    build_spectrum_plan, check_quota_feasible, scenario_from_dict,
                    scenario_to_dict, uniform_quota)
from .propagation import (PropagationParams, dbm_to_norm, generate_measurements,
                          generate_reference_powers, compute_ground_truth,
                          norm_to_dbm, pathloss_db, realize_links)
from .scheduler import cost_from_reference_powers, heuristic_assign
from .seeding import substream

log = logging.getLogger("specsense")

METRIC_ORDER = (
    "utilization_ratio",
    "misdetection_probability",
    "correct_decision_pct_all",
    "correct_decision_pct_own",
    "scheduled_devices",
)


def configure_logging():
    """Honor the SPECSENSE_LOG env var (DEBUG/INFO/WARNING/...)."""
    level = os.environ.get("SPECSENSE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


@dataclass(frozen=True)
class Campaign:
    scenario: Scenario
    schemes: tuple = SCHEME_IDS
    thresholds_dbm: tuple = tuple(float(t) for t in range(-82, -50, 2))
    realizations: int = 100
    master_seed: int | None = None       # None: reuse the scenario seed
    reference_dbm: float = -62.0
    diffusion: DiffusionParams = field(default_factory=DiffusionParams)
    calibration_runs: int = 10
    limit_dynamic_range: bool = True
    device_count: int = 0
    device_capacity: int = 1
    scheduler_restarts: int = 8
    noncoop_raw_energy: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.realizations < 1:
            raise ConfigurationError("realizations must be >= 1")
        if not self.thresholds_dbm:
            raise ConfigurationError("threshold sweep must be nonempty")
        unknown = set(self.schemes) - set(SCHEME_IDS)
        if unknown:
            raise ConfigurationError(f"unknown schemes {sorted(unknown)}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @property
    def seed(self):
        return self.scenario.seed if self.master_seed is None else self.master_seed


# ---------------------------------------------------------------------------
# Representative assignment and threshold calibration
# ---------------------------------------------------------------------------

def representative_reference_powers(scenario, ref_dbm):
    """Shadow-free line-of-sight reference powers for calibration use."""
    topo = scenario.topology
    prop = scenario.propagation
    carrier = (prop.carrier_hz if prop.carrier_hz is not None
               else scenario.spectrum.center_frequency_hz)
    d = np.sqrt(((topo.positions[:, None, :] - topo.positions[None, :, :]) ** 2)
                .sum(axis=2))
    d = np.maximum(d, 1.0)
    pl = pathloss_db(d, carrier, True, ut_height_m=float(topo.heights_m[0]),
                     model=prop.model)
    p_hat = dbm_to_norm(prop.sap_ref_tx_power_dbm - pl, ref_dbm)
    mask = topo.adjacency & ~np.eye(topo.count, dtype=bool)
    return np.where(mask, p_hat, 0.0)


def representative_assignment(campaign):
    """Deterministic campaign-level assignment used for threshold calibration."""
    scn = campaign.scenario
    check_quota_feasible(scn.spectrum, scn.topology.count)
    p_hat = representative_reference_powers(scn, campaign.reference_dbm)
    cost = cost_from_reference_powers(p_hat, scn.spectrum.subset_count)
    assignment, _ = heuristic_assign(
        cost, scn.topology.positions, scn.spectrum.quota,
        substream(campaign.seed, "rep-assign"), campaign.scheduler_restarts)
    return assignment


def _structure_specs(campaign, rep_assignment):
    """Network structures whose thresholds the chosen schemes need."""
    scn = campaign.scenario
    k_count = scn.topology.count
    m_count = scn.spectrum.channel_count
    p_rep = representative_reference_powers(scn, campaign.reference_dbm)
    full_mask = np.ones((k_count, m_count), dtype=bool)
    specs = {
        "coop-full": (full_mask, p_rep, scn.topology.adjacency),
        "coop-assigned": (rep_assignment.sensing_mask(scn.spectrum)
                          if rep_assignment is not None else None,
                          p_rep, scn.topology.adjacency),
        "standalone": (full_mask, np.zeros((k_count, k_count)),
                       np.eye(k_count, dtype=bool)),
    }
    needed = {CALIBRATION_STRUCTURE[s] for s in campaign.schemes
              if s in CALIBRATION_STRUCTURE}
    return {name: specs[name] for name in needed}


def calibrate_campaign(campaign, rep_assignment):
    """λ per structure: the once-per-campaign known-energy training pass."""
    prop = campaign.scenario.propagation
    ceiling = (default_ceiling(campaign.diffusion)
               if campaign.limit_dynamic_range else None)
    lams = {}
    for name, (mask, p_hat, adjacency) in _structure_specs(campaign,
                                                           rep_assignment).items():
        lams[name] = calibrate_threshold(
            mask, p_hat, adjacency, campaign.diffusion,
            substream(campaign.seed, "calibrate", name),
            reference_level=1.0, calibration_runs=campaign.calibration_runs,
            estimate_shape=prop.estimate_shape, ceiling=ceiling)
        log.debug("calibrated structure %s", name)
    return lams


# ---------------------------------------------------------------------------
# Per-realization work
# ---------------------------------------------------------------------------

def run_realization(campaign, lams, r):
    """All schemes, all thresholds, one realization. Returns (crc32, metrics).

    The metrics dict maps (scheme, threshold_dbm, metric) -> value or None.
    """
    scn = campaign.scenario
    seed = campaign.seed
    params = campaign.diffusion
    ceiling = default_ceiling(params) if campaign.limit_dynamic_range else None
    ref = campaign.reference_dbm

    links = realize_links(scn, substream(seed, "bands", r),
                          substream(seed, "shadow", r),
                          substream(seed, "fading", r))
    frame = generate_measurements(scn, links, params.iterations,
                                  substream(seed, "estimate", r), ref)
    checksum = zlib.crc32(frame.y.tobytes())
    truth = compute_ground_truth(scn, links, ref)
    p_hat = generate_reference_powers(scn, links, ref)
    topo = scn.topology

    sensing_mask = None
    if "proposed-singleband" in campaign.schemes:
        cost = cost_from_reference_powers(p_hat, scn.spectrum.subset_count)
        assignment, _ = heuristic_assign(
            cost, topo.positions, scn.spectrum.quota,
            substream(seed, "assign", r), campaign.scheduler_restarts)
        sensing_mask = assignment.sensing_mask(scn.spectrum)

    picks = None
    if "noncoop-singleband" in campaign.schemes:
        picks = substream(seed, "pick", r).integers(
            scn.spectrum.channel_count, size=topo.count)

    devices = None
    if campaign.device_count > 0:
        x0, y0, x1, y1 = topo.bounding_box()
        u = substream(seed, "devices", r).uniform(size=(campaign.device_count, 2))
        devices = np.column_stack([x0 + u[:, 0] * (x1 - x0),
                                   y0 + u[:, 1] * (y1 - y0)])

    own_masks = {
        "proposed-singleband": sensing_mask,
        "noncoop-singleband": None,  # the decided mask itself is the own set
    }

    results = {}
    for t in campaign.thresholds_dbm:
        y_raw = frame.scaled_to(t)
        y_clip = clip_dynamic_range(y_raw, ceiling)
        truth_t = truth.busy_at(t)
        for scheme in campaign.schemes:
            structure = CALIBRATION_STRUCTURE.get(scheme)
            raw_detector = (scheme == "centralized"
                            or (campaign.noncoop_raw_energy
                                and scheme.startswith("noncoop")))
            dm = run_scheme(
                scheme,
                measurements=y_raw if raw_detector else y_clip,
                truth_busy=truth_t,
                sensing_mask=sensing_mask,
                reference_powers=p_hat,
                adjacency=topo.adjacency,
                params=params,
                thresholds=lams.get(structure),
                channel_picks=picks,
                raw_energy=campaign.noncoop_raw_energy,
            )
            if scheme in own_masks:
                mask = own_masks[scheme]
                own_scope = dm.decided if mask is None else mask
            else:
                own_scope = None
            results[(scheme, t, "utilization_ratio")] = utilization_ratio(dm, truth_t)
            results[(scheme, t, "misdetection_probability")] = (
                misdetection_probability(dm, truth_t))
            results[(scheme, t, "correct_decision_pct_all")] = (
                correct_decision_pct(dm, truth_t))
            results[(scheme, t, "correct_decision_pct_own")] = (
                correct_decision_pct(dm, truth_t, own_scope))
            if devices is not None:
                results[(scheme, t, "scheduled_devices")] = schedule_devices(
                    dm, truth_t, devices, topo.positions,
                    campaign.device_capacity)
    return checksum, results


_WORKER_CTX = {}


def _worker_init(scenario_json, campaign_kwargs, lam_items):
    campaign = Campaign(scenario=scenario_from_dict(json.loads(scenario_json)),
                        **campaign_kwargs)
    _WORKER_CTX["campaign"] = campaign
    _WORKER_CTX["lams"] = dict(lam_items)


def _worker_run(r):
    return r, run_realization(_WORKER_CTX["campaign"], _WORKER_CTX["lams"], r)


def _campaign_kwargs(campaign):
    return {
        "schemes": tuple(campaign.schemes),
        "thresholds_dbm": tuple(campaign.thresholds_dbm),
        "realizations": campaign.realizations,
        "master_seed": campaign.master_seed,
        "reference_dbm": campaign.reference_dbm,
        "diffusion": campaign.diffusion,
        "calibration_runs": campaign.calibration_runs,
        "limit_dynamic_range": campaign.limit_dynamic_range,
        "device_count": campaign.device_count,
        "device_capacity": campaign.device_capacity,
        "scheduler_restarts": campaign.scheduler_restarts,
        "noncoop_raw_energy": campaign.noncoop_raw_energy,
        "workers": 1,
    }


# ---------------------------------------------------------------------------
# Campaign driver
# ---------------------------------------------------------------------------

def run_campaign(campaign, out_dir):
    """Run the full campaign and write results.csv plus summary.json."""
    os.makedirs(out_dir, exist_ok=True)
    scn = campaign.scenario

    rep_assignment = None
    if "proposed-singleband" in campaign.schemes:
        rep_assignment = representative_assignment(campaign)
    lams = calibrate_campaign(campaign, rep_assignment)
    log.info("calibrated %d structure/threshold pairs", len(lams))

    per_real = [None] * campaign.realizations
    checksums = [None] * campaign.realizations
    if campaign.workers == 1:
        for r in range(campaign.realizations):
            checksums[r], per_real[r] = run_realization(campaign, lams, r)
            log.info("realization %d frame crc32 %08x", r, checksums[r])
    else:
        init_args = (json.dumps(scenario_to_dict(scn)),
                     _campaign_kwargs(campaign), list(lams.items()))
        with ProcessPoolExecutor(max_workers=campaign.workers,
                                 initializer=_worker_init,
                                 initargs=init_args) as pool:
            for r, (crc, res) in pool.map(_worker_run,
                                          range(campaign.realizations)):
                checksums[r], per_real[r] = crc, res
                log.info("realization %d frame crc32 %08x", r, crc)

    rows = []
    for scheme in campaign.schemes:
        for t in campaign.thresholds_dbm:
            for metric in METRIC_ORDER:
                if metric == "scheduled_devices" and campaign.device_count == 0:
                    continue
                values = [per_real[r][(scheme, t, metric)]
                          for r in range(campaign.realizations)]
                mean, std, count = aggregate(values)
                rows.append({
                    "scheme": scheme,
                    "threshold_dbm": float(t),
                    "metric": metric,
                    "mean": mean,
                    "std": std,
                    "realizations": count,
                })

    results_path = os.path.join(out_dir, "results.csv")
    write_results_csv(rows, results_path)

    summary = {
        "scenario": scenario_to_dict(scn),
        "schemes": list(campaign.schemes),
        "thresholds_dbm": [float(t) for t in campaign.thresholds_dbm],
        "realizations": campaign.realizations,
        "master_seed": campaign.seed,
        "reference_dbm": campaign.reference_dbm,
        "frame_crc32": [f"{c:08x}" for c in checksums],
        "calibration_structures": sorted(lams),
    }
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return results_path, summary_path


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_results_csv(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "threshold_dbm", "metric", "mean", "std",
                         "realizations"])
        for row in rows:
            writer.writerow([row["scheme"], _fmt(float(row["threshold_dbm"])),
                             row["metric"], _fmt(row["mean"]), _fmt(row["std"]),
                             row["realizations"]])


def read_results_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({
                "scheme": rec["scheme"],
                "threshold_dbm": float(rec["threshold_dbm"]),
                "metric": rec["metric"],
                "mean": float(rec["mean"]) if rec["mean"] else None,
                "std": float(rec["std"]) if rec["std"] else None,
                "realizations": int(rec["realizations"]),
            })
    return rows


# ---------------------------------------------------------------------------
# Scenario templates
# ---------------------------------------------------------------------------

def generate_scenario(template, seed=1, **overrides):
    """Build one of the two canonical scenarios.

    ``small-grid``: SAP lattice with four 20 MHz channels and channel-width
    incumbents, for threshold-sweep studies. ``large-synthetic``: random
    wide-area deployment over a 500 MHz band channelized for NB-IoT
    (``channelization="lte-m"`` switches to 1.4 MHz channels), incumbents
    with 20/40/80 MHz signals.
    """
    if template == "small-grid":
        side = int(overrides.pop("side_count", 10))
        spacing = float(overrides.pop("spacing_m", 200.0))
        radius = float(overrides.pop("radius_m", spacing))
        incumbents = int(overrides.pop("incumbent_count", 50))
        tx_dbm = float(overrides.pop("incumbent_tx_dbm", 30.0))
        height = float(overrides.pop("height_m", 10.0))
        if overrides:
            raise ConfigurationError(f"unknown overrides {sorted(overrides)}")
        topo = build_grid_topology(side, spacing, radius, height)
        plan = build_spectrum_plan(80e6, 20e6, 1,
                                   uniform_quota_saps=topo.count)
        x0, y0, x1, y1 = topo.bounding_box()
        rng = substream(seed, "incumbent-placement")
        incs = tuple(
            Incumbent((float(x0 + u * (x1 - x0)), float(y0 + v * (y1 - y0))),
                      height, tx_dbm, 20e6, None)
            for u, v in rng.uniform(size=(incumbents, 2)))
        return Scenario(topo, plan, incs, PropagationParams(), seed)

    if template == "large-synthetic":
        count = int(overrides.pop("sap_count", 500))
        region = float(overrides.pop("region_m", 2000.0))
        radius = float(overrides.pop("radius_m", 200.0))
        incumbents = int(overrides.pop("incumbent_count", 2000))
        tx_dbm = float(overrides.pop("incumbent_tx_dbm", 30.0))
        height = float(overrides.pop("height_m", 10.0))
        channelization = overrides.pop("channelization", "nb-iot")
        total_bw = float(overrides.pop("total_bandwidth_hz", 500e6))
        sap_bw = float(overrides.pop("sap_bandwidth_hz", 20e6))
        inc_bw = overrides.pop("incumbent_bandwidth_hz", (20e6, 40e6, 80e6))
        if overrides:
            raise ConfigurationError(f"unknown overrides {sorted(overrides)}")
        if channelization == "nb-iot":
            b = 180e3
        elif channelization == "lte-m":
            b = 1.4e6
        else:
            raise ConfigurationError(f"unknown channelization {channelization!r}")
        topo = build_random_topology(count, (region, region), radius, height,
                                     substream(seed, "sap-placement"))
        plan = build_spectrum_plan(total_bw, b, max(1, int(sap_bw // b)),
                                   uniform_quota_saps=count)
        rng = substream(seed, "incumbent-placement")
        incs = tuple(
            Incumbent((float(u * region), float(v * region)), height, tx_dbm,
                      inc_bw, None)
            for u, v in rng.uniform(size=(incumbents, 2)))
        return Scenario(topo, plan, incs, PropagationParams(), seed)

    raise ConfigurationError(f"unknown template {template!r}")


# ---------------------------------------------------------------------------
# Plot-data emission
# ---------------------------------------------------------------------------

PLOT_FIGURES = {
    "utilization-vs-threshold": "utilization_ratio",
    "misdetection-vs-threshold": "misdetection_probability",
    "correct-vs-threshold": "correct_decision_pct_all",
    "scheduled-devices": "scheduled_devices",
}


def emit_plot_data(results_rows, figure, out_path):
    """Tidy per-figure CSV from aggregated campaign rows."""
    if figure == "footprint-snapshot":
        raise ConfigurationError(
            "footprint-snapshot needs a scenario; use emit_footprint_snapshot")
    metric = PLOT_FIGURES.get(figure)
    if metric is None:
        raise ConfigurationError(f"unknown figure {figure!r}")
    subset = [r for r in results_rows if r["metric"] == metric]
    if figure == "correct-vs-threshold":
        subset += [r for r in results_rows
                   if r["metric"] == "correct_decision_pct_own"]
    if not subset:
        raise ConfigurationError(f"no rows for figure {figure!r}")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "variant", "threshold_dbm", "mean", "std",
                         "realizations"])
        for r in subset:
            variant = ("own-channel" if r["metric"].endswith("_own") else "all")
            writer.writerow([r["scheme"], variant, _fmt(r["threshold_dbm"]),
                             _fmt(r["mean"]), _fmt(r["std"]),
                             r["realizations"]])
    return out_path


def emit_footprint_snapshot(campaign, out_path, realization=0,
                            threshold_dbm=-62.0):
    """One realization's spatial energy footprint and per-scheme decisions.

    Rows: scheme, k, x, y, m, energy_dbm (iteration-mean), truth_busy,
    decision (busy/available/none).
    """
    campaign = replace(campaign, thresholds_dbm=(float(threshold_dbm),))
    scn = campaign.scenario
    rep = (representative_assignment(campaign)
           if "proposed-singleband" in campaign.schemes else None)
    lams = calibrate_campaign(campaign, rep)

    seed = campaign.seed
    params = campaign.diffusion
    ceiling = default_ceiling(params) if campaign.limit_dynamic_range else None
    links = realize_links(scn, substream(seed, "bands", realization),
                          substream(seed, "shadow", realization),
                          substream(seed, "fading", realization))
    frame = generate_measurements(scn, links, params.iterations,
                                  substream(seed, "estimate", realization),
                                  campaign.reference_dbm)
    truth = compute_ground_truth(scn, links, campaign.reference_dbm)
    p_hat = generate_reference_powers(scn, links, campaign.reference_dbm)

    sensing_mask = None
    if "proposed-singleband" in campaign.schemes:
        cost = cost_from_reference_powers(p_hat, scn.spectrum.subset_count)
        assignment, _ = heuristic_assign(
            cost, scn.topology.positions, scn.spectrum.quota,
            substream(seed, "assign", realization), campaign.scheduler_restarts)
        sensing_mask = assignment.sensing_mask(scn.spectrum)
    picks = None
    if "noncoop-singleband" in campaign.schemes:
        picks = substream(seed, "pick", realization).integers(
            scn.spectrum.channel_count, size=scn.topology.count)

    t = float(threshold_dbm)
    y_raw = frame.scaled_to(t)
    y_clip = clip_dynamic_range(y_raw, ceiling)
    truth_t = truth.busy_at(t)
    mean_energy_dbm = norm_to_dbm(frame.y.mean(axis=2), campaign.reference_dbm)

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "k", "x", "y", "m", "energy_dbm",
                         "truth_busy", "decision"])
        for scheme in campaign.schemes:
            structure = CALIBRATION_STRUCTURE.get(scheme)
            raw_detector = (scheme == "centralized"
                            or (campaign.noncoop_raw_energy
                                and scheme.startswith("noncoop")))
            dm = run_scheme(
                scheme, measurements=y_raw if raw_detector else y_clip,
                truth_busy=truth_t, sensing_mask=sensing_mask,
                reference_powers=p_hat, adjacency=scn.topology.adjacency,
                params=params, thresholds=lams.get(structure),
                channel_picks=picks, raw_energy=campaign.noncoop_raw_energy)
            for k in range(scn.topology.count):
                x, y = scn.topology.positions[k]
                for m in range(scn.spectrum.channel_count):
                    if not dm.decided[k, m]:
                        verdict = "none"
                    elif dm.busy[k, m]:
                        verdict = "busy"
                    else:
                        verdict = "available"
                    writer.writerow([scheme, k, _fmt(float(x)), _fmt(float(y)),
                                     m, _fmt(float(mean_energy_dbm[k, m])),
                                     int(truth_t[k, m]), verdict])
    return out_path
