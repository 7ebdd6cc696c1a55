"""Running tuners, persisting artifacts, ground-truth evaluation and sweeps."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass, asdict, replace
from typing import Iterable, Optional, Sequence

from . import workload as wl
from .errors import ValidationError
from .esvs import curve_to_csv
from .oracle import CallRecord, CoverageOracle, calls_to_csv, percentage_improvement
from .tuners import TunerOptions, TuningResult, run
from .workload import Workload, format_config, parse_config

RESULT_FORMAT = "esc-run/1"
# options that must agree between a run and its ground truth
MATCHED_OPTIONS = ("K", "budget", "wii", "theta", "c_uct")


def fingerprint(w: Workload) -> str:
    return hashlib.sha256(wl.dumps(w).encode()).hexdigest()


def tune(w: Workload, algorithm: str, options: TunerOptions,
         adversarial: bool = False) -> TuningResult:
    return run(algorithm, w, CoverageOracle(w, adversarial=adversarial, seed=options.seed), options)


def ground_truth_options(options: TunerOptions) -> TunerOptions:
    return replace(options, esc="off", monitor=False, baseline=None)


# ------------------------------------------------------------ persistence

def result_dict(result: TuningResult, w: Workload) -> dict:
    return {
        "format": RESULT_FORMAT,
        "algorithm": result.algorithm,
        "options": result.options.to_dict(),
        "workload_sha256": fingerprint(w),
        "config": sorted(result.config),
        "calls_used": result.calls_used,
        "stopped_early": result.stopped_early,
        "reason": result.reason,
        "esv_count": result.esv_count,
        "esv_seconds": result.esv_seconds,
        "empty_cost": result.empty_cost,
        "final_derived_cost": result.final_derived_cost,
        "observed_improvement": result.observed_improvement,
        "skipped_calls": len(result.skipped),
    }


def run_summary_rows(result: TuningResult) -> list:
    esv_l = [e.bounds.eta_L for e in result.esvs]
    return [
        ["algorithm", result.algorithm],
        ["calls_used", result.calls_used],
        ["stopped_early", int(result.stopped_early)],
        ["reason", result.reason],
        ["esv_count", result.esv_count],
        ["skipped_calls", len(result.skipped)],
        ["observed_improvement", repr(result.observed_improvement)],
        ["final_config", format_config(result.config)],
        ["last_etaL", repr(esv_l[-1]) if esv_l else ""],
        ["last_etaU", repr(result.esvs[-1].bounds.eta_U) if result.esvs else ""],
    ]


def write_run(result: TuningResult, w: Workload, outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)

    def put(name, text):
        with open(os.path.join(outdir, name), "w", newline="") as fh:
            fh.write(text)

    put("curve.csv", curve_to_csv(result.curve))
    put("calls.csv", calls_to_csv(result.call_log))
    put("mci.csv", result.mci_csv)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "value"])
    writer.writerows(run_summary_rows(result))
    put("summary.csv", buf.getvalue())
    put("result.json", json.dumps(result_dict(result, w), indent=1, sort_keys=True) + "\n")
    put("workload.json", wl.dumps(w))


def read_calls(path: str) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [CallRecord(int(r["seq"]), r["query_id"], parse_config(r["config_members"]),
                       float(r["cost"])) for r in rows]


def load_run(rundir: str) -> tuple:
    """Returns (result dict, workload, call log) from a run directory."""
    try:
        with open(os.path.join(rundir, "result.json")) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"{rundir}: no result.json") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{rundir}/result.json: {exc}") from exc
    if data.get("format") != RESULT_FORMAT:
        raise ValidationError(f"{rundir}: not an esctune run directory")
    w = wl.load(os.path.join(rundir, "workload.json"))
    calls_path = os.path.join(rundir, "calls.csv")
    calls = read_calls(calls_path) if os.path.exists(calls_path) else []
    return data, w, calls


# ------------------------------------------------------------- evaluation

@dataclass
class MetricsSummary:
    improvement_loss: float
    savings: float
    calls: int
    ground_truth_calls: int
    esv_count: int
    esv_seconds: float
    eta_run: float
    eta_ground_truth: float
    stopped_early: bool

    def to_dict(self) -> dict:
        return asdict(self)


def savings_percent(b_eps: int, b_tilde: int) -> float:
    if b_tilde <= 0:
        raise ValidationError("ground-truth call count must be positive")
    return min(100.0, max(0.0, (1.0 - b_eps / b_tilde) * 100.0))


def true_improvement(w: Workload, config: Iterable[str], oracle: CoverageOracle) -> float:
    return percentage_improvement(oracle.workload_cost(()), oracle.workload_cost(config))


def check_matching(run_data: dict, gt_data: dict) -> None:
    if run_data.get("workload_sha256") != gt_data.get("workload_sha256"):
        raise ValidationError("run and ground truth use different workloads")
    if run_data.get("algorithm") != gt_data.get("algorithm"):
        raise ValidationError("run and ground truth use different algorithms")
    ro, go = run_data.get("options", {}), gt_data.get("options", {})
    if ro.get("seed") != go.get("seed"):
        raise ValidationError("run and ground truth use different seeds")
    for key in MATCHED_OPTIONS:
        if ro.get(key) != go.get(key):
            raise ValidationError(f"run and ground truth disagree on {key}")
    if go.get("esc", "off") != "off" or go.get("baseline"):
        raise ValidationError("ground truth must run without early stopping")


def evaluate_dicts(run_data: dict, gt_data: dict, w: Workload,
                   oracle: Optional[CoverageOracle] = None) -> MetricsSummary:
    check_matching(run_data, gt_data)
    oracle = oracle or CoverageOracle(w)
    eta_run = true_improvement(w, run_data["config"], oracle)
    eta_gt = true_improvement(w, gt_data["config"], oracle)
    same = sorted(run_data["config"]) == sorted(gt_data["config"])
    return MetricsSummary(
        improvement_loss=0.0 if same else eta_gt - eta_run,
        savings=savings_percent(run_data["calls_used"], gt_data["calls_used"]),
        calls=run_data["calls_used"], ground_truth_calls=gt_data["calls_used"],
        esv_count=run_data.get("esv_count", 0), esv_seconds=run_data.get("esv_seconds", 0.0),
        eta_run=eta_run, eta_ground_truth=eta_gt, stopped_early=run_data["stopped_early"],
    )


def evaluate(result: TuningResult, ground_truth: TuningResult, w: Workload,
             oracle: Optional[CoverageOracle] = None) -> MetricsSummary:
    """Metrics for one run against its natural-termination counterfactual.

    True costs come from a fresh unbudgeted oracle, so evaluation never
    touches either run's budget or cache.
    """
    return evaluate_dicts(result_dict(result, w), result_dict(ground_truth, w), w, oracle)


def evaluate_dirs(rundir: str, gtdir: str) -> MetricsSummary:
    run_data, w, _ = load_run(rundir)
    gt_data, w_gt, _ = load_run(gtdir)
    return evaluate_dicts(run_data, gt_data, w)


# ------------------------------------------------------------------ sweeps

VARIANTS = ("EscB", "EscI", "EscB-FixStep", "EscI-FixStep", "baseline")
SWEEP_HEADER = ["epsilon", "variant", "seed", "stopped", "calls", "ground_truth_calls",
                "savings", "loss", "violation", "esv_count", "eta", "eta_ground_truth"]


def variant_options(variant: str, base: TunerOptions, algorithm: str, epsilon: float) -> TunerOptions:
    opts = replace(base, epsilon=epsilon, monitor=False, baseline=None, esvs=base.esvs)
    if variant == "EscB":
        return replace(opts, esc="b")
    if variant == "EscI":
        return replace(opts, esc="i")
    if variant == "EscB-FixStep":
        return replace(opts, esc="b", esvs="fixed")
    if variant == "EscI-FixStep":
        return replace(opts, esc="i", esvs="fixed")
    if variant == "baseline":
        return replace(opts, esc="off", baseline="threshold" if algorithm == "mcts" else "phase1")
    raise ValidationError(f"unknown variant {variant!r}")


def sweep(w: Workload, algorithm: str, base: TunerOptions, epsilons: Sequence[float],
          seeds: Sequence[int], variants: Sequence[str] = VARIANTS, timing: bool = False) -> str:
    header = SWEEP_HEADER + (["esv_seconds"] if timing else [])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    oracle = CoverageOracle(w)
    for seed in seeds:
        seeded = replace(base, seed=seed)
        gt = tune(w, algorithm, ground_truth_options(seeded))
        for eps in epsilons:
            for variant in variants:
                res = tune(w, algorithm, variant_options(variant, seeded, algorithm, eps))
                m = evaluate(res, gt, w, oracle)
                row = [repr(eps), variant, seed, int(res.stopped_early), res.calls_used,
                       gt.calls_used, repr(m.savings), repr(m.improvement_loss),
                       int(res.stopped_early and m.improvement_loss > eps + 1e-9),
                       res.esv_count, repr(m.eta_run), repr(m.eta_ground_truth)]
                if timing:
                    row.append(repr(res.esv_seconds))
                writer.writerow(row)
    return buf.getvalue()
