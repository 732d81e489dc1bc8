"""Plot-ready CSV and JSON outputs of a sweep; byte-stable for a given manifest."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .config import RunManifest
from .harness import AggregateResult, ExperimentConfig

PARETO_HEADER = ("protocol", "M", "theta_mult", "mse", "lifetime_years")
CDF_HEADER = ("protocol", "M", "theta_mult", "episode", "episode_mse")
POLLING_HEADER = ("protocol", "M", "theta_mult", "sensor", "poll_freq", "tx_freq")
SEEDING = "numpy SeedSequence(base_seed, spawn_key=(0, episode)) for the process, (1, config, episode) for the channel"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _key(res: AggregateResult):
    p = res.point
    return (p.protocol.value, p.polls_per_step, p.theta_multiplier)


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def emit_results(manifest: RunManifest, results: list[tuple[ExperimentConfig, AggregateResult]],
                 out_dir: str | Path) -> list[Path]:
    """Write pareto.csv, mse_cdf.csv, polling_freq.csv and summary.json; returns the paths."""
    if not results:
        raise ValueError("no results to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ordered = sorted((r for _, r in results), key=_key)

    pareto, cdf, polling, points = [], [], [], []
    for res in ordered:
        p = res.point
        head = (p.protocol.value, p.polls_per_step, fmt(p.theta_multiplier))
        pareto.append((*head, fmt(p.mean_mse), fmt(p.mean_lifetime_years)))
        cdf.extend((*head, e, fmt(v)) for e, v in enumerate(res.episode_mse))
        polling.extend((*head, s + 1, fmt(pf), fmt(tf))
                       for s, (pf, tf) in enumerate(zip(p.per_sensor_poll_freq, p.per_sensor_tx_freq)))
        points.append({
            "protocol": p.protocol.value,
            "M": p.polls_per_step,
            "theta_mult": p.theta_multiplier,
            "mean_mse": p.mean_mse,
            "mean_lifetime_years": p.mean_lifetime_years,
            "episodes": int(res.episode_mse.size),
        })

    paths = [out / "pareto.csv", out / "mse_cdf.csv", out / "polling_freq.csv", out / "summary.json"]
    _write_csv(paths[0], PARETO_HEADER, pareto)
    _write_csv(paths[1], CDF_HEADER, cdf)
    _write_csv(paths[2], POLLING_HEADER, polling)
    summary = {
        "manifest": manifest.to_dict(),
        "seed": manifest.base_seed,
        "seeding": SEEDING,
        "points": points,
    }
    paths[3].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return paths
