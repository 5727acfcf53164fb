"""Aggregate run curves into a normalized-score report.

Raw returns are not comparable across environments, so the report rescales
each run's final return to [~0, ~1]:

    normalized = (run - min_return) / (expert_return - min_return)

where ``expert_return`` comes from the dataset artifact's expert trajectories
and ``min_return`` is the worst evaluation return observed anywhere in the
aggregation scope.  Every curve embeds the config hash of the experiment
that produced it; mixing curves from different configs is refused.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .runners import final_metric
from .storage import read_jsonl


class ReportError(ValueError):
    pass


def normalized_return(ret: float, min_return: float, expert_return: float) -> float:
    denom = expert_return - min_return
    if not np.isfinite(denom) or denom <= 0:
        raise ReportError(
            f"cannot normalize: expert_return={expert_return} does not exceed "
            f"min_return={min_return}")
    return (ret - min_return) / denom


@dataclass
class RunRecord:
    """One curve file: header metadata plus its evaluation trace."""

    path: str
    config_hash: str
    env: str
    mode: str
    delay: str
    seed: int
    k1: int | None
    eval_rows: list = field(default_factory=list)

    @property
    def final_return(self) -> float:
        return final_metric(self.eval_rows)


def load_run(path: str) -> RunRecord:
    rows = read_jsonl(path)
    if not rows or rows[0].get("kind") != "header":
        raise ReportError(f"{path} has no header row; not a curve file")
    head = rows[0]
    for key in ("config_hash", "env", "mode", "delay", "seed"):
        if key not in head:
            raise ReportError(f"{path} header is missing {key!r}")
    evals = [r for r in rows[1:] if "eval_return_true" in r]
    if not evals:
        raise ReportError(f"{path} contains no evaluation rows")
    return RunRecord(path=path, config_hash=head["config_hash"], env=head["env"],
                     mode=head["mode"], delay=head["delay"], seed=head["seed"],
                     k1=head.get("k1"), eval_rows=evals)


def discover_runs(out_dir: str) -> list:
    paths = sorted(p for p in os.listdir(out_dir)
                   if p.startswith("curve_") and p.endswith(".jsonl"))
    if not paths:
        raise ReportError(f"no curve_*.jsonl files found in {out_dir}; "
                          "run `deer train` first")
    return [load_run(os.path.join(out_dir, p)) for p in paths]


def check_single_config(runs: list) -> str:
    hashes = sorted({r.config_hash for r in runs})
    if len(hashes) != 1:
        raise ReportError(f"curves come from {len(hashes)} different configs "
                          f"({', '.join(h[:12] for h in hashes)}); refusing to mix them")
    return hashes[0]


def build_report(runs: list, expert_return: float) -> list:
    """Rows of per-(env, mode, delay, k1) medians and variances across seeds."""
    check_single_config(runs)
    finals = np.array([r.final_return for r in runs], dtype=np.float64)
    everything = np.concatenate([
        np.asarray([row["eval_return_true"] for row in r.eval_rows]) for r in runs])
    min_return = float(min(everything.min(), finals.min()))

    groups: dict = {}
    for r in runs:
        groups.setdefault((r.env, r.mode, r.delay, r.k1), []).append(r)

    rows = []
    for (env, mode, delay, k1), members in sorted(
            groups.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2], kv[0][3] or 0)):
        members = sorted(members, key=lambda r: r.seed)
        vals = np.array([m.final_return for m in members], dtype=np.float64)
        normed = np.array([normalized_return(v, min_return, expert_return) for v in vals])
        rows.append({
            "env": env, "mode": mode, "delay": delay,
            "k1": "" if k1 is None else k1,
            "seeds": len(members),
            "median_return": float(np.median(vals)),
            "var_return": float(np.var(vals)),
            "median_normalized": float(np.median(normed)),
            "var_normalized": float(np.var(normed)),
            "expert_return": expert_return,
            "min_return": min_return,
        })
    return rows


_COLUMNS = ["env", "mode", "delay", "k1", "seeds", "median_return", "var_return",
            "median_normalized", "var_normalized", "expert_return", "min_return"]


def write_csv(rows: list, path: str, cfg_hash: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(f"# config_hash={cfg_hash}\n")
        writer = csv.DictWriter(f, fieldnames=_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for key in ("median_return", "var_return", "median_normalized",
                        "var_normalized", "expert_return", "min_return"):
                out[key] = f"{row[key]:.6f}"
            writer.writerow(out)
    os.replace(tmp, path)


def format_table(rows: list) -> str:
    if not rows:
        return "(no runs)"
    headers = ["env", "mode", "delay", "k1", "seeds",
               "median_return", "median_normalized", "var_normalized"]
    cells = [[str(r[h]) if not isinstance(r[h], float) else f"{r[h]:.3f}" for h in headers]
             for r in rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for c in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(c, widths)))
    return "\n".join(lines)
