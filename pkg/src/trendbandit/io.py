"""CSV and manifest serialisation of experiment results."""
from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path

from . import __version__
from .harness import METRICS, AggregateRecord, Checkpoint, ExperimentConfig, RunRecord
from .policies import resolve_params

RUN_HEADER = ("policy", "run", "seed", "checkpoint_t", *METRICS, "pull_counts")
AGGREGATE_HEADER = ("policy", "run", "checkpoint_t", *METRICS)


def fmt(x: float) -> str:
    """17 significant digits: exact round trip for binary64."""
    return format(float(x), ".17g")


def run_rows(records):
    for r in records:
        for c in r.checkpoints:
            yield (r.policy, str(r.run), str(r.seed), str(c.t),
                   *(fmt(getattr(c, m)) for m in METRICS),
                   ";".join(str(n) for n in c.counts))


def aggregate_rows(aggregates):
    for a in aggregates:
        for stat, values in (("mean", a.mean), ("std", a.std)):
            for j, t in enumerate(a.t):
                yield (a.policy, stat, str(t), *(fmt(values[m][j]) for m in METRICS))


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def manifest_dict(config: ExperimentConfig | None, hashes: dict) -> dict:
    out = {"tool": "trendbandit", "version": __version__, "files": hashes}
    if config is not None:
        out["config"] = config.to_dict()
        out["resolved_policy_params"] = {
            p.name: resolve_params(p, config.n_arms, config.horizon, config.index_lookahead)
            for p in config.policies
        }
    return out


def write_outputs(records, aggregates, out_dir, config: ExperimentConfig | None = None) -> dict:
    """Write runs.csv, aggregate.csv and manifest.json; return name -> path."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    paths = {"runs.csv": out / "runs.csv", "aggregate.csv": out / "aggregate.csv"}
    _write_csv(paths["runs.csv"], RUN_HEADER, run_rows(records))
    _write_csv(paths["aggregate.csv"], AGGREGATE_HEADER, aggregate_rows(aggregates))
    hashes = {name: sha256_file(p) for name, p in paths.items()}
    paths["manifest.json"] = out / "manifest.json"
    text = json.dumps(manifest_dict(config, hashes), indent=2, sort_keys=True) + "\n"
    try:
        paths["manifest.json"].write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {paths['manifest.json']}: {exc.strerror or exc}") from exc
    return paths


def _read_rows(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        got = tuple(next(reader, ()))
        if got != header:
            raise ValueError(f"{path}: unexpected header {got!r}")
        yield from reader


def read_runs(path) -> list[RunRecord]:
    grouped: dict[tuple[str, int], list] = {}
    seeds = {}
    for row in _read_rows(path, RUN_HEADER):
        policy, run, seed, t = row[0], int(row[1]), int(row[2]), int(row[3])
        values = [float(v) for v in row[4:4 + len(METRICS)]]
        counts = tuple(int(n) for n in row[-1].split(";")) if row[-1] else ()
        grouped.setdefault((policy, run), []).append(Checkpoint(t, *values, counts))
        seeds[(policy, run)] = seed
    return [
        RunRecord(policy, run, seeds[(policy, run)], tuple(cps), cps[-1].counts)
        for (policy, run), cps in grouped.items()
    ]


def read_aggregates(path) -> list[AggregateRecord]:
    order: list[str] = []
    data: dict[str, dict] = {}
    for row in _read_rows(path, AGGREGATE_HEADER):
        policy, stat, t = row[0], row[1], int(row[2])
        if policy not in data:
            order.append(policy)
            data[policy] = {"t": [], "mean": {m: [] for m in METRICS}, "std": {m: [] for m in METRICS}}
        entry = data[policy]
        if stat == "mean":
            entry["t"].append(t)
        for m, v in zip(METRICS, row[3:]):
            entry[stat][m].append(float(v))
    return [
        AggregateRecord(
            p,
            tuple(data[p]["t"]),
            {m: tuple(v) for m, v in data[p]["mean"].items()},
            {m: tuple(v) for m, v in data[p]["std"].items()},
        )
        for p in order
    ]


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_config(path) -> ExperimentConfig:
    """Parse a scenario JSON file; bundled scenario names are accepted too."""
    p = Path(path)
    if not p.exists():
        bundled = bundled_scenario(str(path))
        if bundled is None:
            raise FileNotFoundError(f"config file not found: {path}")
        p = bundled
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{p}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return ExperimentConfig.from_dict(data)


SCENARIO_DIR = Path(__file__).with_name("scenarios")


def bundled_scenario(name: str) -> Path | None:
    stem = os.path.basename(name)
    if stem.endswith(".json"):
        stem = stem[:-5]
    candidate = SCENARIO_DIR / f"{stem}.json"
    return candidate if candidate.exists() else None
