"""Experiment configs and runners behind the command-line tool.

Every runner expands its config into independent instance tasks, evaluates
them (optionally in worker processes) and returns rows in task order, so the
output does not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .circuits import dumps, generate_rqc
from .clifford import SubstitutionParams, argmin_smallest, estimate_m_opt, mitigation_errors
from .distill import FULL, ORACLE, PREP_ONLY, REQUEST, VD, MitigationPlan, noisy_copy, run_mitigation_sweep
from .linalg import PauliProduct, statevector_expectation
from .noise import NoiseModel
from .scaling import AUTO, SWEEP_COLUMNS, scaling_sweep
from .simulate import simulate_statevector

SCHEMA_VERSION = 1
KINDS = ("suppress", "compare", "mopt", "scaling", "rqc-gen")

RESULT_COLUMNS = ("seed", "N", "p", "M", "method", "mitigated", "exact", "psi1_value", "oracle",
                  "abs_err_exact", "abs_err_psi1")
SUMMARY_COLUMNS = ("N", "p", "M", "method", "instances", "mean_abs_err_exact", "max_abs_err_exact",
                   "mean_abs_err_psi1", "max_abs_err_psi1")
MOPT_COLUMNS = ("seed", "N", "p", "M", "proxy_error", "rqc_error", "proxy_m_opt", "rqc_m_opt")
MOPT_SUMMARY_COLUMNS = ("N", "p", "M", "instances", "mean_proxy_error", "mean_rqc_error",
                        "proxy_m_opt", "rqc_m_opt")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    n: list[int] = field(default_factory=lambda: [2, 3, 4, 5])
    p: list[int] = field(default_factory=lambda: [5, 15, 25, 35])
    copies: list[int] = field(default_factory=lambda: list(range(1, 9)))
    instances: int = 44
    seed: int = 0
    noise: NoiseModel = field(default_factory=NoiseModel)
    observable: str = "Z0"
    shots: int | None = None
    method: str | None = None
    out: str | None = None
    workers: int = 1
    # near-Clifford proxies
    samples_per_circuit: int = 10
    n_nonclifford: int = 28
    sigma_width: float = 0.5
    validate: bool = True
    # scaling sweep
    deltas: list[float] = field(default_factory=list)
    qubit_rates: list[float] = field(default_factory=list)
    depth_per_qubit: int = 1
    epsilon: float = 1e-3
    copy_count: int | str = AUTO
    ancilla_noisy: bool = False

    def substitution(self) -> SubstitutionParams:
        return SubstitutionParams(self.sigma_width, self.n_nonclifford, self.samples_per_circuit)


def _int_list(value, name: str) -> list[int]:
    if isinstance(value, str):
        m = re.fullmatch(r"\s*(\d+)\s*-\s*(\d+)\s*", value)
        if not m:
            raise ConfigError(f"{name}: expected a list or a range like '1-8', got {value!r}")
        value = list(range(int(m.group(1)), int(m.group(2)) + 1))
    if isinstance(value, int):
        value = [value]
    try:
        out = [int(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected integers, got {value!r}") from None
    if any(v != w for v, w in zip(out, value)):
        raise ConfigError(f"{name}: expected integers, got {value!r}")
    return out


def parse_config(data: dict[str, Any], kind: str) -> ExperimentConfig:
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    declared = data.pop("kind", kind)
    if {"suppression": "suppress"}.get(declared, declared) != kind:
        raise ConfigError(f"config is for {declared!r}, command is {kind!r}")
    names = {f.name for f in fields(ExperimentConfig)} - {"kind"}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    kw: dict[str, Any] = {}
    for key in ("n", "p", "copies"):
        if key in data:
            kw[key] = _int_list(data.pop(key), key)
    if "noise" in data:
        try:
            kw["noise"] = NoiseModel.from_dict(data.pop("noise"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"noise: {exc}") from None
    kw.update(data)
    try:
        cfg = ExperimentConfig(kind=kind, **kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.kind == "scaling":
        if not cfg.n or min(cfg.n) < 1:
            raise ConfigError("n must list register sizes >= 1")
        if not cfg.deltas and not cfg.qubit_rates:
            raise ConfigError("scaling needs 'deltas' and/or 'qubit_rates'")
        if any(not 0 <= d <= 1 for d in cfg.deltas) or any(r < 0 for r in cfg.qubit_rates):
            raise ConfigError("error rates out of range")
        if cfg.depth_per_qubit < 1 or not cfg.epsilon > 0:
            raise ConfigError("depth_per_qubit must be >= 1 and epsilon > 0")
        if cfg.copy_count != AUTO and (not isinstance(cfg.copy_count, int) or cfg.copy_count < 1):
            raise ConfigError("copy_count must be 'auto' or a positive integer")
        return
    if not isinstance(cfg.instances, int) or cfg.instances < 1:
        raise ConfigError("instances must be a positive integer")
    if not cfg.n or min(cfg.n) < 2:
        raise ConfigError("n must list register sizes >= 2")
    if not cfg.p or min(cfg.p) < 1:
        raise ConfigError("p must list layer counts >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.kind == "rqc-gen":
        return
    if not cfg.copies or min(cfg.copies) < 1:
        raise ConfigError("copies must list copy counts >= 1")
    if cfg.shots is not None and (not isinstance(cfg.shots, int) or cfg.shots < 1):
        raise ConfigError("shots must be a positive integer or null")
    if cfg.method is not None and cfg.method not in (REQUEST, VD, ORACLE):
        raise ConfigError(f"unknown method {cfg.method!r}")
    try:
        for n in cfg.n:
            observable_for(cfg.observable, n)
        if cfg.kind == "mopt":
            cfg.substitution()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike, kind: str, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return parse_config(data, kind)


def observable_for(spec: str, n: int) -> PauliProduct:
    """``"Z0"`` style (letter and qubit) or a full Pauli string of length ``n``."""
    m = re.fullmatch(r"([XYZ])(\d+)", spec)
    if m:
        q = int(m.group(2))
        if q >= n:
            raise ValueError(f"observable qubit {q} outside a {n}-qubit register")
        return PauliProduct.single(m.group(1), q, n)
    if len(spec) != n:
        raise ValueError(f"observable {spec!r} does not have {n} letters")
    return PauliProduct(spec)


def instance_seed(base: int, n: int, p: int, index: int) -> int:
    return int(np.random.SeedSequence([base, n, p, index]).generate_state(1)[0])


def instance_grid(cfg: ExperimentConfig) -> list[tuple[int, int, int, int]]:
    return [(n, p, i, instance_seed(cfg.seed, n, p, i))
            for n in cfg.n for p in cfg.p for i in range(cfg.instances)]


# ------------------------------------------------------------ tasks

def _result_rows(seed: int, n: int, p: int, results) -> list[dict]:
    return [{"seed": seed, "N": n, "p": p, "M": r.copies, "method": r.method, "mitigated": r.mitigated,
             "exact": r.exact, "psi1_value": r.psi1_value, "oracle": r.oracle,
             "abs_err_exact": r.abs_err_exact, "abs_err_psi1": r.abs_err_psi1} for r in results]


def _suppress_task(cfg: ExperimentConfig, n: int, p: int, seed: int) -> list[dict]:
    prep = generate_rqc(n, p, seed)
    x = observable_for(cfg.observable, n)
    plan = MitigationPlan(prep, x, max(cfg.copies), cfg.method or ORACLE, cfg.noise, PREP_ONLY)
    return _result_rows(seed, n, p, run_mitigation_sweep(plan, cfg.copies, cfg.shots, seed))


def _compare_task(cfg: ExperimentConfig, n: int, p: int, seed: int) -> list[dict]:
    prep = generate_rqc(n, p, seed)
    x = observable_for(cfg.observable, n)
    base = MitigationPlan(prep, x, max(cfg.copies), REQUEST, cfg.noise, FULL)
    rho = noisy_copy(base)
    exact = statevector_expectation(x, simulate_statevector(prep))
    rows = []
    methods = (cfg.method,) if cfg.method else (REQUEST, VD)
    for k, method in enumerate(methods):
        plan = MitigationPlan(prep, x, base.copies, method, cfg.noise, FULL)
        results = run_mitigation_sweep(plan, cfg.copies, cfg.shots, [seed, k], rho=rho, exact=exact)
        rows += _result_rows(seed, n, p, results)
    return rows


def _mopt_task(cfg: ExperimentConfig, n: int, p: int, seed: int) -> list[dict]:
    prep = generate_rqc(n, p, seed)
    x = observable_for(cfg.observable, n)
    est = estimate_m_opt(prep, x, cfg.noise, cfg.copies, cfg.substitution(), seed=[seed, 1])
    true = mitigation_errors(prep, x, cfg.noise, est.copies) if cfg.validate else None
    true_opt = argmin_smallest(true, est.copies) if true is not None else None
    return [{"seed": seed, "N": n, "p": p, "M": m, "proxy_error": e,
             "rqc_error": true[j] if true is not None else "", "proxy_m_opt": est.m_opt,
             "rqc_m_opt": true_opt if true_opt is not None else ""}
            for j, (m, e) in enumerate(zip(est.copies, est.mean_errors))]


_TASKS: dict[str, Callable] = {"suppress": _suppress_task, "compare": _compare_task, "mopt": _mopt_task}


def _run_one(args):
    kind, cfg, n, p, seed = args
    try:
        return seed, _TASKS[kind](cfg, n, p, seed), None
    except Exception as exc:  # reported per instance, run continues
        return seed, [], f"{type(exc).__name__}: {exc}"


@dataclass
class RunOutcome:
    rows: list[dict]
    failures: list[tuple[int, str]]


def run_instances(cfg: ExperimentConfig) -> RunOutcome:
    jobs = [(cfg.kind, cfg, n, p, seed) for n, p, _, seed in instance_grid(cfg)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            done = list(pool.map(_run_one, jobs))
    else:
        done = [_run_one(j) for j in jobs]
    rows, failures = [], []
    for seed, r, err in done:
        rows += r
        if err:
            failures.append((seed, err))
    return RunOutcome(rows, failures)


# --------------------------------------------------------- summaries

def summarize(rows: Sequence[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = defaultdict(list)
    for r in rows:
        groups[(r["N"], r["p"], r["M"], r["method"])].append(r)
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[3], k[2])):
        g = groups[key]
        ex = [r["abs_err_exact"] for r in g]
        ps = [r["abs_err_psi1"] for r in g]
        out.append(dict(zip(SUMMARY_COLUMNS, key + (len(g), float(np.mean(ex)), max(ex),
                                                     float(np.mean(ps)), max(ps)))))
    return out


def summarize_mopt(rows: Sequence[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = defaultdict(list)
    for r in rows:
        groups[(r["N"], r["p"])].append(r)
    out = []
    for (n, p), g in sorted(groups.items()):
        ms = sorted({r["M"] for r in g})
        proxy = [float(np.mean([r["proxy_error"] for r in g if r["M"] == m])) for m in ms]
        has_true = all(r["rqc_error"] != "" for r in g)
        true = [float(np.mean([r["rqc_error"] for r in g if r["M"] == m])) for m in ms] if has_true else None
        p_opt = argmin_smallest(proxy, ms)
        t_opt = argmin_smallest(true, ms) if true else ""
        count = len(g) // len(ms)
        for j, m in enumerate(ms):
            out.append({"N": n, "p": p, "M": m, "instances": count, "mean_proxy_error": proxy[j],
                        "mean_rqc_error": true[j] if true else "", "proxy_m_opt": p_opt, "rqc_m_opt": t_opt})
    return out


# ------------------------------------------------------------ output

def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: Sequence[dict], columns: Sequence[str], kind: str, table: str) -> str:
    buf = io.StringIO()
    buf.write(f"# request-sim schema={SCHEMA_VERSION} kind={kind} table={table}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def read_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    return list(csv.DictReader(lines))


def sibling(path: Path, suffix: str) -> Path:
    return path.with_name(f"{path.stem}_{suffix}{path.suffix or '.csv'}")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def default_out(kind: str) -> str:
    return "rqc" if kind == "rqc-gen" else f"{kind}.csv"


def execute(cfg: ExperimentConfig) -> tuple[list[Path], list[tuple[int, str]]]:
    """Run ``cfg`` and write its outputs; returns written paths and per-instance failures."""
    out = Path(cfg.out or default_out(cfg.kind))
    if cfg.kind == "scaling":
        rows = scaling_sweep(cfg.n, cfg.deltas, cfg.qubit_rates, cfg.depth_per_qubit, cfg.epsilon,
                             cfg.copy_count, cfg.ancilla_noisy)
        _write(out, to_csv(rows, SWEEP_COLUMNS, cfg.kind, "sweep"))
        return [out], []
    if cfg.kind == "rqc-gen":
        return write_rqcs(cfg, out), []
    outcome = run_instances(cfg)
    if cfg.kind == "mopt":
        main = to_csv(summarize_mopt(outcome.rows), MOPT_SUMMARY_COLUMNS, cfg.kind, "summary")
        detail = to_csv(outcome.rows, MOPT_COLUMNS, cfg.kind, "instances")
    else:
        main = to_csv(summarize(outcome.rows), SUMMARY_COLUMNS, cfg.kind, "summary")
        detail = to_csv(outcome.rows, RESULT_COLUMNS, cfg.kind, "instances")
    inst = sibling(out, "instances")
    _write(out, main)
    _write(inst, detail)
    return [out, inst], outcome.failures


def write_rqcs(cfg: ExperimentConfig, directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for n, p, i, seed in instance_grid(cfg):
        c = generate_rqc(n, p, seed)
        path = directory / f"rqc_N{n}_p{p}_i{i:03d}.txt"
        path.write_text(dumps(c), encoding="utf-8")
        paths.append(path)
    return paths
