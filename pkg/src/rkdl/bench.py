"""Experiment harness: multi-round error curves and timing tables across the
four trainers, with machine-readable CSV/JSON outputs."""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .datasets import DatasetSpec, load_dataset
from .kernel_dl import KdlConfig, TrainTrace, kdl_train, morkdl_train, orkdl_train, rkdl_train
from .kernels import KernelSpec
from .linear_dl import DLConfig, aksvd_train

METHODS = ("kdl", "rkdl-d", "orkdl-d", "morkdl-d")
REDUCED_METHODS = ("rkdl-d", "orkdl-d", "morkdl-d")


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec
    methods: list[str]
    kernel: KernelSpec
    kernel_dl: KdlConfig
    linear_dl: DLConfig
    rounds: int = 10
    base_seed: int = 0
    max_gram_signals: int = 20000

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not self.methods:
            raise ValueError("method list is empty")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {METHODS}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        kd = dict(d.get("kernel_dl", {}))
        ld = dict(d.get("linear_dl", {}))
        return cls(
            dataset=DatasetSpec.from_dict(d["dataset"]),
            methods=list(d.get("methods", list(METHODS))),
            kernel=KernelSpec.from_dict(d.get("kernel", {})),
            kernel_dl=KdlConfig(**kd),
            linear_dl=DLConfig(**ld),
            rounds=int(d.get("rounds", 10)),
            base_seed=int(d.get("base_seed", 0)),
            max_gram_signals=int(d.get("max_gram_signals", 20000)),
        )

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset.to_dict(),
            "methods": list(self.methods),
            "kernel": self.kernel.to_dict(),
            "kernel_dl": dataclasses.asdict(self.kernel_dl),
            "linear_dl": dataclasses.asdict(self.linear_dl),
            "rounds": self.rounds,
            "base_seed": self.base_seed,
            "max_gram_signals": self.max_gram_signals,
        }


@dataclass
class MethodResult:
    traces: list[TrainTrace] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    pretrain_seconds: list[float] = field(default_factory=list)
    failed: str | None = None

    @property
    def errors(self) -> np.ndarray:
        """(rounds, iters + 1) error curves."""
        return np.asarray([t.errors for t in self.traces])


@dataclass
class RunResult:
    config: ExperimentConfig
    methods: dict[str, MethodResult]

    @property
    def any_failed(self) -> bool:
        return any(r.failed is not None for r in self.methods.values())


def _method_config(method: str, cfg: ExperimentConfig, seed: int) -> KdlConfig:
    """Per-method effective trainer settings for one round.

    The non-optimized trainers take no gradient steps; the mixed trainer
    falls back to the linear-DL sparsity for its linear code when the config
    does not pin one.
    """
    kd = cfg.kernel_dl
    changes: dict = {"seed": seed}
    if method in ("kdl", "rkdl-d"):
        changes["grad_steps"] = 0
    if method == "morkdl-d" and kd.dl_sparsity is None:
        changes["dl_sparsity"] = cfg.linear_dl.sparsity
    return dataclasses.replace(kd, **changes)


def _run_method(method: str, Y: np.ndarray, cfg: ExperimentConfig, seed: int, vectors):
    kdcfg = _method_config(method, cfg, seed)
    if method == "kdl":
        _, _, trace = kdl_train(Y, cfg.kernel, kdcfg, max_gram_signals=cfg.max_gram_signals)
    elif method == "rkdl-d":
        _, _, trace = rkdl_train(Y, vectors, cfg.kernel, kdcfg)
    elif method == "orkdl-d":
        _, _, trace = orkdl_train(Y, vectors, cfg.kernel, kdcfg)
    else:
        _, _, _, trace = morkdl_train(Y, vectors, cfg.kernel, kdcfg)
    return trace


def run_experiment(cfg: ExperimentConfig, progress=None) -> RunResult:
    """Run every configured method for ``cfg.rounds`` rounds.

    Round r uses seed base_seed + r everywhere; the three reduced methods
    share the linear dictionary pre-trained once per round, so their error
    differences isolate the update rules. Rounds execute serially to keep the
    wall-clock measurements honest. A trainer error aborts that method's
    remaining rounds but the other methods continue.
    """
    signals = load_dataset(cfg.dataset)
    signals.validate()
    Y = signals.values
    results = {m: MethodResult() for m in cfg.methods}
    needs_pretrain = any(m in REDUCED_METHODS for m in cfg.methods)

    for r in range(cfg.rounds):
        seed = cfg.base_seed + r
        vectors = None
        pretrain_seconds = 0.0
        if needs_pretrain:
            dl_cfg = dataclasses.replace(cfg.linear_dl, seed=seed)
            t0 = time.perf_counter()
            vectors, _ = aksvd_train(Y, dl_cfg)
            pretrain_seconds = time.perf_counter() - t0
        for method in cfg.methods:
            res = results[method]
            if res.failed is not None:
                continue
            if progress is not None:
                progress(method, r)
            t0 = time.perf_counter()
            try:
                trace = _run_method(method, Y, cfg, seed, vectors)
            except Exception as exc:  # noqa: BLE001 - recorded, other methods continue
                res.failed = f"round {r}: {type(exc).__name__}: {exc}"
                continue
            res.seconds.append(time.perf_counter() - t0)
            if method in REDUCED_METHODS:
                res.pretrain_seconds.append(pretrain_seconds)
            res.traces.append(trace)
    return RunResult(config=cfg, methods=results)


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_outputs(result: RunResult, out_dir: str) -> dict[str, str]:
    """Write errors.csv, curves.csv and summary.json under ``out_dir``.

    errors.csv has one row per (method, round, iteration); curves.csv holds
    the per-iteration mean error with one column per method; summary.json
    mirrors the final-error and timing tables. Returns the file paths.
    """
    if not result.methods:
        raise ValueError("experiment result contains no methods")
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "errors": os.path.join(out_dir, "errors.csv"),
        "curves": os.path.join(out_dir, "curves.csv"),
        "summary": os.path.join(out_dir, "summary.json"),
    }

    with open(paths["errors"], "w") as f:
        f.write("method,round,iteration,error\n")
        for method in result.config.methods:
            res = result.methods[method]
            for rnd, trace in enumerate(res.traces):
                for it, err in enumerate(trace.errors):
                    f.write(f"{method},{rnd},{it},{_fmt(err)}\n")

    completed = [m for m in result.config.methods if result.methods[m].traces]
    with open(paths["curves"], "w") as f:
        f.write("iteration," + ",".join(completed) + "\n")
        if completed:
            means = {m: result.methods[m].errors.mean(axis=0) for m in completed}
            n_iter = max(v.shape[0] for v in means.values())
            for it in range(n_iter):
                cells = [_fmt(means[m][it]) if it < means[m].shape[0] else "" for m in completed]
                f.write(f"{it}," + ",".join(cells) + "\n")

    summary: dict = {"config": result.config.to_dict(), "methods": {}}
    for method in result.config.methods:
        res = result.methods[method]
        entry: dict = {"failed": res.failed, "rounds_completed": len(res.traces)}
        if res.traces:
            finals = res.errors[:, -1]
            entry.update(
                final_error_mean=float(np.mean(finals)),
                final_error_std=float(np.std(finals)),
                seconds_mean=float(np.mean(res.seconds)),
                phase_seconds_mean={
                    k: float(np.mean([t.phase_seconds.get(k, 0.0) for t in res.traces]))
                    for k in res.traces[0].phase_seconds
                },
            )
            if res.pretrain_seconds:
                entry["pretrain_seconds_mean"] = float(np.mean(res.pretrain_seconds))
        summary["methods"][method] = entry
    with open(paths["summary"], "w") as f:
        json.dump(summary, f, indent=2)
    return paths
