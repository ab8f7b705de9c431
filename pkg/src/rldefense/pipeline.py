"""Artifact-producing stages: train, collect, fit-defenses, evaluate, report.

Every stage reads its inputs from and writes its outputs to one artifact
directory. ``manifest.json`` in that directory accumulates one section per
stage with the resolved settings, so a finished run documents itself.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

from . import report
from .agent import QNetwork, collect_clean_observations, train
from .attacks import FgsmConfig
from .config import AUTO, RunConfig, stage_seed
from .defenses import NoiseConfig, build_stack, fit_autoencoder, fit_pca
from .evalharness import (
    SUITE,
    EvalConfig,
    calibrate_epsilon,
    run_eval,
    sma,
    suite_configs,
    write_episode_csv,
    write_summary_csv,
)
from .numerics import load_mlp, load_observations, load_pca, save_mlp, save_observations, save_pca

log = logging.getLogger(__name__)

CHECKPOINT = "q_network.rdnet"
TRAIN_LOG = "train_log.csv"
DATASET = "clean_observations.rdobs"
AUTOENCODER = "autoencoder.rdnet"
PCA_MODEL = "pca.rdpca"
SUMMARY = "summary.csv"
MANIFEST = "manifest.json"
RESOLVED_CONFIG = "config.resolved"


def episode_csv_name(label: str) -> str:
    return f"episodes_{label}.csv"


def _update_manifest(out: Path, section: str, values: dict) -> None:
    path = out / MANIFEST
    manifest = json.loads(path.read_text()) if path.exists() else {}
    manifest[section] = values
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def read_manifest(out) -> dict:
    path = Path(out) / MANIFEST
    return json.loads(path.read_text()) if path.exists() else {}


def _prepare(cfg: RunConfig, out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / RESOLVED_CONFIG).write_text(cfg.to_text())
    return out


def load_q(out) -> QNetwork:
    return QNetwork(load_mlp(Path(out) / CHECKPOINT))


def cmd_train(cfg: RunConfig, out, progress=None) -> dict:
    out = _prepare(cfg, out)
    dqn = cfg.dqn()
    q, history = train(cfg.scenario(), dqn, progress=progress)
    save_mlp(out / CHECKPOINT, q.params)
    history.write_csv(out / TRAIN_LOG)
    smoothed = sma(history.returns, 100)
    final = float(smoothed[-1]) if smoothed.size else float("nan")
    info = {"episodes": dqn.episodes, "seed": dqn.seed, "final_sma100": final}
    _update_manifest(out, "train", info)
    print(f"final SMA(100) of training returns: {final:.3f}")
    return info


def cmd_collect(cfg: RunConfig, out) -> dict:
    out = _prepare(cfg, out)
    seed = stage_seed(cfg.seed, "collect")
    n = int(cfg["collect.n"])
    data = collect_clean_observations(load_q(out), cfg.scenario(), n, seed)
    save_observations(out / DATASET, data)
    info = {"n": n, "seed": seed}
    _update_manifest(out, "collect", info)
    return info


def cmd_fit_defenses(cfg: RunConfig, out) -> dict:
    out = _prepare(cfg, out)
    data = load_observations(out / DATASET)
    seed = stage_seed(cfg.seed, "autoencoder")
    fit = fit_autoencoder(
        data,
        epochs=int(cfg["autoencoder.epochs"]),
        lr=float(cfg["autoencoder.lr"]),
        batch_size=int(cfg["autoencoder.batch_size"]),
        seed=seed,
    )
    model = fit_pca(data, float(cfg["pca.variance_target"]))
    save_mlp(out / AUTOENCODER, fit.params)
    save_pca(out / PCA_MODEL, model)
    info = {
        "autoencoder_seed": seed,
        "autoencoder_initial_mse": fit.initial_mse,
        "autoencoder_final_mse": fit.final_mse,
        "pca_k": model.k,
        "pca_explained_fraction": model.explained_fraction,
        "pca_degenerate": model.degenerate,
    }
    _update_manifest(out, "fit_defenses", info)
    return info


def resolve_attack(cfg: RunConfig, q: QNetwork, baseline_reward: float, base_seed: int) -> tuple[FgsmConfig, dict]:
    """Turn the attack settings into an ``FgsmConfig``, calibrating epsilon if it is ``auto``."""
    loss = str(cfg["attack.loss"])
    eps = cfg["attack.epsilon"]
    sweep: dict = {}
    if eps == AUTO:
        eps, sweep = calibrate_epsilon(
            q,
            cfg.scenario(),
            baseline_reward,
            episodes=int(cfg["eval.episodes"]),
            base_seed=base_seed,
            target_fraction=float(cfg["attack.target_fraction"]),
            grid=tuple(cfg["attack.grid"]),
            loss=loss,
        )
    attack = FgsmConfig(
        float(eps), loss, apply_every_step=bool(cfg["attack.apply_every_step"]), interval=int(cfg["attack.interval"])
    )
    return attack, {repr(k): v for k, v in sweep.items()}


def cmd_evaluate(cfg: RunConfig, out, labels=SUITE) -> dict:
    out = _prepare(cfg, out)
    q = load_q(out)
    scenario = cfg.scenario()
    base_seed = stage_seed(cfg.seed, "eval") % 2**31
    common = dict(
        episodes=int(cfg["eval.episodes"]),
        base_seed=base_seed,
        batch_size=int(cfg["eval.batch_size"]),
        sma_window=int(cfg["eval.sma_window"]),
    )
    records, baseline = run_eval(q, EvalConfig(scenario, label="baseline", **common))
    results = {"baseline": (records, baseline)}
    info: dict = {
        "base_seed": base_seed,
        "sma_window": common["sma_window"],
        "std": "population",
        "collision_batches": common["batch_size"],
    }

    if any(label != "baseline" for label in labels):
        attack, sweep = resolve_attack(cfg, q, baseline.mean_reward, base_seed)
        eta = cfg["noise.eta"]
        noise = NoiseConfig(
            attack.epsilon if eta == AUTO else float(eta),
            float(cfg["noise.clip_lo"]),
            float(cfg["noise.clip_hi"]),
            seed=stage_seed(cfg.seed, "noise"),
        )
        ae = load_mlp(out / AUTOENCODER)
        pca = load_pca(out / PCA_MODEL)
        stacks = {
            "random_noise": build_stack(["random_noise"], noise=noise),
            "autoencoder": build_stack(["autoencoder"], autoencoder=ae),
            "pca": build_stack(["pca"], pca=pca),
            "ensemble": build_stack(["random_noise", "autoencoder", "pca"], noise=noise, autoencoder=ae, pca=pca),
        }
        configs = suite_configs(scenario, attack, stacks, **common)
        for label in labels:
            if label != "baseline":
                results[label] = run_eval(q, configs[label])
        info.update(
            {
                "epsilon": attack.epsilon,
                "epsilon_sweep": sweep,
                "attack_loss": attack.loss,
                "attack_every_step": attack.apply_every_step,
                "eta": noise.eta,
                "noise_clip": [noise.clip_lo, noise.clip_hi],
                "noise_seed": noise.seed,
                "pca_k": pca.k,
            }
        )

    for label in (lbl for lbl in SUITE if lbl in results):
        write_episode_csv(out / episode_csv_name(label), label, results[label][0])
    summaries = [results[lbl][1] for lbl in SUITE if lbl in results]
    write_summary_csv(out / SUMMARY, summaries)
    info["rows"] = {s.label: s.row()[1:] for s in summaries}
    _update_manifest(out, "evaluate", info)
    for s in summaries:
        log.info("%-13s reward %.2f +/- %.2f  collisions %.2f", s.label, s.mean_reward, s.std_reward, s.mean_collision_rate)
    return info


def cmd_report(out, sma_window: int | None = None) -> dict:
    out = Path(out)
    evaluated = read_manifest(out).get("evaluate", {})
    if sma_window is None:
        sma_window = evaluated.get("sma_window", 10)
    return report.write_report(out, sma_window=int(sma_window), batch_size=int(evaluated.get("collision_batches", 10)))


def full_pipeline(cfg: RunConfig, out, progress=None) -> dict:
    results = {
        "train": cmd_train(cfg, out, progress=progress),
        "collect": cmd_collect(cfg, out),
        "fit_defenses": cmd_fit_defenses(cfg, out),
        "evaluate": cmd_evaluate(cfg, out),
    }
    results["report"] = cmd_report(out, int(cfg["eval.sma_window"]))
    return results

