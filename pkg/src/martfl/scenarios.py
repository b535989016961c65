"""Desk-scale experiment configurations behind the acceptance suite and the scripts.

Each builder returns plain ``ExperimentConfig`` objects so that a scenario can
be rerun from the CLI after ``json.dump(cfg.to_json(), ...)``.
"""
from __future__ import annotations

from .harness import ExperimentConfig

# Slow-learning 10-class task: a fifth of the signal (FedAvg under 80%
# sign-randomizing) is visibly worse than all of it within 30 epochs.
SLOW_TASK = {"num_classes": 10, "feature_dim": 100, "separation": 0.28, "noise_std": 1.0, "arch": "linear"}
SLOW_TRAINING = {"n_dps": 10, "epochs": 30, "lr": 0.004, "local_steps": 10, "batch_size": 100_000,
                 "samples_per_dp": 1000}

TRADEOFF_TASK = {"num_classes": 4, "feature_dim": 20, "separation": 1.0, "noise_std": 1.0, "arch": "linear"}
LABEL_FLIP_40 = [{"fraction": 0.4, "kind": "LabelFlip", "params": {"class_a": 0, "class_b": 1}}]


def quantization_fidelity(quantize: bool, seeds=(0, 1, 2, 3, 4)) -> ExperimentConfig:
    """n=16 DPs, m = 200*10 + 10 = 2010 parameters."""
    return ExperimentConfig(aggregator="martFL", n_dps=16, epochs=20, distribution="IID", bias="Unbiased",
                            task={"num_classes": 10, "feature_dim": 200, "separation": 0.2, "noise_std": 1.0},
                            lr=0.02, local_steps=10, batch_size=100_000, samples_per_dp=300, bits=8,
                            quantize=quantize, seeds=list(seeds))


def untargeted(aggregator: str, fraction: float, seeds=(0, 1, 2)) -> ExperimentConfig:
    adv = [{"fraction": fraction, "kind": "SignRandomizing"}] if fraction else []
    return ExperimentConfig(aggregator=aggregator, distribution="IID", bias="Unbiased", adversaries=adv,
                            task=SLOW_TASK, seeds=list(seeds), **SLOW_TRAINING)


def tradeoff(aggregator: str, seeds=(0, 1, 2, 3, 4)) -> ExperimentConfig:
    """30% high-quality, 30% TypeI-biased, 40% label-flipping DPs; TypeI-biased root."""
    return ExperimentConfig(aggregator=aggregator, n_dps=10, distribution="NonIID", bias="TypeI",
                            biased_fraction=0.3, bias_mass=0.99, split="POW", adversaries=LABEL_FLIP_40,
                            krum_f=0.4, task=TRADEOFF_TASK, lr=0.1, local_steps=10, batch_size=100_000,
                            samples_per_dp=300, epochs=30, seeds=list(seeds))


def baseline_selection(bias: str, seeds=(0, 1, 2, 3, 4)) -> ExperimentConfig:
    return ExperimentConfig(aggregator="martFL", distribution="NonIID", bias=bias, biased_fraction=0.3,
                            task=SLOW_TASK, seeds=list(seeds), **SLOW_TRAINING)


def determinism_configs() -> list[ExperimentConfig]:
    small = {"num_classes": 4, "feature_dim": 8, "separation": 1.5}
    common = dict(task=small, n_dps=6, samples_per_dp=80, epochs=4, seeds=[0, 1], test_size=300,
                  truth_size=300, local_steps=5)
    return [
        ExperimentConfig(quantize=True, verifiable=True, c=8, vdf_difficulty=16, tamper_epochs=[2],
                         adversaries=[{"fraction": 0.34, "kind": "SignRandomizing"}], **common),
        ExperimentConfig(aggregator="FLTrust", distribution="NonIID", bias="TypeII", biased_fraction=0.3,
                         adversaries=[{"fraction": 0.17, "kind": "Backdoor"}], **common),
        ExperimentConfig(aggregator="Krum", krum_f=0.2, split="POW",
                         adversaries=[{"fraction": 0.34, "kind": "Sybil", "params": {"count": 2}}], **common),
        ExperimentConfig(aggregator="martFL", adversaries=[{"fraction": 0.34, "kind": "FreeRider"}],
                         task={**small, "arch": "mlp", "hidden": 8},
                         **{k: v for k, v in common.items() if k != "task"}),
    ]
