"""Experiment orchestration: data splits, the per-epoch protocol loop and metrics."""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import proof as prf
from .aggregation import (BaselineState, NoPurchasableModels, adjust_baseline, cluster_scores,
                          select_and_weight)
from .attacks import AdversarySpec, AttackKind, apply_trigger, backdoor_poison, free_rider, label_flip, \
    sign_randomizing
from .baselines import reference_aggregate
from .circuit import PublicInputs
from .ledger import Ledger, default_k_params, quantize_weights, sign_commitment, \
    weights_from_amounts
from .model import Dataset, LocalModel, SyntheticTask, child_rng, cosine_score, evaluate, flatten_diff, \
    train_local
from .quant import dequantize, params_for, quantize, quantized_aggregate, quantized_update
from .scoring import ScoringSession, commit_quantized, dp_respond

SCHEMA = "martfl.config/v1"
AGGREGATORS = ("martFL", "FedAvg", "FLTrust", "Krum", "Median")
POW_EXPONENT = 1.2
CSV_COLUMNS = ("seed", "epoch", "mta", "asr", "dac", "inclusiveness", "robustness",
               "baseline_correct", "verified")


def sub_seed(seed: int, *keys: int) -> int:
    return int(child_rng(seed, *keys).integers(0, 2 ** 62))


@dataclass
class TaskSpec:
    num_classes: int = 10
    feature_dim: int = 20
    separation: float = 1.0
    noise_std: float = 1.0
    arch: str = "linear"
    hidden: int = 32


@dataclass
class AdversaryMix:
    fraction: float
    spec: AdversarySpec


@dataclass
class ExperimentConfig:
    task: TaskSpec = field(default_factory=TaskSpec)
    n_dps: int = 10
    samples_per_dp: int = 200
    root_fraction: float = 0.02
    root_min: int = 40
    test_size: int = 2000
    truth_size: int = 4000
    split: str = "UNI"
    distribution: str = "IID"
    bias: str = "Unbiased"
    biased_fraction: float = 0.0
    bias_mass: float = 0.95
    adversaries: list = field(default_factory=list)
    aggregator: str = "martFL"
    T: float = 0.05
    beta: float = 0.1
    top_n: int = 1
    krum_f: float = 0.0
    quantize: bool = False
    bits: int = 8
    eps_frac: float = 0.05
    eta: int = 22
    verifiable: bool = False
    c: int = 16
    vdf_difficulty: int = 64
    tamper_epochs: list = field(default_factory=list)
    epochs: int = 30
    seeds: list = field(default_factory=lambda: [0])
    reward_per_epoch: int = 1_000_000
    local_steps: int = 20
    lr: float = 0.1
    batch_size: int = 32

    def __post_init__(self):
        if isinstance(self.task, dict):
            self.task = TaskSpec(**self.task)
        self.adversaries = [a if isinstance(a, AdversaryMix) else
                            AdversaryMix(float(a["fraction"]),
                                         a["spec"] if isinstance(a.get("spec"), AdversarySpec) else
                                         AdversarySpec(a["kind"], dict(a.get("params", {})), int(a.get("seed", 0))))
                            for a in self.adversaries]
        self.validate()

    def validate(self):
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")
        if self.split not in ("UNI", "POW") or self.distribution not in ("IID", "NonIID"):
            raise ValueError("split must be UNI/POW and distribution IID/NonIID")
        if self.bias not in ("Unbiased", "TypeI", "TypeII"):
            raise ValueError("bias must be Unbiased, TypeI or TypeII")
        if self.n_dps < 2:
            raise ValueError("need at least two DPs")
        total = sum(a.fraction for a in self.adversaries) + (self.biased_fraction if self.distribution == "NonIID" else 0)
        if total > 1.0 + 1e-9 or any(a.fraction < 0 for a in self.adversaries):
            raise ValueError("role fractions must be non-negative and sum to at most 1")
        if not 0.0 <= self.beta <= 1.0 or self.T <= 0:
            raise ValueError("beta must be in [0, 1] and T positive")
        if self.quantize and self.aggregator != "martFL":
            raise ValueError("the quantized pipeline is only wired for the martFL aggregator")
        if self.verifiable and not self.quantize:
            raise ValueError("verifiable mode needs quantization on")
        if self.epochs < 1 or not self.seeds:
            raise ValueError("need at least one epoch and one seed")

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        schema = d.pop("schema", None)
        if schema != SCHEMA:
            raise ValueError(f"unsupported config schema {schema!r}; expected {SCHEMA!r}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        d = asdict(self)
        d["adversaries"] = [{"fraction": a.fraction, **a.spec.to_json()} for a in self.adversaries]
        return {"schema": SCHEMA, **d}


# ---------------------------------------------------------------------------
# data


def power_law_sizes(total: int, n: int, exponent: float = POW_EXPONENT) -> list[int]:
    """Sizes proportional to rank^-exponent, largest first; rounding remainder to the largest."""
    raw = np.arange(1, n + 1, dtype=np.float64) ** (-exponent)
    sizes = np.floor(total * raw / raw.sum()).astype(int)
    sizes[0] += total - int(sizes.sum())
    return [int(s) for s in sizes]


def half_probs(num_classes: int, half, mass: float) -> np.ndarray:
    half = sorted(half)
    p = np.full(num_classes, (1.0 - mass) / max(num_classes - len(half), 1))
    p[half] = mass / len(half)
    return p / p.sum()


@dataclass
class Split:
    dps: dict  # dp_id -> Dataset
    root: Dataset
    roles: dict  # dp_id -> "honest" | "biased" | AttackKind value
    specs: dict  # dp_id -> AdversarySpec for malicious DPs
    root_half: list


def assign_roles(cfg: ExperimentConfig, seed: int):
    n = cfg.n_dps
    order = child_rng(seed, 0x201E).permutation(n).tolist()
    roles, specs, pos = {}, {}, 0
    for mix in cfg.adversaries:
        k = int(round(mix.fraction * n))
        for dp in order[pos:pos + k]:
            roles[dp] = mix.spec.kind.value
            specs[dp] = mix.spec
        pos += k
    if cfg.distribution == "NonIID":
        k = int(round(cfg.biased_fraction * n))
        for dp in order[pos:pos + k]:
            roles[dp] = "biased"
        pos += k
    for dp in order[pos:]:
        roles[dp] = "honest"
    return roles, specs


def split_data(task: SyntheticTask, cfg: ExperimentConfig, seed: int) -> Split:
    n = cfg.n_dps
    total = n * cfg.samples_per_dp
    if cfg.split == "UNI":
        sizes = [cfg.samples_per_dp] * n
    else:
        sizes = power_law_sizes(total, n)
    if min(sizes) < 1:
        raise ValueError("sample budget too small for the number of DPs")
    roles, specs = assign_roles(cfg, seed)
    C = task.num_classes
    rng = child_rng(seed, 0xB1A5)
    root_half = sorted(rng.choice(C, size=C // 2, replace=False).tolist())
    dps = {}
    for dp in range(n):
        probs = None
        if roles[dp] == "biased":
            if cfg.bias == "TypeII":
                half = child_rng(seed, 0xB1A6, dp).choice(C, size=C // 2, replace=False)
            else:
                half = root_half
            probs = half_probs(C, half, cfg.bias_mass)
        dps[dp] = task.sample(sizes[dp], sub_seed(seed, 0xDA7A, dp), probs)
    root_n = max(cfg.root_min, int(round(cfg.root_fraction * total)))
    root_probs = None if cfg.bias == "Unbiased" else half_probs(C, root_half, cfg.bias_mass)
    root = task.sample(root_n, sub_seed(seed, 0x2007), root_probs)
    return Split(dps, root, roles, specs, root_half)


def apportion(weights: dict, total: int) -> dict:
    """Largest-remainder integer split of ``total`` proportional to ``weights``."""
    ids = sorted(weights)
    w = np.array([max(0.0, float(weights[i])) for i in ids])
    if w.sum() <= 0:
        raise ValueError("cannot apportion with zero total weight")
    exact = w / w.sum() * total
    base = np.floor(exact).astype(np.int64)
    left = total - int(base.sum())
    frac = exact - base
    for j in sorted(range(len(ids)), key=lambda j: (-frac[j], ids[j]))[:left]:
        base[j] += 1
    return {i: int(b) for i, b in zip(ids, base)}


# ---------------------------------------------------------------------------
# metrics


@dataclass
class EpochMetrics:
    epoch: int
    mta: float
    asr: float | None
    dac: float
    inclusiveness: float
    robustness: float
    baseline_correct: bool | None
    verified: bool | None
    purchased: list = field(default_factory=list)
    clamped: int = 0


def inclusiveness_robustness(purchased: set, roles: dict) -> tuple[float, float]:
    benign = [dp for dp, r in roles.items() if r in ("honest", "biased")]
    malicious = [dp for dp in roles if dp not in benign]
    inc = sum(dp in purchased for dp in benign) / len(benign) if benign else 1.0
    rob = sum(dp not in purchased for dp in malicious) / len(malicious) if malicious else 1.0
    return inc, rob


def attack_success(model: LocalModel, test: Dataset, specs: dict) -> float | None:
    targeted = [s for s in specs.values() if s.kind in (AttackKind.BACKDOOR, AttackKind.LABEL_FLIP, AttackKind.SYBIL)]
    if not targeted:
        return None
    s = targeted[0]
    if s.kind is AttackKind.BACKDOOR:
        keep = test.y != s.params["target"]
        x = apply_trigger(test.x[keep], s.params["trigger_width"], s.params["trigger_value"])
        return float(np.mean(model.predict(x) == s.params["target"]))
    a, b = s.params["class_a"], s.params["class_b"]
    keep = test.y == a
    if not keep.any():
        return 0.0
    return float(np.mean(model.predict(test.x[keep]) == b))


def summarize(epochs: list[EpochMetrics]) -> dict:
    def mean_of(key):
        vals = [getattr(e, key) for e in epochs if getattr(e, key) is not None]
        return float(np.mean([float(v) for v in vals])) if vals else None

    last = epochs[-1]
    return {"final_mta": last.mta, "final_asr": last.asr, "dac": mean_of("dac"),
            "inclusiveness": mean_of("inclusiveness"), "robustness": mean_of("robustness"),
            "baseline_correct_rate": mean_of("baseline_correct"),
            "verified_rate": mean_of("verified"), "epochs": len(epochs)}


def compute_metrics(history: dict) -> dict:
    """Per-seed summaries plus mean/std over seeds.  ``history`` maps seed -> list of EpochMetrics."""
    if not history or any(not eps for eps in history.values()):
        raise ValueError("need at least one completed epoch per seed")
    per_seed = {seed: summarize(eps) for seed, eps in history.items()}
    agg = {}
    for key in next(iter(per_seed.values())):
        vals = [p[key] for p in per_seed.values() if p[key] is not None]
        if vals:
            agg[key] = {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
    return {"per_seed": per_seed, "aggregate": agg}


# ---------------------------------------------------------------------------
# the epoch loop


@dataclass
class SeedRun:
    epochs: list
    events: list
    proofs: dict  # epoch -> (proof json, state json)
    ledger: Ledger | None
    final_model: LocalModel


class _Runner:
    def __init__(self, cfg: ExperimentConfig, seed: int):
        self.cfg, self.seed = cfg, seed
        t = cfg.task
        self.task = SyntheticTask.make(t.num_classes, t.feature_dim, t.separation, t.noise_std, seed=seed)
        self.split = split_data(self.task, cfg, seed)
        self.test = self.task.sample(cfg.test_size, sub_seed(seed, 0x7E57))
        self.truth = self.task.sample(cfg.truth_size, sub_seed(seed, 0x7207))
        self.model = LocalModel.init(t.arch, t.feature_dim, t.num_classes, seed=sub_seed(seed, 0x1417), hidden=t.hidden)
        self.dp_ids = sorted(self.split.dps)
        self.k_params = default_k_params()
        self.keys = prf.setup()
        self.ledger = Ledger(k_params=self.k_params, verifier=self._ledger_verifier) if cfg.verifiable else None
        self.history_globals = [self.model.weights.copy()]
        self.baseline_state: BaselineState | None = None
        self.published = None  # QuantTensor of the current global model in quantized mode
        self._announced = None  # (previous, new) quantized globals visible to the verifier
        if cfg.quantize:
            self.published = quantize(self.model.weights, params_for(self.model.weights, cfg.eps_frac, cfg.bits))
            self.model = self.model.with_weights(dequantize(self.published).ravel())
        self.proofs = {}
        self.dp_secrets = {dp: child_rng(seed, 0x5EC2, dp).bytes(32) for dp in self.dp_ids}

    # -- helpers ----------------------------------------------------------
    def _train(self, data: Dataset, key: int, epoch: int, alpha: float = 1.0) -> np.ndarray:
        cfg = self.cfg
        after = train_local(self.model, data, cfg.local_steps, cfg.lr, sub_seed(self.seed, epoch, key),
                            cfg.batch_size, alpha)
        return flatten_diff(after, self.model)

    def _dp_updates(self, epoch: int) -> dict:
        updates, sybil_base = {}, None
        C = self.cfg.task.num_classes
        for dp in self.dp_ids:
            data = self.split.dps[dp]
            spec = self.split.specs.get(dp)
            if spec is None:
                updates[dp] = self._train(data, dp, epoch)
            elif spec.kind is AttackKind.SIGN_RANDOMIZING:
                updates[dp] = sign_randomizing(self._train(data, dp, epoch), sub_seed(self.seed, epoch, dp, 0x5164))
            elif spec.kind is AttackKind.FREE_RIDER:
                g2 = self.history_globals[-2] if len(self.history_globals) >= 2 else None
                updates[dp] = free_rider(self.history_globals[-1], g2)
            elif spec.kind is AttackKind.LABEL_FLIP:
                updates[dp] = self._train(label_flip(data, spec.params["class_a"], spec.params["class_b"], C), dp, epoch)
            elif spec.kind is AttackKind.BACKDOOR:
                p = spec.params
                poisoned, alpha = backdoor_poison(data, p["target"], p["poison_fraction"], p["alpha"],
                                                  p["trigger_width"], p["trigger_value"], sub_seed(self.seed, epoch, dp))
                updates[dp] = self._train(poisoned, dp, epoch, alpha)
            elif spec.kind is AttackKind.SYBIL:
                if sybil_base is None:
                    flipped = label_flip(data, spec.params["class_a"], spec.params["class_b"], C)
                    sybil_base = self._train(flipped, dp, epoch)
                updates[dp] = sybil_base.copy()
        return updates

    def _ledger_verifier(self, proof, state) -> bool:
        roots = {dp: bytes.fromhex(state.models[dp][0]) for dp in state.models}
        return prf.verify(self.keys, proof, roots, state.committed_K, published=self._announced)

    # -- one epoch --------------------------------------------------------
    def epoch(self, t: int) -> EpochMetrics:
        cfg = self.cfg
        updates = self._dp_updates(t)
        root_update = self._train(self.split.root, 0xF00D, t)
        truth_update = self._train(self.truth, 0x7207, t)
        baseline = None
        verified = None
        clamped = 0

        # quantized updates and commitments happen before any scoring
        U = np.stack([updates[dp] for dp in self.dp_ids])
        Uq = commitments = trees = salts = None
        if cfg.quantize:
            Uq = quantize(U, params_for(U, cfg.eps_frac, cfg.bits))
            clamped += Uq.clamped
            salts = [child_rng(self.seed, 0x5A17, t, dp).bytes(16) for dp in self.dp_ids]
            pairs = [commit_quantized(Uq.q[i], salts[i], dp, t) for i, dp in enumerate(self.dp_ids)]
            commitments = [p[0] for p in pairs]
            trees = [p[1] for p in pairs]

        if cfg.aggregator == "martFL":
            if self.baseline_state is None:
                baseline = root_update
            else:
                baseline = self.baseline_state.next_baseline(updates)
            if not np.any(baseline):
                baseline = root_update
            session = ScoringSession()
            scores = {dp: session.read_score(dp_respond(session.send_baseline(baseline), updates[dp]))
                      for dp in self.dp_ids}
            anchors = set(self.baseline_state.preferred_dps) if self.baseline_state else set()
            rest = {dp: s for dp, s in scores.items() if dp not in anchors}
            trace = cluster_scores(rest, cfg.T, seed=sub_seed(self.seed, t, 0xC1)) if rest else None
            try:
                decision = select_and_weight(scores, trace, cfg.T, cfg.beta, seed=sub_seed(self.seed, t, 0xB7),
                                             anchors=anchors)
                weights = {dp: decision.weights.get(dp, 0.0) for dp in self.dp_ids}
            except NoPurchasableModels:
                weights = None
        else:
            if cfg.aggregator == "FLTrust":
                baseline = root_update
            f = int(round(cfg.krum_f * cfg.n_dps))
            f = min(f, cfg.n_dps - 3)
            ref = reference_aggregate(cfg.aggregator, updates,
                                      {dp: len(self.split.dps[dp]) for dp in self.dp_ids}, root_update, max(f, 0))
            weights = {dp: (ref.weights[dp] if dp in ref.selected else 0.0) for dp in self.dp_ids}
            if not ref.selected:
                weights = None

        purchased = set() if weights is None else {dp for dp, w in weights.items() if w > 0}
        # random P2 picks are baseline candidates even when their clipped weight is zero
        candidates = purchased | (set(decision.picked) if cfg.aggregator == "martFL" and weights is not None else set())
        prev_weights = self.model.weights.copy()
        if weights is not None and cfg.aggregator == "martFL":
            amounts = apportion(weights, cfg.reward_per_epoch)
            if cfg.quantize:
                verified, n_clamped = self._quantized_step(t, U, Uq, amounts, commitments, trees, salts)
                clamped += n_clamped
            else:
                K = weights_from_amounts([amounts[dp] for dp in self.dp_ids])
                self.model = self.model.with_weights(prev_weights + K @ U)
        elif weights is not None:
            self.model = self.model.with_weights(prev_weights + ref.update)

        if cfg.aggregator == "martFL" and candidates:
            self.baseline_state = adjust_baseline({dp: updates[dp] for dp in sorted(candidates)}, self.split.root,
                                                  self.model.with_weights(prev_weights), cfg.top_n,
                                                  self.baseline_state, t)
        self.history_globals.append(self.model.weights.copy())

        mta, _ = evaluate(self.model, self.test)
        inc, rob = inclusiveness_robustness(purchased, self.split.roles)
        return EpochMetrics(
            epoch=t, mta=mta, asr=attack_success(self.model, self.test, self.split.specs),
            dac=len(purchased) / cfg.n_dps, inclusiveness=inc, robustness=rob,
            baseline_correct=None if baseline is None else bool(cosine_score(baseline, truth_update) > 0),
            verified=verified, purchased=sorted(purchased), clamped=clamped)

    def _quantized_step(self, t, U, Uq, amounts, commitments, trees, salts):
        cfg = self.cfg
        ids = self.dp_ids
        led = self.ledger
        Kq_list = quantize_weights([amounts[dp] for dp in ids], self.k_params)
        stub = None
        if led is not None:
            eid = led.new_epoch(led.da, delay=1, initial_funds=2 * cfg.reward_per_epoch)
            for i, dp in enumerate(ids):
                led.commit_model(dp, eid, commitments[i].root,
                                 sign_commitment(self.dp_secrets[dp], commitments[i].root, t, dp))
            led.advance(2)
            stub = led.prepare(led.da, eid, ids, [amounts[dp] for dp in ids], cfg.c)
            Kq_list = [led.epochs[eid].committed_K[dp] for dp in ids]

        Kq = quantize(np.zeros((1, len(ids))), self.k_params)
        Kq.q[0, :] = Kq_list
        agg_est = dequantize(Kq) @ dequantize(Uq)
        Uq_agg, agg_trace = quantized_aggregate(Kq, Uq, params_for(agg_est, cfg.eps_frac, cfg.bits), cfg.eta)
        Wq_prev = self.published
        new_est = dequantize(Wq_prev) + dequantize(Uq_agg)
        Wq_new, upd_trace = quantized_update(Wq_prev, Uq_agg, params_for(new_est, cfg.eps_frac, cfg.bits), cfg.eta)
        n_clamped = len(agg_trace.clamped) + len(upd_trace.clamped)

        verified = None
        if led is not None:
            # the model is published first, then the VDF fixes the sampled columns
            transcript = prf.SamplingTranscript.run(stub["nonces"], U.shape[1], cfg.c, cfg.vdf_difficulty)
            idx = transcript.indices
            if t in cfg.tamper_epochs and idx:
                j = idx[0]
                Wq_new.q[0, j] = Wq_new.q[0, j] + 1 if Wq_new.q[0, j] < Wq_new.params.b_q else Wq_new.q[0, j] - 1
            Xc = PublicInputs(list(ids), U.shape[1], list(idx), Kq_list,
                              [int(Wq_prev.q[0, j]) for j in idx], [int(Wq_new.q[0, j]) for j in idx],
                              self.k_params, Uq.params, Uq_agg.params, Wq_prev.params, Wq_new.params, cfg.eta)
            self._announced = (Wq_prev.q.copy(), Wq_new.q.copy())
            pf = prf.prove(Xc, prf.ProverWitness(Uq.q, salts, trees), self.keys, transcript, epoch=t)
            led.commit_inputs(led.da, eid, self.keys.backend, prf.digest_json(Xc.to_json()), pf.digest(), idx)
            verified = led.verify_aggregation(ids[0], eid, pf)
            for dp in ids:
                led.claim_reward(dp, eid)
            led.claim_reward(led.da, eid)
            self.proofs[t] = (pf.to_json(), led.epochs[eid].to_json())
        self.published = Wq_new
        self.model = self.model.with_weights(dequantize(Wq_new).ravel())
        return verified, n_clamped

    def run(self) -> SeedRun:
        epochs = [self.epoch(t) for t in range(self.cfg.epochs)]
        events = [ev.to_json() for ev in self.ledger.events] if self.ledger else []
        return SeedRun(epochs, events, self.proofs, self.ledger, self.model)


def run_seed(cfg: ExperimentConfig, seed: int) -> SeedRun:
    return _Runner(cfg, seed).run()


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: dict  # seed -> SeedRun
    report: dict

    def metrics_rows(self) -> list[dict]:
        rows = []
        for seed, run in self.runs.items():
            for e in run.epochs:
                rows.append({"seed": seed, "epoch": e.epoch, "mta": e.mta, "asr": e.asr, "dac": e.dac,
                             "inclusiveness": e.inclusiveness, "robustness": e.robustness,
                             "baseline_correct": e.baseline_correct, "verified": e.verified})
        return rows

    def metrics_json(self) -> str:
        body = {"config": self.config.to_json(), "report": self.report,
                "epochs": {str(seed): [asdict(e) for e in run.epochs] for seed, run in self.runs.items()}}
        return json.dumps(body, sort_keys=True, indent=2) + "\n"

    def metrics_csv(self) -> str:
        out = io.StringIO()
        w = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.metrics_rows():
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return out.getvalue()

    def events_ndjson(self) -> str:
        lines = []
        for seed, run in self.runs.items():
            for ev in run.events:
                lines.append(json.dumps({"seed": seed, **ev}, sort_keys=True, separators=(",", ":")))
        return "".join(line + "\n" for line in lines)

    def write(self, out_dir: str):
        os.makedirs(os.path.join(out_dir, "proofs"), exist_ok=True)
        with open(os.path.join(out_dir, "metrics.csv"), "w") as fh:
            fh.write(self.metrics_csv())
        with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
            fh.write(self.metrics_json())
        with open(os.path.join(out_dir, "events.ndjson"), "w") as fh:
            fh.write(self.events_ndjson())
        for seed, run in self.runs.items():
            for t, (proof_json, state_json) in run.proofs.items():
                stem = os.path.join(out_dir, "proofs", f"seed{seed}_epoch{t}")
                with open(stem + ".proof.json", "w") as fh:
                    fh.write(json.dumps(proof_json, sort_keys=True, separators=(",", ":")) + "\n")
                with open(stem + ".state.json", "w") as fh:
                    fh.write(json.dumps(state_json, sort_keys=True, separators=(",", ":")) + "\n")


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    runs = {seed: run_seed(cfg, seed) for seed in cfg.seeds}
    report = compute_metrics({seed: r.epochs for seed, r in runs.items()})
    return ExperimentResult(cfg, runs, report)


def verify_files(proof_path: str, state_path: str) -> bool:
    """Independent re-verification of a stored proof against a stored epoch state."""
    with open(proof_path) as fh:
        pf = prf.AggregationProof.from_json(json.load(fh))
    with open(state_path) as fh:
        state = json.load(fh)
    roots = {int(dp): bytes.fromhex(v[0]) for dp, v in state["models"].items()}
    K = {int(dp): int(k) for dp, k in state["committed_K"].items()}
    if state.get("inputs") and state["inputs"].get("proof_digest") != pf.digest():
        return False
    return prf.verify(prf.setup(pf.backend), pf, roots, K)


def bench_quant(n: int, m: int, bits: int, seeds: int = 5, eta: int = 22) -> list[dict]:
    """Fidelity of the quantized aggregation+update pipeline against floats."""
    from .quant import fidelity_bound, quantized_pipeline

    rows = []
    for s in range(seeds):
        rng = child_rng(s, 0xBE9C)
        W = rng.normal(0, 1, size=m)
        K = rng.dirichlet(np.ones(n))
        U = rng.normal(0, 0.1, size=(n, m))
        out = quantized_pipeline(W, K, U, eta=eta, bits=bits)
        float_new = W + K @ U
        err = float(np.max(np.abs(dequantize(out["Wq_new"]).ravel() - float_new)))
        scales = [out["Kq"].params.s, out["Uq"].params.s, out["Wq_prev"].params.s, out["Uq_agg"].params.s]
        rows.append({"seed": s, "n": n, "m": m, "bits": bits, "max_abs_err": err,
                     "bound": fidelity_bound(n, scales, out["Wq_new"].params.s)})
    return rows


__all__ = ["ExperimentConfig", "TaskSpec", "AdversaryMix", "split_data", "power_law_sizes", "apportion",
           "run_experiment", "run_seed", "compute_metrics", "verify_files", "bench_quant", "EpochMetrics",
           "SCHEMA"]
