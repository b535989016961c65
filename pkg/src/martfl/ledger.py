"""Deterministic trading ledger: epochs, escrowed deposits, commitments, verification, payouts.

Time is a logical tick advanced explicitly.  All token amounts are integers;
remainders of the failure-penalty split are burned and tracked so that

    paid_out + deposit_da + deposit_dp + sum(amounts) + burned == total_deposited

holds for every epoch after every call.
"""
from __future__ import annotations

import copy
import hashlib
import hmac
import json
from dataclasses import dataclass, field

import numpy as np

from .proof import derive_seed
from .quant import QuantParams, derive_quant_params, quantize

EVENT_KINDS = ("NewEpoch", "EpochDeposit", "CommitModel", "RegistrationClosed", "EpochPrepared",
               "CommitPublicInputs", "EpochVerified", "RewardClaimed")
FLAGS = ("is_register_closed", "is_prepared", "is_inputs_committed", "is_verified", "is_failed")


class LedgerError(RuntimeError):
    pass


def default_k_params(bits: int = 16) -> QuantParams:
    return derive_quant_params(0.0, 1.0, 1.0 / (1 << bits), bits, integral_zero=True)


def weights_from_amounts(amounts: list[int]) -> np.ndarray:
    total = sum(amounts)
    if total <= 0:
        return np.zeros(len(amounts))
    return np.array(amounts, dtype=np.float64) / total


def quantize_weights(amounts: list[int], k_params: QuantParams) -> list[int]:
    if not amounts:
        return []
    return [int(v) for v in quantize(weights_from_amounts(amounts), k_params).q.ravel()]


def sign_commitment(secret: bytes, root: bytes, epoch: int, dp_id: int) -> bytes:
    """Keyed digest standing in for a DP's signature over its commitment."""
    msg = root + int(epoch).to_bytes(8, "big") + int(dp_id).to_bytes(8, "big")
    return hmac.new(secret, msg, hashlib.sha256).digest()


@dataclass
class LedgerEvent:
    kind: str
    epoch_id: int
    payload: dict
    tick: int
    seq: int

    def to_json(self) -> dict:
        return {"seq": self.seq, "tick": self.tick, "kind": self.kind, "epoch_id": self.epoch_id,
                "payload": self.payload}


@dataclass
class EpochState:
    epoch_id: int
    deposit_dp: int
    deposit_da: int
    delay: int
    ts: int
    total_deposited: int
    samples: list = field(default_factory=list)
    amounts: dict = field(default_factory=dict)  # dp_id -> unclaimed tokens
    allocated: dict = field(default_factory=dict)  # dp_id -> amount set at prepare
    committed_K: dict = field(default_factory=dict)  # dp_id -> quantized weight
    models: dict = field(default_factory=dict)  # dp_id -> (root hex, signature hex)
    inputs: dict | None = None
    transcript: dict | None = None
    paid_out: int = 0
    burned: int = 0
    penalty_share: int = 0
    payouts: dict = field(default_factory=dict)  # claimant -> total paid
    is_register_closed: bool = False
    is_prepared: bool = False
    is_inputs_committed: bool = False
    is_verified: bool = False
    is_failed: bool = False

    def conserved(self) -> bool:
        held = self.deposit_da + self.deposit_dp + sum(self.amounts.values())
        return self.paid_out + held + self.burned == self.total_deposited

    def flags(self) -> tuple:
        return tuple(getattr(self, f) for f in FLAGS)

    def to_json(self) -> dict:
        return {
            "epoch_id": self.epoch_id, "deposit_dp": self.deposit_dp, "deposit_da": self.deposit_da,
            "delay": self.delay, "ts": self.ts, "total_deposited": self.total_deposited,
            "samples": list(self.samples),
            "amounts": {str(k): v for k, v in sorted(self.amounts.items())},
            "allocated": {str(k): v for k, v in sorted(self.allocated.items())},
            "committed_K": {str(k): v for k, v in sorted(self.committed_K.items())},
            "models": {str(k): list(v) for k, v in sorted(self.models.items())},
            "inputs": self.inputs, "transcript": self.transcript,
            "paid_out": self.paid_out, "burned": self.burned, "penalty_share": self.penalty_share,
            "payouts": {str(k): v for k, v in sorted(self.payouts.items(), key=lambda kv: str(kv[0]))},
            **{f: getattr(self, f) for f in FLAGS},
        }


class Ledger:
    """Single serialized state machine mirroring the trading contract."""

    def __init__(self, da: str = "DA", k_params: QuantParams | None = None, verifier=None):
        self.da = da
        self.k_params = k_params or default_k_params()
        self.verifier = verifier  # callable(proof, EpochState) -> bool
        self.tick = 0
        self.epochs: dict[int, EpochState] = {}
        self.events: list[LedgerEvent] = []
        self.calls = 0

    # -- plumbing ---------------------------------------------------------
    def advance(self, ticks: int = 1) -> int:
        if ticks < 0:
            raise ValueError("time only moves forward")
        self.tick += ticks
        return self.tick

    def _emit(self, kind: str, epoch_id: int, payload: dict):
        self.events.append(LedgerEvent(kind, epoch_id, payload, self.tick, len(self.events)))

    def _epoch(self, epoch_id: int) -> EpochState:
        if epoch_id not in self.epochs:
            raise LedgerError(f"unknown epoch {epoch_id}")
        return self.epochs[epoch_id]

    def _require_da(self, caller):
        if caller != self.da:
            raise LedgerError("only the DA may call this")

    def _registration_open(self, e: EpochState) -> bool:
        if e.is_register_closed:
            return False
        if self.tick - e.ts > e.delay:
            e.is_register_closed = True
            self._emit("RegistrationClosed", e.epoch_id, {})
            return False
        return True

    # -- contract calls ---------------------------------------------------
    def new_epoch(self, caller, delay: int, initial_funds: int) -> int:
        self.calls += 1
        self._require_da(caller)
        if delay < 0 or initial_funds < 0:
            raise LedgerError("delay and funds must be non-negative")
        if self.epochs and not self.epochs[max(self.epochs)].is_verified:
            raise LedgerError("previous epoch is not verified")
        eid = len(self.epochs)
        half = initial_funds // 2
        self.epochs[eid] = EpochState(eid, deposit_dp=initial_funds - half, deposit_da=half, delay=delay,
                                      ts=self.tick, total_deposited=initial_funds)
        self._emit("NewEpoch", eid, {"delay": delay, "funds": initial_funds})
        return eid

    def deposit(self, caller, epoch_id: int, funds: int) -> tuple[int, int]:
        self.calls += 1
        self._require_da(caller)
        e = self._epoch(epoch_id)
        if funds < 0:
            raise LedgerError("funds must be non-negative")
        if not self._registration_open(e):
            raise LedgerError("registration is closed")
        half = funds // 2
        e.deposit_da += half
        e.deposit_dp += funds - half
        e.total_deposited += funds
        self._emit("EpochDeposit", epoch_id, {"funds": funds})
        return e.deposit_da, e.deposit_dp

    def commit_model(self, caller, epoch_id: int, root: bytes, signature: bytes = b""):
        self.calls += 1
        e = self._epoch(epoch_id)
        if caller == self.da:
            raise LedgerError("the DA cannot commit a model")
        if not self._registration_open(e):
            raise LedgerError("registration is closed")
        if caller in e.models:
            raise LedgerError(f"DP {caller} already committed this epoch")
        e.models[caller] = (bytes(root).hex(), bytes(signature).hex())
        self._emit("CommitModel", epoch_id, {"dp": caller, "root": bytes(root).hex(),
                                             "signature": bytes(signature).hex()})

    def prepare(self, caller, epoch_id: int, dp_list, amount_list, c: int) -> dict | None:
        """Fix the reward allocation and the sampling seed.

        Returns the sampling stub (nonces, seed, c).  The VDF and the index
        draw run only after the DA has published the new global model.
        """
        self.calls += 1
        self._require_da(caller)
        e = self._epoch(epoch_id)
        if e.is_prepared:
            raise LedgerError("epoch already prepared")
        if self._registration_open(e):
            raise LedgerError("registration is still open")
        dp_list, amount_list = list(dp_list), [int(a) for a in amount_list]
        if len(dp_list) != len(amount_list) or len(set(dp_list)) != len(dp_list):
            raise LedgerError("dp and amount lists must align and be unique")
        if set(dp_list) != set(e.models):
            raise LedgerError("allocation must cover exactly the committed DPs")
        if any(a < 0 for a in amount_list) or sum(amount_list) != e.deposit_dp:
            raise LedgerError("amounts must be non-negative and sum to deposit_dp")
        if c < 0:
            raise LedgerError("sample count must be non-negative")
        order = sorted(range(len(dp_list)), key=lambda i: dp_list[i])
        dps = [dp_list[i] for i in order]
        amts = [amount_list[i] for i in order]
        e.amounts = dict(zip(dps, amts))
        e.allocated = dict(e.amounts)
        e.deposit_dp = 0
        e.committed_K = dict(zip(dps, quantize_weights(amts, self.k_params)))
        stub = None
        if dps:
            nonces = {dp: bytes.fromhex(e.models[dp][0]) for dp in dps}
            stub = {"nonces": nonces, "seed": derive_seed(nonces), "c": c}
            e.transcript = {"seed": stub["seed"].hex(), "c": c}
        e.is_prepared = True
        self._emit("EpochPrepared", epoch_id, {"dp_list": dps, "amounts": amts, "c": c})
        return stub

    def commit_inputs(self, caller, epoch_id: int, vk_tag: str, xc_digest: str, proof_digest: str,
                      samples=None):
        self.calls += 1
        self._require_da(caller)
        e = self._epoch(epoch_id)
        if not e.is_prepared or e.is_verified or e.is_inputs_committed:
            raise LedgerError("inputs can only be committed once, after prepare and before verification")
        e.inputs = {"vk_tag": vk_tag, "xc_digest": xc_digest, "proof_digest": proof_digest}
        e.samples = [int(j) for j in (samples or [])]
        e.is_inputs_committed = True
        self._emit("CommitPublicInputs", epoch_id, {**e.inputs, "samples": e.samples})

    def verify_aggregation(self, caller, epoch_id: int, proof) -> bool:
        self.calls += 1
        e = self._epoch(epoch_id)
        if not e.is_inputs_committed:
            raise LedgerError("public inputs not committed")
        if e.is_verified:
            raise LedgerError("epoch already verified")
        if proof.digest() != e.inputs["proof_digest"]:
            raise LedgerError("proof digest does not match the committed digest")
        ok = bool(self.verifier(proof, self.read_epoch(epoch_id))) if self.verifier else False
        self._apply_verification(e, ok)
        return ok

    def _apply_verification(self, e: EpochState, ok: bool):
        e.is_verified = True
        if not ok:
            e.is_failed = True
            keys = sorted(e.amounts)
            share = e.deposit_da // len(keys) if keys else 0
            for dp in keys:
                e.amounts[dp] += share
            e.burned += e.deposit_da - share * len(keys)
            e.penalty_share = share
            e.deposit_da = 0
        self._emit("EpochVerified", e.epoch_id, {"ok": ok})

    def claim_reward(self, caller, epoch_id: int) -> int:
        self.calls += 1
        e = self._epoch(epoch_id)
        if not e.is_verified:
            raise LedgerError("epoch not verified yet")
        if caller == self.da:
            paid, e.deposit_da = e.deposit_da, 0
        elif caller in e.amounts:
            paid, e.amounts[caller] = e.amounts[caller], 0
        else:
            raise LedgerError(f"{caller!r} has no claim on epoch {epoch_id}")
        e.paid_out += paid
        e.payouts[caller] = e.payouts.get(caller, 0) + paid
        self._emit("RewardClaimed", epoch_id, {"caller": caller, "paid": paid})
        return paid

    def read_epoch(self, epoch_id: int) -> EpochState:
        return copy.deepcopy(self._epoch(epoch_id))

    # -- persistence ------------------------------------------------------
    def events_ndjson(self) -> str:
        return "".join(json.dumps(ev.to_json(), sort_keys=True, separators=(",", ":")) + "\n"
                       for ev in self.events)

    def state_json(self) -> str:
        return json.dumps({str(k): e.to_json() for k, e in sorted(self.epochs.items())},
                          sort_keys=True, separators=(",", ":"))

    @classmethod
    def replay(cls, events, **kwargs) -> "Ledger":
        """Rebuild a ledger from its event log; verification outcomes are taken from the log."""
        led = cls(**kwargs)
        for ev in events:
            d = ev.to_json() if isinstance(ev, LedgerEvent) else ev
            led.tick = d["tick"]
            kind, eid, p = d["kind"], d["epoch_id"], d["payload"]
            if kind == "NewEpoch":
                led.new_epoch(led.da, p["delay"], p["funds"])
            elif kind == "EpochDeposit":
                led.deposit(led.da, eid, p["funds"])
            elif kind == "CommitModel":
                led.commit_model(p["dp"], eid, bytes.fromhex(p["root"]), bytes.fromhex(p["signature"]))
            elif kind == "RegistrationClosed":
                e = led._epoch(eid)
                if not e.is_register_closed:
                    e.is_register_closed = True
                    led._emit("RegistrationClosed", eid, {})
            elif kind == "EpochPrepared":
                led.prepare(led.da, eid, p["dp_list"], p["amounts"], p["c"])
            elif kind == "CommitPublicInputs":
                led.commit_inputs(led.da, eid, p["vk_tag"], p["xc_digest"], p["proof_digest"], p["samples"])
            elif kind == "EpochVerified":
                led.calls += 1
                led._apply_verification(led._epoch(eid), p["ok"])
            elif kind == "RewardClaimed":
                led.claim_reward(p["caller"], eid)
            else:
                raise LedgerError(f"unknown event kind {kind!r}")
        return led
