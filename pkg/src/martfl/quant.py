"""Fixed-point quantization and the integer-exact aggregation/update arithmetic.

Convention: ``x = s * (q - z)``, ``q = floor(x / s + z + 1/2)`` clamped to
``[a_q, b_q]``.  The circuit-side functions need integral zero points, which
``derive_quant_params(..., integral_zero=True)`` provides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

MIN_ETA = 22
INT_WIDTH = 128


class QuantOverflowError(OverflowError):
    def __init__(self, coordinate: int, magnitude: int, width: int = INT_WIDTH):
        self.coordinate = coordinate
        self.magnitude = magnitude
        super().__init__(f"coordinate {coordinate}: |value| = {magnitude} exceeds {width}-bit range")


@dataclass(frozen=True)
class QuantParams:
    a: float
    b: float
    eps: float
    bits: int
    a_q: int
    b_q: int
    s: float
    z: float

    @property
    def zero_point(self) -> int:
        if float(self.z) != int(self.z):
            raise ValueError(f"zero point {self.z} is not integral")
        return int(self.z)

    @property
    def integral(self) -> bool:
        return float(self.z).is_integer()

    def to_json(self) -> dict:
        return {"a": repr(float(self.a)), "b": repr(float(self.b)), "eps": repr(float(self.eps)),
                "bits": str(self.bits), "a_q": str(self.a_q), "b_q": str(self.b_q),
                "s": repr(float(self.s)), "z": repr(float(self.z))}

    @classmethod
    def from_json(cls, d: dict) -> "QuantParams":
        return cls(float(d["a"]), float(d["b"]), float(d["eps"]), int(d["bits"]),
                   int(d["a_q"]), int(d["b_q"]), float(d["s"]), float(d["z"]))


def derive_quant_params(a: float, b: float, eps: float, bits: int = 8,
                        integral_zero: bool = False) -> QuantParams:
    """Solve ``a - eps = s (a_q - z)`` and ``b + eps = s (b_q - z)``.

    With ``integral_zero`` the zero point is rounded to an integer and the
    scale widened so that ``[a - eps, b + eps]`` stays representable.
    """
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    a_q, b_q = 0, 2 ** bits - 1
    lo, hi = a - eps, b + eps
    s = (hi - lo) / (b_q - a_q)
    z = a_q - lo / s
    if integral_zero:
        z = int(min(max(round(z), a_q), b_q))
        s = max(-lo / (z - a_q) if z > a_q else 0.0, hi / (b_q - z) if z < b_q else 0.0)
        z = float(z)
    return QuantParams(float(a), float(b), float(eps), bits, a_q, b_q, float(s), float(z))


def params_for(values, eps_frac: float = 0.05, bits: int = 8, min_span: float = 1e-8) -> QuantParams:
    """Integral-zero params covering ``values`` with a relative margin."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min(initial=0.0)), float(v.max(initial=0.0))
    span = max(hi - lo, min_span)
    if hi - lo < min_span:
        lo, hi = lo - min_span / 2, hi + min_span / 2
    return derive_quant_params(lo, hi, eps_frac * span, bits, integral_zero=True)


@dataclass
class QuantTensor:
    q: np.ndarray
    params: QuantParams
    clamped: int = 0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.int64)
        if self.q.ndim == 1:
            self.q = self.q.reshape(1, -1)
        if self.q.size and (self.q.min() < self.params.a_q or self.q.max() > self.params.b_q):
            raise ValueError("quantized entries outside [a_q, b_q]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.q.shape


def quantize(x, params: QuantParams) -> QuantTensor:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    raw = np.floor(x / params.s + params.z + 0.5)
    q = np.clip(raw, params.a_q, params.b_q)
    return QuantTensor(q.astype(np.int64), params, clamped=int(np.count_nonzero(q != raw)))


def dequantize(t: QuantTensor) -> np.ndarray:
    return t.params.s * (t.q.astype(np.float64) - t.params.z)


def scale_multiplier(numerator_scales, denominator_scale: float, eta: int) -> int:
    """round(2^eta * prod(numerator_scales) / denominator_scale), computed exactly."""
    r = Fraction(2 ** eta)
    for sc in numerator_scales:
        r *= Fraction(sc)
    r /= Fraction(denominator_scale)
    return int(r.numerator * 2 + r.denominator) // (2 * r.denominator)


def _ceil_div(p: int, d: int) -> int:
    return -((-p) // d)


@dataclass
class AggregationTrace:
    """Per-coordinate integer terms of the aggregation (M*) or update (N*) identity."""

    eta: int
    multipliers: tuple
    M1: np.ndarray | None = None
    M2: np.ndarray | None = None
    M3: np.ndarray | None = None
    M4: np.ndarray | None = None
    N1: list | None = None
    N2: list | None = None
    N3: list | None = None
    N4: list | None = None
    R_a: list | None = None
    R_u: list | None = None
    sign: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    clamped: list = field(default_factory=list)


def _check_width(values, offset: int = 0):
    limit = 1 << (INT_WIDTH - 1)
    for j, v in enumerate(values):
        if abs(v) >= limit:
            raise QuantOverflowError(offset + j, abs(int(v)))


def _finish(P: list, zero: int, params: QuantParams, eta: int):
    """Output quanta and remainders from 2^eta-scaled signed products P."""
    scale = 1 << eta
    q, R, clamped = [], [], []
    for j, p in enumerate(P):
        qj = zero + _ceil_div(p, scale)
        if qj < params.a_q or qj > params.b_q:
            clamped.append(j)
            qj = min(max(qj, params.a_q), params.b_q)
        q.append(qj)
        R.append(scale * (qj - zero) - p)
    return q, R, clamped


def aggregate_terms(Kq: np.ndarray, Uq: np.ndarray, k_zero: int, u_zero: int):
    """M1..M4 of the rearranged aggregation, one entry per column of ``Uq``."""
    Kq = np.asarray(Kq, dtype=np.int64).ravel()
    Uq = np.asarray(Uq, dtype=np.int64)
    n = len(Kq)
    M1 = Kq @ Uq
    M2 = np.full(Uq.shape[1], u_zero * int(Kq.sum()), dtype=np.int64)
    M3 = k_zero * Uq.sum(axis=0)
    M4 = np.full(Uq.shape[1], n * k_zero * u_zero, dtype=np.int64)
    return M1, M2, M3, M4


def quantized_aggregate(Kq: QuantTensor, Uq: QuantTensor, out_params: QuantParams,
                        eta: int = MIN_ETA) -> tuple[QuantTensor, AggregationTrace]:
    """``U' = K U`` on quanta.

    Per column ``2^eta q'_j = R_j + 2^eta z' + mul * (M1 + M4 - M2 - M3)``
    with ``mul = round(2^eta K_s U_s / U'_s)`` and ``0 <= R_j < 2^eta``.
    """
    if eta < MIN_ETA:
        raise ValueError(f"eta must be >= {MIN_ETA}")
    n = Kq.shape[1]
    if n < 1 or Kq.shape[0] != 1 or Uq.shape[0] != n:
        raise ValueError(f"shape mismatch: K {Kq.shape}, U {Uq.shape}")
    kp, up = Kq.params, Uq.params
    bound = n * kp.b_q * up.b_q
    if bound >= 1 << 62:
        raise QuantOverflowError(0, bound, 64)
    M1, M2, M3, M4 = aggregate_terms(Kq.q, Uq.q, kp.zero_point, up.zero_point)
    mul = scale_multiplier([kp.s, up.s], out_params.s, eta)
    D = (M1 + M4) - (M2 + M3)
    P = [mul * int(d) for d in D]
    _check_width(P)
    q, R, clamped = _finish(P, out_params.zero_point, out_params, eta)
    trace = AggregationTrace(eta=eta, multipliers=(mul,), M1=M1, M2=M2, M3=M3, M4=M4, R_a=R,
                             sign=(D < 0).astype(np.int64), clamped=clamped)
    return QuantTensor(np.array(q, dtype=np.int64), out_params, clamped=len(clamped)), trace


def update_terms(Wq, Uq, w_zero: int, u_zero: int, A: int, B: int):
    Wq = [int(v) for v in np.asarray(Wq).ravel()]
    Uq = [int(v) for v in np.asarray(Uq).ravel()]
    N1 = [A * w for w in Wq]
    N2 = [A * w_zero] * len(Wq)
    N3 = [B * u for u in Uq]
    N4 = [B * u_zero] * len(Uq)
    return N1, N2, N3, N4


def quantized_update(Wq_prev: QuantTensor, Uq_agg: QuantTensor, out_params: QuantParams,
                     eta: int = MIN_ETA) -> tuple[QuantTensor, AggregationTrace]:
    """``W' = W + U'`` on quanta.

    Per column ``2^eta w'_j = R_j + 2^eta z_W' + (N1 + N3 - N2 - N4)`` where
    ``N1 = A w_j``, ``N2 = A z_W``, ``N3 = B u'_j``, ``N4 = B z_U'`` and
    ``A``, ``B`` are the 2^eta-scaled ratios ``W_s / W'_s`` and ``U'_s / W'_s``.
    """
    if eta < MIN_ETA:
        raise ValueError(f"eta must be >= {MIN_ETA}")
    if Wq_prev.shape != Uq_agg.shape or Wq_prev.shape[0] != 1:
        raise ValueError(f"shape mismatch: W {Wq_prev.shape}, U' {Uq_agg.shape}")
    wp, up = Wq_prev.params, Uq_agg.params
    A = scale_multiplier([wp.s], out_params.s, eta)
    B = scale_multiplier([up.s], out_params.s, eta)
    N1, N2, N3, N4 = update_terms(Wq_prev.q, Uq_agg.q, wp.zero_point, up.zero_point, A, B)
    D = [n1 + n3 - n2 - n4 for n1, n2, n3, n4 in zip(N1, N2, N3, N4)]
    _check_width(N1)
    _check_width(N3)
    _check_width(D)
    q, R, clamped = _finish(D, out_params.zero_point, out_params, eta)
    trace = AggregationTrace(eta=eta, multipliers=(A, B), N1=N1, N2=N2, N3=N3, N4=N4, R_u=R,
                             sign=np.array([d < 0 for d in D], dtype=np.int64), clamped=clamped)
    return QuantTensor(np.array(q, dtype=np.int64), out_params, clamped=len(clamped)), trace


def fidelity_bound(n: int, scales, out_scale: float) -> float:
    """Tolerance (n + 2) * s_max + s'/2 for the dequantized pipeline."""
    return (n + 2) * max(scales) + out_scale / 2.0


def aggregation_identity_holds(trace: AggregationTrace, Uq_out: QuantTensor) -> bool:
    """Exact integer re-check of every aggregation column in ``trace``."""
    scale = 1 << trace.eta
    (mul,) = trace.multipliers
    z = Uq_out.params.zero_point
    for j, q in enumerate(Uq_out.q.ravel()):
        left = int(trace.M1[j]) + int(trace.M4[j])
        right = int(trace.M2[j]) + int(trace.M3[j])
        R = trace.R_a[j]
        if not 0 <= R < scale:
            return False
        lhs = scale * int(q) + (mul * (right - left) if right > left else 0)
        rhs = R + scale * z + (mul * (left - right) if left >= right else 0)
        if lhs != rhs:
            return False
    return True


def update_identity_holds(trace: AggregationTrace, Wq_out: QuantTensor) -> bool:
    scale = 1 << trace.eta
    z = Wq_out.params.zero_point
    for j, q in enumerate(Wq_out.q.ravel()):
        left = trace.N1[j] + trace.N3[j]
        right = trace.N2[j] + trace.N4[j]
        R = trace.R_u[j]
        if not 0 <= R < scale:
            return False
        lhs = scale * int(q) + (right - left if right > left else 0)
        rhs = R + scale * z + (left - right if left >= right else 0)
        if lhs != rhs:
            return False
    return True


def quantized_pipeline(W_prev, K, U, eta: int = MIN_ETA, bits: int = 8, eps_frac: float = 0.05):
    """Quantize floats, aggregate, update; returns the tensors and both traces.

    Output scales come from the float result's range, widened by ``eps_frac``.
    """
    K = np.asarray(K, dtype=np.float64).reshape(1, -1)
    U = np.asarray(U, dtype=np.float64)
    W_prev = np.asarray(W_prev, dtype=np.float64).reshape(1, -1)
    k_params = derive_quant_params(0.0, 1.0, 1.0 / (2 ** bits), bits, integral_zero=True)
    Kq = quantize(K, k_params)
    Uq = quantize(U, params_for(U, eps_frac, bits))
    Wq = quantize(W_prev, params_for(W_prev, eps_frac, bits))
    agg_float = dequantize(Kq) @ dequantize(Uq)
    Uq_agg, agg_trace = quantized_aggregate(Kq, Uq, params_for(agg_float, eps_frac, bits), eta)
    new_float = dequantize(Wq) + dequantize(Uq_agg)
    Wq_new, upd_trace = quantized_update(Wq, Uq_agg, params_for(new_float, eps_frac, bits), eta)
    return {"Kq": Kq, "Uq": Uq, "Wq_prev": Wq, "Uq_agg": Uq_agg, "Wq_new": Wq_new,
            "agg_trace": agg_trace, "upd_trace": upd_trace}


def is_power_of_two_scale(s: float) -> bool:
    m, _ = math.frexp(s)
    return m == 0.5
