"""Closed-form shot-cost analysis for the distillation estimators.

Everything here is plain real arithmetic. Quantities that overflow for large
registers (traces of powers, shot counts) also have log-space versions, and
sweeps report shot counts as log10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

AUTO = "auto"
LN2 = math.log(2.0)


def _check_unit(x: float, name: str) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {x}")


def _signal(prob0_id: float) -> float:
    den = 2 * prob0_id - 1
    if den == 0:
        raise ZeroDivisionError("prob0' = 1/2 leaves the ratio undefined")
    return den


# ------------------------------------------------------------ variances

def binomial_variance(prob: float, shots: float) -> float:
    _check_unit(prob, "probability")
    if shots < 1:
        raise ValueError("shot count must be at least 1")
    return prob * (1 - prob) / shots


def variance_of_ratio(prob0: float, prob0_id: float, shots: float, shots_id: float) -> float:
    """First-order (delta-method) variance of ``(2 prob0 - 1) / (2 prob0' - 1)``."""
    den = _signal(prob0_id)
    num = 2 * prob0 - 1
    return (binomial_variance(prob0, shots) * 4 / den**2
            + binomial_variance(prob0_id, shots_id) * 4 * num**2 / den**4)


def shots_required(prob0: float, prob0_id: float, epsilon: float) -> float:
    """Shots per estimate (same count for both circuits) giving standard deviation ``epsilon``."""
    _check_unit(prob0, "prob0")
    _check_unit(prob0_id, "prob0'")
    _check_eps(epsilon)
    den = _signal(prob0_id)
    num = 2 * prob0 - 1
    return 4 / epsilon**2 * (prob0 * (1 - prob0) / den**2
                             + num**2 * prob0_id * (1 - prob0_id) / den**4)


def shots_required_traces(tr_x: float, tr: float, epsilon: float) -> float:
    """Same as :func:`shots_required` written with ``Tr[X rho^M]`` and ``Tr[rho^M]``
    for a noiseless ancilla."""
    if tr <= 0:
        raise ValueError(f"Tr[rho^M] must be positive, got {tr}")
    _check_eps(epsilon)
    return (tr_x**2 + tr**2 - 2 * tr_x**2 * tr**2) / (tr**4 * epsilon**2)


def _check_eps(epsilon: float) -> None:
    if not epsilon > 0:
        raise ValueError(f"target precision must be positive, got {epsilon}")


def ancilla_correction(delta: float, p: int) -> float:
    """Shot inflation when the ancilla also depolarizes over ``p`` layers: ``(1-delta)^(-2p)``."""
    _check_unit(delta, "delta")
    if delta == 1:
        return math.inf
    return (1 - delta) ** (-2 * p)


def _check_trace(tr: float) -> float:
    # sums of eigenvalue powers can overshoot 1 by rounding
    if not 0 < tr <= 1 + 1e-12:
        raise ValueError(f"Tr[rho^M] must be in (0, 1], got {tr}")
    return min(float(tr), 1.0)


def shots_upper_bound(tr: float, epsilon: float, correction: tuple[float, int] | None = None) -> float:
    """``2 / (Tr[rho^M]^2 eps^2)``: covers every Pauli-product observable.

    Below ``Tr = 1/sqrt(2)`` the worst case is ``|Tr[X rho^M]| = Tr[rho^M]``
    and the exact maximum is ``2/eps^2 (1/Tr^2 - 1)``; above it the worst case
    is ``Tr[X rho^M] = 0`` giving ``1/(Tr^2 eps^2)``. Both sit below this bound.
    """
    tr = _check_trace(tr)
    _check_eps(epsilon)
    bound = 2 / (tr**2 * epsilon**2)
    if correction is not None:
        bound *= ancilla_correction(*correction)
    return bound


def worst_case_shots(tr: float, epsilon: float) -> float:
    """Maximum of :func:`shots_required_traces` over ``Tr[X rho^M]^2`` in ``[0, Tr^2]``."""
    tr = _check_trace(tr)
    return max(shots_required_traces(0.0, tr, epsilon), shots_required_traces(tr, tr, epsilon))


def log10_shots_upper_bound(log_tr: float, epsilon: float, correction: tuple[float, int] | None = None) -> float:
    """log10 of :func:`shots_upper_bound` from ``ln Tr[rho^M]``."""
    _check_eps(epsilon)
    out = math.log10(2) - 2 * math.log10(epsilon) - 2 * log_tr / math.log(10)
    if correction is not None:
        delta, p = correction
        _check_unit(delta, "delta")
        out += math.inf if delta == 1 else -2 * p * math.log10(1 - delta)
    return out


# --------------------------------------------------------- trace bounds

def _check_p1(p1: float, n: int) -> None:
    if n < 1:
        raise ValueError("need at least one qubit")
    if not 2.0**-n - 1e-15 <= p1 <= 1.0:
        raise ValueError(f"largest eigenvalue {p1} outside [2^-N, 1] for N={n}")


def trace_lower_bound(p1: float, n: int, m: int) -> float:
    """Smallest ``sum_i p_i^M`` over spectra with largest eigenvalue ``p1``.

    Reached when the remaining weight is spread evenly over the other ``2^N - 1`` levels.
    """
    _check_p1(p1, n)
    _check_m(m)
    rest = 2**n - 1
    return p1**m + (1 - p1) ** m / rest ** (m - 1)


def gd_state(p1: float, n: int) -> np.ndarray:
    """Spectrum of the globally depolarized state with largest eigenvalue ``p1`` (descending)."""
    _check_p1(p1, n)
    rest = 2**n - 1
    return np.concatenate(([p1], np.full(rest, (1 - p1) / rest)))


def _check_m(m: int) -> None:
    if int(m) != m or m < 1:
        raise ValueError(f"copy count must be a positive integer, got {m}")


def _check_query(n: int, p: int, delta: float) -> None:
    if n < 1 or p < 1:
        raise ValueError("N and p must be at least 1")
    _check_unit(delta, "delta")


def survival(p: int, delta: float) -> float:
    """Weight left on the ideal state after ``p`` depolarizing layers."""
    return (1 - delta) ** p


def gd_eigenvalues(n: int, p: int, delta: float) -> tuple[float, float]:
    """Largest and second-largest eigenvalue after ``p`` globally depolarizing layers."""
    _check_query(n, p, delta)
    q = survival(p, delta)
    p2 = (1 - q) / 2**n
    return q + p2, p2


def gd_trace(n: int, p: int, m: int, delta: float) -> float:
    """``Tr[rho^M]`` for a pure state after ``p`` layers of global depolarizing at rate ``delta``."""
    _check_query(n, p, delta)
    _check_m(m)
    q = survival(p, delta)
    d = 2**n
    return ((q * (d - 1) + 1) / d) ** m + (d - 1) * ((1 - q) / d) ** m


def log_gd_trace(n: int, p: int, m: int, delta: float) -> float:
    """Natural log of :func:`gd_trace`, safe for registers of thousands of qubits."""
    _check_query(n, p, delta)
    _check_m(m)
    log_q = p * math.log1p(-delta) if delta < 1 else -math.inf
    q = math.exp(log_q)
    log_inv_d = -n * LN2
    # top eigenvalue q + (1-q)/2^N
    log_top = np.logaddexp(log_q, math.log1p(-q) + log_inv_d) if q < 1 else 0.0
    terms = [m * log_top]
    if q < 1:
        log_rest = n * LN2 + math.log1p(-(2.0**-n))
        terms.append(log_rest + m * (math.log1p(-q) + log_inv_d))
    return float(np.logaddexp.reduce(terms))


# ---------------------------------------------------------- copy counts

def copies_required(p1: float, p2: float, epsilon: float) -> int:
    """Fewest copies whose residual bias, from the two top eigenvalues, is about ``epsilon``."""
    _check_eps(epsilon)
    if not 0 < p2 < p1 <= 1:
        raise ValueError("need 0 < p2 < p1 <= 1")
    m = (LN2 + math.log((1 - p1) / p2) - math.log(epsilon)) / math.log(p1 / p2)
    return max(1, math.ceil(m))


def gd_copies_required(n: int, p: int, delta: float, epsilon: float) -> int:
    """:func:`copies_required` for the globally depolarized spectrum, evaluated in log space."""
    _check_query(n, p, delta)
    _check_eps(epsilon)
    if delta in (0.0, 1.0):
        raise ValueError("delta of 0 or 1 has no finite copy count (no noise / no signal)")
    log_q = p * math.log1p(-delta)
    q = math.exp(log_q)
    # ln(2^{N+1} - 2)
    num = (n + 1) * LN2 + math.log1p(-(2.0 ** -n)) - math.log(epsilon)
    # ln(2^N q / (1 - q) + 1)
    den = float(np.logaddexp(n * LN2 + log_q - math.log1p(-q), 0.0))
    return max(1, math.ceil(num / den))


# ---------------------------------------------------------- error rates

def layer_error_rate(n: int, qubit_rate: float) -> float:
    """Per-layer rate growing with register size and saturating at 1: ``1 - exp(-N rate)``."""
    if qubit_rate < 0:
        raise ValueError("error rate must be non-negative")
    return -math.expm1(-n * qubit_rate)


def per_gate_mode(gate_rate: float) -> float:
    """About one gate per layer with negligible idling: the layer rate is the gate rate."""
    _check_unit(gate_rate, "gate error rate")
    return float(gate_rate)


# --------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class ScalingQuery:
    n: int
    p: int
    delta: float
    epsilon: float = 1e-3
    copies: int | str = AUTO
    ancilla_noisy: bool = False

    def __post_init__(self):
        _check_query(self.n, self.p, self.delta)
        _check_eps(self.epsilon)
        if self.copies != AUTO:
            _check_m(self.copies)

    @classmethod
    def from_qubit_rate(cls, n: int, p: int, qubit_rate: float, **kw) -> "ScalingQuery":
        return cls(n, p, layer_error_rate(n, qubit_rate), **kw)

    @classmethod
    def from_gate_rate(cls, n: int, p: int, gate_rate: float, **kw) -> "ScalingQuery":
        return cls(n, p, per_gate_mode(gate_rate), **kw)

    def resolved_copies(self) -> int:
        if self.copies != AUTO:
            return int(self.copies)
        if self.delta == 0.0:
            return 1
        return gd_copies_required(self.n, self.p, self.delta, self.epsilon)

    def evaluate(self) -> dict:
        m = self.resolved_copies()
        log_tr = log_gd_trace(self.n, self.p, m, self.delta)
        corr = (self.delta, self.p) if self.ancilla_noisy else None
        return {
            "N": self.n,
            "p": self.p,
            "delta": self.delta,
            "M": m,
            "trace": math.exp(log_tr),
            "log10_NS_max": log10_shots_upper_bound(log_tr, self.epsilon, corr),
        }


SWEEP_COLUMNS = ("N", "p", "delta", "M", "trace", "log10_NS_max")


def scaling_sweep(ns: Sequence[int], deltas: Iterable[float] = (), qubit_rates: Iterable[float] = (),
                  depth_per_qubit: int = 1, epsilon: float = 1e-3, copies: int | str = AUTO,
                  ancilla_noisy: bool = False) -> list[dict]:
    """Rows over a grid of register sizes with depth ``p = depth_per_qubit * N``.

    ``deltas`` are per-layer rates held fixed as N grows; ``qubit_rates`` are
    turned into a per-layer rate that grows with N via :func:`layer_error_rate`.
    """
    rows = []
    for n in ns:
        p = depth_per_qubit * n
        for d in deltas:
            rows.append(ScalingQuery(n, p, d, epsilon, copies, ancilla_noisy).evaluate())
        for r in qubit_rates:
            rows.append(ScalingQuery.from_qubit_rate(n, p, r, epsilon=epsilon, copies=copies,
                                                     ancilla_noisy=ancilla_noisy).evaluate())
    return rows
