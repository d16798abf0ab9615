"""Kraus-set model of a quantum channel.

Provides CPTP validation, the dense reference channel application that every
circuit simulation is checked against, reproducible random channel
generation, the operator-grouping scheme that packs several Kraus operators
into one expanded operator, and the discretized exciton-transport channel
used as the worked physical example.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import (
    DimensionMismatchError,
    NotPSDError,
    dagger,
    kron,
    max_abs,
    partial_trace,
    psd_sqrt,
)


class ChannelError(Exception):
    pass


class NotTracePreservingError(ChannelError):
    pass


class NotPowerOfTwoError(ChannelError):
    pass


class InvalidGroupSizeError(ChannelError):
    pass


class InvalidRatesError(ChannelError):
    pass


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class KrausSet:
    """A validated collection of Kraus operators on a power-of-two space.

    ``deviation`` records ``||sum_k M_k^dag M_k - I||_max`` at validation time.
    """

    operators: tuple[np.ndarray, ...]
    dim: int
    num_qubits: int
    deviation: float

    @property
    def num_operators(self) -> int:
        return len(self.operators)

    @property
    def is_minimal(self) -> bool:
        """Minimal sets need at most dim**2 operators."""
        return self.num_operators <= self.dim**2


@dataclass(frozen=True, eq=False)
class GroupedKrausSet:
    """Kraus operators re-packed in groups of ``group_size`` on an expanded space.

    Each full group stacks ``group_size`` original operators in the first
    ``dim`` columns of an expanded operator of size ``group_size * dim``; a
    zero-padded partial group covers any remainder, and one extra operator
    carrying the identity on the non-initial block restores trace
    preservation on the expanded space.
    """

    base: KrausSet
    group_size: int
    expanded_dim: int
    operators: tuple[np.ndarray, ...]
    includes_identity_block: bool

    @property
    def num_branches(self) -> int:
        """Expanded operators that act nontrivially on the embedded input."""
        n = len(self.operators)
        return n - 1 if self.includes_identity_block else n

    @property
    def branch_operators(self) -> tuple[np.ndarray, ...]:
        if self.includes_identity_block:
            return self.operators[:-1]
        return self.operators


def validate_cptp(ops, tol: float = 1e-9) -> KrausSet:
    """Validate trace preservation and wrap the operators in a KrausSet.

    Raises :class:`NotTracePreservingError` when the completeness sum
    deviates from the identity by more than ``tol``,
    :class:`DimensionMismatchError` for ragged or non-square input and
    :class:`NotPowerOfTwoError` when the dimension is not a qubit count.
    """
    mats = [np.array(op, dtype=complex) for op in ops]
    if not mats:
        raise DimensionMismatchError("a Kraus set needs at least one operator")
    d = mats[0].shape[0]
    for m in mats:
        if m.ndim != 2 or m.shape != (d, d):
            raise DimensionMismatchError(
                f"all operators must be {d}x{d}, got {m.shape}"
            )
    if not is_power_of_two(d):
        raise NotPowerOfTwoError(f"dimension {d} is not a power of two")
    total = sum(dagger(m) @ m for m in mats)
    dev = max_abs(total - np.eye(d))
    if dev > tol:
        raise NotTracePreservingError(
            f"sum M^dag M deviates from identity by {dev:.3e} (tol {tol})"
        )
    return KrausSet(
        operators=tuple(mats),
        dim=d,
        num_qubits=int(math.log2(d)),
        deviation=dev,
    )


def apply_channel(kset: KrausSet, rho: np.ndarray) -> np.ndarray:
    """Reference channel application ``sum_k M_k rho M_k^dag``.

    This is the oracle every synthesized circuit is verified against.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (kset.dim, kset.dim):
        raise DimensionMismatchError(
            f"state shape {rho.shape} does not match channel dimension {kset.dim}"
        )
    out = np.zeros_like(rho)
    for m in kset.operators:
        out += m @ rho @ dagger(m)
    return out


def random_kraus_set(num_qubits: int, num_operators: int, seed: int) -> KrausSet:
    """Reproducible random CPTP set.

    Samples complex Gaussian matrices G_k and normalizes them with the
    inverse square root of S = sum G_k^dag G_k, which enforces trace
    preservation exactly up to numerics. Identical seeds give bitwise
    identical operators.
    """
    if num_qubits < 1 or num_operators < 1:
        raise ValueError("need num_qubits >= 1 and num_operators >= 1")
    rng = np.random.default_rng(seed)
    d = 2**num_qubits
    gs = [
        (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
        for _ in range(num_operators)
    ]
    s = sum(dagger(g) @ g for g in gs)
    w, v = np.linalg.eigh(s)
    inv_sqrt = (v / np.sqrt(w)) @ dagger(v)
    return validate_cptp([g @ inv_sqrt for g in gs], tol=1e-10)


def group_kraus(kset: KrausSet, group_size: int) -> GroupedKrausSet:
    """Pack ``group_size`` Kraus operators into each expanded operator.

    With m = group_size * b + r operators, the b full groups stack their
    members in the first ``dim`` columns of a ``group_size*dim`` square
    matrix (zeros elsewhere); a partial group covers the remainder when
    r > 0; and one final operator holds the identity on the non-initial
    block so the expanded set is again trace preserving. ``group_size == 1``
    returns the base operators unchanged with no identity block.
    """
    m = kset.num_operators
    if not is_power_of_two(group_size):
        raise InvalidGroupSizeError(f"group size {group_size} is not a power of two")
    if not 1 <= group_size <= m:
        raise InvalidGroupSizeError(
            f"group size {group_size} outside [1, {m}]"
        )
    d = kset.dim
    if group_size == 1:
        return GroupedKrausSet(
            base=kset,
            group_size=1,
            expanded_dim=d,
            operators=kset.operators,
            includes_identity_block=False,
        )

    ld = group_size * d
    b, r = divmod(m, group_size)
    expanded: list[np.ndarray] = []
    for j in range(b + (1 if r else 0)):
        op = np.zeros((ld, ld), dtype=complex)
        members = kset.operators[j * group_size : (j + 1) * group_size]
        for g, mk in enumerate(members):
            op[g * d : (g + 1) * d, :d] = mk
        expanded.append(op)
    ident = np.zeros((ld, ld), dtype=complex)
    ident[d:, d:] = np.eye(ld - d)
    expanded.append(ident)

    total = sum(dagger(op) @ op for op in expanded)
    dev = max_abs(total - np.eye(ld))
    if dev > max(1e-9, 10 * kset.deviation):
        raise NotTracePreservingError(
            f"expanded set deviates from identity by {dev:.3e}"
        )
    return GroupedKrausSet(
        base=kset,
        group_size=group_size,
        expanded_dim=ld,
        operators=tuple(expanded),
        includes_identity_block=True,
    )


def expand_state(grouped: GroupedKrausSet, rho: np.ndarray) -> np.ndarray:
    """Embed a base-space state as (grouping register in |0..0>) x rho."""
    rho = np.asarray(rho, dtype=complex)
    d = grouped.base.dim
    if rho.shape != (d, d):
        raise DimensionMismatchError(f"state shape {rho.shape}, expected {(d, d)}")
    zero = np.zeros((grouped.group_size, grouped.group_size), dtype=complex)
    zero[0, 0] = 1.0
    return kron(zero, rho)


def reduce_state(grouped: GroupedKrausSet, rho_expanded: np.ndarray) -> np.ndarray:
    """Trace the grouping subsystem out of an expanded-space state."""
    return partial_trace(
        rho_expanded, [grouped.group_size, grouped.base.dim], keep={1}
    )


def apply_grouped(grouped: GroupedKrausSet, rho: np.ndarray) -> np.ndarray:
    """Apply the expanded operators to the embedded state and trace back.

    Equals ``apply_channel`` on the base set; this is the grouping
    trace-out identity.
    """
    emb = expand_state(grouped, rho)
    out = np.zeros_like(emb)
    for op in grouped.operators:
        out += op @ emb @ dagger(op)
    return reduce_state(grouped, out)


@dataclass(frozen=True)
class FMOParams:
    """Rates (1/fs) and timestep (fs) of the discretized exciton channel."""

    alpha: float = 3e-3
    beta: float = 5e-7
    gamma: float = 6.28e-3
    dt: float = 48.4


# Default initial state: equal superposition of |001>, |010>, |100>.
FMO_INITIAL_KETS = (1, 2, 4)


def fmo_initial_state() -> np.ndarray:
    """Density matrix of the default single-exciton superposition input."""
    psi = np.zeros(8, dtype=complex)
    for k in FMO_INITIAL_KETS:
        psi[k] = 1 / np.sqrt(3)
    return np.outer(psi, psi.conj())


def fmo_kraus_set(params: FMOParams = FMOParams()) -> KrausSet:
    """Eight Kraus operators of one discrete timestep on 3 qubits.

    Sites are computational basis states 0..4 of the 8-dimensional space:
    dephasing on sites 1..3, recombination from sites 1..3 to the ground
    state 0, relaxation from site 3 into the sink site 4, and a remainder
    operator M_0 that acts as the identity on the unused levels 5..7.
    Operators are returned in index order M_0..M_7.
    """
    for name in ("alpha", "beta", "gamma", "dt"):
        if getattr(params, name) < 0:
            raise InvalidRatesError(f"{name} must be non-negative")
    a = params.alpha * params.dt
    b = params.beta * params.dt
    g = params.gamma * params.dt
    if max(a, b, g) > 1.0:
        raise InvalidRatesError("rate * dt must stay within [0, 1]")

    def ketbra(i: int, j: int, scale: float) -> np.ndarray:
        m = np.zeros((8, 8), dtype=complex)
        m[i, j] = np.sqrt(scale)
        return m

    ops = [None] * 8
    ops[1] = ketbra(1, 1, a)
    ops[2] = ketbra(2, 2, a)
    ops[3] = ketbra(3, 3, a)
    ops[4] = ketbra(0, 1, b)
    ops[5] = ketbra(0, 2, b)
    ops[6] = ketbra(0, 3, b)
    ops[7] = ketbra(4, 3, g)
    total = sum(dagger(m) @ m for m in ops[1:])
    try:
        ops[0] = psd_sqrt(np.eye(8) - total, tol=1e-10)
    except NotPSDError as exc:
        raise InvalidRatesError(f"rates leave no PSD remainder: {exc}") from exc
    return validate_cptp(ops, tol=1e-10)


@dataclass(frozen=True)
class Trajectory:
    """Site populations <s|rho|s> (s = 0..4) and trace, per timestep."""

    times_fs: np.ndarray
    populations: np.ndarray  # shape (steps + 1, 5)
    traces: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.traces) - 1


def fmo_trajectory(
    params: FMOParams, rho0: np.ndarray, steps: int
) -> Trajectory:
    """Iterate the discretized channel and record site populations.

    Row 0 holds the initial state; row t the state after t applications.
    """
    kset = fmo_kraus_set(params)
    rho = np.asarray(rho0, dtype=complex)
    if rho.shape != (8, 8):
        raise DimensionMismatchError(f"FMO state must be 8x8, got {rho.shape}")
    pops = np.empty((steps + 1, 5))
    traces = np.empty(steps + 1)
    for t in range(steps + 1):
        pops[t] = [rho[s, s].real for s in range(5)]
        traces[t] = np.trace(rho).real
        if t < steps:
            rho = apply_channel(kset, rho)
    times = np.arange(steps + 1) * params.dt
    return Trajectory(times_fs=times, populations=pops, traces=traces)


# --- Kraus JSON interchange -------------------------------------------------
#
# {"dim": d, "operators": [m matrices, each d x d of [re, im] pairs, row-major]}


def _matrix_to_pairs(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _pairs_to_matrix(rows, dim: int) -> np.ndarray:
    m = np.empty((dim, dim), dtype=complex)
    for i, row in enumerate(rows):
        for j, (re, im) in enumerate(row):
            m[i, j] = complex(re, im)
    return m


def kraus_to_json_dict(kset: KrausSet) -> dict:
    return {
        "dim": kset.dim,
        "operators": [_matrix_to_pairs(m) for m in kset.operators],
    }


def kraus_from_json_dict(data: dict, validate: bool = True, tol: float = 1e-9) -> KrausSet:
    """Parse the Kraus JSON object; rejects non-CPTP input unless ``validate=False``."""
    try:
        dim = int(data["dim"])
        raw = data["operators"]
        mats = [_pairs_to_matrix(rows, dim) for rows in raw]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ChannelError(f"malformed Kraus JSON: {exc}") from exc
    if validate:
        return validate_cptp(mats, tol=tol)
    if not mats:
        raise DimensionMismatchError("a Kraus set needs at least one operator")
    if not is_power_of_two(dim):
        raise NotPowerOfTwoError(f"dimension {dim} is not a power of two")
    total = sum(dagger(m) @ m for m in mats)
    dev = max_abs(total - np.eye(dim))
    return KrausSet(
        operators=tuple(mats),
        dim=dim,
        num_qubits=int(math.log2(dim)),
        deviation=dev,
    )
