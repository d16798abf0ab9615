"""Dense density-matrix engine and end-to-end channel verification.

The engine applies gates in order as ``U rho U^dag``, projects and
renormalizes on POSTSELECT (recording the branch probability), and reduces
on TRACE_OUT. The state is kept as a product of independent density
factors: qubits materialize lazily on first use as fresh factors, factors
merge only when a gate spans them, and traced qubits leave their factor
immediately. A mixing tree over many branch registers therefore only ever
densifies one merge's worth of state (two registers plus their ancillas)
no matter how the gates are ordered.

Global basis convention: qubit 0 is the least significant bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import KrausSet, apply_channel
from .circuit import Circuit, Gate, assemble_simulation_circuit
from .linalg import DimensionMismatchError, dagger, max_abs

ZERO_BRANCH_CUTOFF = 1e-14


class SimulationError(Exception):
    pass


class ZeroProbabilityBranch(SimulationError):
    pass


class EquivalenceFailure(SimulationError):
    pass


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_T = np.diag([1.0, np.exp(1j * np.pi / 4)]).astype(complex)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def _single_qubit_matrix(g: Gate) -> np.ndarray:
    if g.kind == "H":
        return _H
    if g.kind == "T":
        return _T
    if g.kind == "TDG":
        return _T.conj().T
    if g.kind == "RZ":
        return np.diag([np.exp(-0.5j * g.theta), np.exp(0.5j * g.theta)])
    if g.kind == "RY":
        c, s = math.cos(g.theta / 2), math.sin(g.theta / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    raise SimulationError(f"not a single-qubit gate: {g.kind}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense state of a qubit register; Hermitian, PSD, trace one."""

    matrix: np.ndarray
    num_qubits: int

    @classmethod
    def from_pure(cls, amplitudes) -> "DensityMatrix":
        psi = np.asarray(amplitudes, dtype=complex).ravel()
        n = int(math.log2(len(psi)))
        if 2**n != len(psi):
            raise DimensionMismatchError("amplitude count must be a power of two")
        psi = psi / np.linalg.norm(psi)
        return cls(matrix=np.outer(psi, psi.conj()), num_qubits=n)

    @classmethod
    def from_matrix(cls, matrix) -> "DensityMatrix":
        m = np.asarray(matrix, dtype=complex)
        n = int(math.log2(m.shape[0])) if m.size else 0
        if m.shape != (2**n, 2**n):
            raise DimensionMismatchError(f"bad density matrix shape {m.shape}")
        return cls(matrix=m, num_qubits=n)

    def validate(self, tol: float = 1e-10) -> "DensityMatrix":
        if max_abs(self.matrix - dagger(self.matrix)) > tol:
            raise SimulationError("density matrix is not Hermitian")
        if abs(np.trace(self.matrix) - 1.0) > tol:
            raise SimulationError("density matrix trace differs from one")
        if np.linalg.eigvalsh(self.matrix).min() < -1e-9:
            raise SimulationError("density matrix has a negative eigenvalue")
        return self


def _coerce_state(state, expected_qubits: int | None = None) -> np.ndarray:
    if isinstance(state, DensityMatrix):
        m = state.matrix
    else:
        arr = np.asarray(state, dtype=complex)
        m = np.outer(arr, arr.conj()) if arr.ndim == 1 else arr
    if expected_qubits is not None and m.shape != (2**expected_qubits,) * 2:
        raise DimensionMismatchError(
            f"input state has shape {m.shape}, expected dimension {2**expected_qubits}"
        )
    return m


class _Factor:
    """One independent tensor factor: a density tensor over its wires.

    ``wires[i]`` is the circuit qubit at tensor axis ``i`` (row axes first,
    then the matching column axes). Axis 0 is the most significant bit.
    """

    def __init__(self, wires: list[int], matrix: np.ndarray):
        self.wires = wires
        k = len(wires)
        self.rho = np.asarray(matrix, dtype=complex).reshape((2,) * (2 * k))

    @property
    def k(self) -> int:
        return len(self.wires)

    def flat(self) -> np.ndarray:
        dim = 2**self.k
        return self.rho.reshape(dim, dim)

    def merge(self, other: "_Factor") -> "_Factor":
        # kron keeps (rowsA, rowsB, colsA, colsB) = wire order A then B
        joined = np.kron(self.flat(), other.flat())
        return _Factor(self.wires + other.wires, joined)

    def apply_matrix(self, u: np.ndarray, qubits) -> None:
        pos = [self.wires.index(q) for q in qubits]
        g = len(pos)
        k = self.k
        ut = np.asarray(u, dtype=complex).reshape((2,) * (2 * g))
        rho = np.tensordot(ut, self.rho, axes=(list(range(g, 2 * g)), pos))
        rho = np.moveaxis(rho, range(g), pos)
        cols = [k + p for p in pos]
        rho = np.tensordot(ut.conj(), rho, axes=(list(range(g, 2 * g)), cols))
        self.rho = np.moveaxis(rho, range(g), cols)

    def apply_permutation(self, block_perm: np.ndarray, qubits) -> None:
        """Apply a basis permutation specified on the listed qubit block."""
        pos = [self.wires.index(q) for q in qubits]
        k = self.k
        dim = 2**k
        g = len(pos)
        shifts = [k - 1 - p for p in pos]  # bit position of each listed qubit
        full = np.arange(dim)
        block_bits = np.zeros(dim, dtype=np.int64)
        for j, s in enumerate(shifts):
            block_bits |= ((full >> s) & 1) << (g - 1 - j)
        target = block_perm[block_bits]
        out = full.copy()
        for j, s in enumerate(shifts):
            bit = (target >> (g - 1 - j)) & 1
            out = (out & ~(1 << s)) | (bit << s)
        inv = np.empty(dim, dtype=np.int64)
        inv[out] = full
        self.rho = self.flat()[np.ix_(inv, inv)].reshape((2,) * (2 * k))

    def postselect(self, qubit: int, outcome: int) -> float:
        pos = self.wires.index(qubit)
        k = self.k
        total = float(np.trace(self.flat()).real)
        idx = [slice(None)] * (2 * k)
        idx[pos] = outcome
        idx[k + pos] = outcome
        sub = self.rho[tuple(idx)]
        self.wires.pop(pos)
        self.rho = sub
        kept = float(np.trace(self.flat()).real)
        p = kept / total if total > 0 else 0.0
        if p < ZERO_BRANCH_CUTOFF:
            raise ZeroProbabilityBranch(
                f"post-selecting qubit {qubit} on {outcome} has probability {p:.3e}"
            )
        self.rho = self.rho / p
        return p

    def trace_out(self, qubit: int) -> None:
        pos = self.wires.index(qubit)
        self.rho = np.trace(self.rho, axis1=pos, axis2=self.k + pos)
        self.wires.pop(pos)


class _Engine:
    """Product of independent factors plus post-selection bookkeeping."""

    def __init__(self, max_qubits: int):
        self.max_qubits = max_qubits
        self.factors: list[_Factor] = []
        self.success_prob = 1.0

    def live_wires(self) -> set[int]:
        return {q for f in self.factors for q in f.wires}

    def materialize(self, qubits, states: dict, input_lookup: dict) -> None:
        live = self.live_wires()
        for q in qubits:
            if q in live:
                continue
            if q in input_lookup:
                reg = input_lookup[q]
                wires = [w for w in reversed(reg)]  # ascending register = LSB last
                self.factors.append(_Factor(wires, states[reg]))
                live.update(reg)
            else:
                zero = np.zeros((2, 2), dtype=complex)
                zero[0, 0] = 1.0
                self.factors.append(_Factor([q], zero))
                live.add(q)

    def factor_for(self, qubits) -> _Factor:
        """Factor containing all the qubits, merging factors as needed."""
        touching = []
        rest = []
        qset = set(qubits)
        for f in self.factors:
            (touching if qset & set(f.wires) else rest).append(f)
        if not touching:
            raise SimulationError(f"qubits {qubits} are not live")
        merged = touching[0]
        for f in touching[1:]:
            merged = merged.merge(f)
        if merged.k > self.max_qubits:
            raise SimulationError(
                f"merging factors would exceed {self.max_qubits} live qubits"
            )
        self.factors = rest + [merged]
        return merged

    def drop_empty(self) -> None:
        self.factors = [f for f in self.factors if f.k > 0]

    def final_state(self) -> np.ndarray:
        if not self.factors:
            return np.ones((1, 1), dtype=complex)
        merged = self.factors[0]
        for f in self.factors[1:]:
            merged = merged.merge(f)
        order = np.argsort(merged.wires)[::-1]  # descending id = MSB first
        k = merged.k
        perm = [int(i) for i in order] + [k + int(i) for i in order]
        rho = np.transpose(merged.rho, perm)
        dim = 2**k
        return rho.reshape(dim, dim)


def _multi_target_perm(g: Gate) -> np.ndarray:
    """Basis permutation of the gate block (control bit is the block MSB)."""
    n_t = g.n_targets
    width = 1 + 2 * n_t
    dim = 2**width
    ctrl_mask = 1 << (width - 1)
    out = np.empty(dim, dtype=np.int64)
    for i in range(dim):
        j = i
        if i & ctrl_mask:
            for idx in range(n_t):
                sa = width - 2 - idx
                sb = width - 2 - n_t - idx
                if ((j >> sa) & 1) != ((j >> sb) & 1):
                    j ^= (1 << sa) | (1 << sb)
        out[i] = j
    return out


def run(
    circuit: Circuit,
    rho_in,
    *,
    max_qubits: int = 16,
) -> tuple[DensityMatrix, float]:
    """Execute a circuit on the given input state(s).

    ``rho_in`` is a density matrix, pure-state amplitude vector, or
    :class:`DensityMatrix` broadcast to every input register of the
    circuit; a sequence of such states assigns them register by register.
    Returns the reduced state over the surviving qubits (ascending index)
    and the product of post-selection probabilities (1.0 when there are
    none).
    """
    regs = circuit.input_registers
    if isinstance(rho_in, (list, tuple)):
        if len(rho_in) != len(regs):
            raise DimensionMismatchError(
                f"{len(rho_in)} input states for {len(regs)} input registers"
            )
        states = {reg: _coerce_state(s, len(reg)) for reg, s in zip(regs, rho_in)}
    else:
        states = {reg: _coerce_state(rho_in, len(reg)) for reg in regs}
    input_lookup = {q: reg for reg in regs for q in reg}

    # last position at which each qubit is touched by a non-marker gate,
    # and the set of qubits some TRACE_OUT will eventually discard
    last_touch: dict[int, int] = {}
    traced_later: set[int] = set()
    for i, g in enumerate(circuit.gates):
        if g.kind == "TRACE_OUT":
            traced_later.update(g.qubits)
        else:
            for q in g.qubits:
                last_touch[q] = i

    eng = _Engine(max_qubits=max_qubits)
    for i, g in enumerate(circuit.gates):
        if g.kind == "TRACE_OUT":
            live = eng.live_wires()
            for q in g.qubits:
                if q in live:
                    eng.factor_for((q,)).trace_out(q)
            eng.drop_empty()
            continue
        eng.materialize(g.qubits, states, input_lookup)
        if g.kind == "POSTSELECT":
            f = eng.factor_for(g.qubits)
            eng.success_prob *= f.postselect(g.qubits[0], g.outcome)
        elif g.kind == "CNOT":
            eng.factor_for(g.qubits).apply_matrix(_CNOT, g.qubits)
        elif g.kind in ("H", "T", "TDG", "RZ", "RY"):
            eng.factor_for(g.qubits).apply_matrix(_single_qubit_matrix(g), g.qubits)
        elif g.kind == "OPAQUE_UNITARY":
            try:
                mat = circuit.matrices[g.matrix_id]
            except KeyError:
                raise SimulationError(f"missing matrix for block {g.matrix_id!r}")
            eng.factor_for(g.qubits).apply_matrix(mat, g.qubits)
        elif g.kind == "MULTI_TARGET_CSWAP":
            eng.factor_for(g.qubits).apply_permutation(_multi_target_perm(g), g.qubits)
        else:
            raise SimulationError(f"cannot simulate gate kind {g.kind!r}")
        # eager reduction: discard qubits whose last gate just ran
        live = eng.live_wires()
        for q in g.qubits:
            if q in traced_later and last_touch.get(q) == i and q in live:
                eng.factor_for((q,)).trace_out(q)
        eng.drop_empty()

    # untouched input registers (e.g. the empty circuit) pass through
    live = eng.live_wires()
    for reg in regs:
        if any(q in live or q in traced_later or q in last_touch for q in reg):
            continue
        eng.factors.append(_Factor([w for w in reversed(reg)], states[reg]))
        live.update(reg)

    out = eng.final_state()
    return DensityMatrix.from_matrix(out), eng.success_prob


@dataclass(frozen=True)
class EquivalenceReport:
    """Worst-case residuals of a circuit-vs-oracle verification run."""

    method: str
    group_size: int
    ancilla_mode: str
    trials: int
    expected_probability: float
    worst_residual: float
    worst_probability_error: float


def verify_equivalence(
    kset: KrausSet,
    method: str,
    group_size: int = 1,
    mode: str = "shared",
    trials: int = 5,
    tol: float = 1e-9,
    seed: int = 0,
    max_qubits: int = 16,
) -> EquivalenceReport:
    """Check the synthesized circuit against the dense channel oracle.

    Runs ``trials`` alternating random pure and mixed inputs through the
    assembled circuit and compares with ``apply_channel``; also checks the
    measured post-selection probability against group_size / m (exactly 1
    for the deterministic route). Raises :class:`EquivalenceFailure`
    carrying the offending seed when any residual exceeds the tolerances.
    """
    circ = assemble_simulation_circuit(kset, method, group_size=group_size, mode=mode)
    d = kset.dim
    if method == "stinespring":
        expected_p = 1.0
    else:
        expected_p = group_size / kset.num_operators
    worst_res = 0.0
    worst_perr = 0.0
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        if trial % 2 == 0:
            psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            rho = np.outer(psi, psi.conj()) / np.linalg.norm(psi) ** 2
        else:
            g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
            rho = g @ dagger(g)
            rho = rho / np.trace(rho)
        want = apply_channel(kset, rho)
        got, p = run(circ, rho, max_qubits=max_qubits)
        res = max_abs(got.matrix - want)
        perr = abs(p - expected_p)
        worst_res = max(worst_res, res)
        worst_perr = max(worst_perr, perr)
        if res > tol or perr > 1e-12:
            raise EquivalenceFailure(
                f"{method} l={group_size} {mode}: trial {trial} (seed {seed}) "
                f"residual {res:.3e} probability error {perr:.3e}"
            )
    return EquivalenceReport(
        method=method,
        group_size=group_size,
        ancilla_mode=mode,
        trials=trials,
        expected_probability=expected_p,
        worst_residual=worst_res,
        worst_probability_error=worst_perr,
    )
