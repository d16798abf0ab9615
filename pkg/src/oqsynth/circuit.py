"""Gate-level circuit IR with weighted cost accounting.

Gates are elementary (H, T, TDG, RZ, RY, CNOT), opaque unitary blocks
carrying annotated depth/CNOT weights, logical multi-target CSWAPs with
exact matrix semantics, and the terminal markers POSTSELECT / TRACE_OUT.
Depth is the weighted layered depth under as-soon-as-possible scheduling:
gates on disjoint qubits share a layer and each gate contributes its depth
weight.

Basis conventions: globally, qubit 0 is the least significant bit of the
computational basis index. Within a single gate, ``Gate.qubits`` lists the
gate's wires most-significant first, matching the row/column order of its
matrix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import costmodel
from .channel import KrausSet, NotPowerOfTwoError, group_kraus
from .dilation import stinespring_isometry, svd_dilation, sznagy_unitary

ELEMENTARY = ("H", "T", "TDG", "RZ", "RY", "CNOT")
MARKERS = ("POSTSELECT", "TRACE_OUT")
GATE_KINDS = ELEMENTARY + ("OPAQUE_UNITARY", "MULTI_TARGET_CSWAP") + MARKERS


class CircuitError(Exception):
    pass


class QubitCollisionError(CircuitError):
    pass


class MissingAncillasError(CircuitError):
    pass


class UnsupportedGateError(CircuitError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    theta: float | None = None
    matrix_id: str | None = None
    outcome: int | None = None
    n_targets: int | None = None
    depth_weight: float = 1.0
    cnot_weight: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise UnsupportedGateError(f"unknown gate kind {self.kind!r}")
        if len(set(self.qubits)) != len(self.qubits):
            raise QubitCollisionError(f"repeated qubit in {self.kind} {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError("negative qubit index")
        if self.kind in ("RZ", "RY") and self.theta is None:
            raise CircuitError(f"{self.kind} needs a rotation angle")


def h(q: int) -> Gate:
    return Gate("H", (q,))


def t(q: int) -> Gate:
    return Gate("T", (q,))


def tdg(q: int) -> Gate:
    return Gate("TDG", (q,))


def rz(q: int, theta: float) -> Gate:
    return Gate("RZ", (q,), theta=theta)


def ry(q: int, theta: float) -> Gate:
    return Gate("RY", (q,), theta=theta)


def cnot(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target), cnot_weight=1.0)


def opaque_unitary(
    qubits, matrix_id: str, depth_weight: float, cnot_weight: float
) -> Gate:
    if depth_weight < 1.0:
        raise CircuitError("opaque depth weight must be >= 1")
    return Gate(
        "OPAQUE_UNITARY",
        tuple(qubits),
        matrix_id=matrix_id,
        depth_weight=depth_weight,
        cnot_weight=cnot_weight,
    )


def multi_target_cswap_gate(control: int, pairs) -> Gate:
    """Logical shared-control multi-target CSWAP (exact matrix semantics)."""
    pairs = [tuple(p) for p in pairs]
    n_t = len(pairs)
    qubits = (control,) + tuple(a for a, _ in pairs) + tuple(b for _, b in pairs)
    return Gate(
        "MULTI_TARGET_CSWAP",
        qubits,
        n_targets=n_t,
        depth_weight=costmodel.multi_target_cswap_depth(n_t),
        cnot_weight=costmodel.multi_target_cswap_cnots(n_t),
    )


def postselect(q: int, outcome: int) -> Gate:
    if outcome not in (0, 1):
        raise CircuitError("post-selection outcome must be 0 or 1")
    return Gate("POSTSELECT", (q,), outcome=outcome, depth_weight=0.0)


def trace_out(qubits) -> Gate:
    return Gate("TRACE_OUT", tuple(qubits), depth_weight=0.0)


@dataclass
class Circuit:
    """Ordered gate sequence over a fixed register layout.

    ``registers`` names qubit groups (system, dilation ancilla, mixer
    ancillas, grouping ancillas); ``input_registers`` lists the register
    groups that receive a copy of the simulator's input state. Treat
    constructed circuits as immutable.
    """

    num_qubits: int
    gates: list[Gate] = field(default_factory=list)
    registers: dict[str, tuple[int, ...]] = field(default_factory=dict)
    input_registers: tuple[tuple[int, ...], ...] = ()
    matrices: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, gate: Gate) -> None:
        if gate.qubits and max(gate.qubits) >= self.num_qubits:
            raise CircuitError(
                f"gate {gate.kind} touches qubit {max(gate.qubits)} "
                f"outside register of {self.num_qubits}"
            )
        self.gates.append(gate)

    def extend(self, gates) -> None:
        for g in gates:
            self.add(g)

    def add_matrix(self, matrix_id: str, matrix: np.ndarray) -> None:
        self.matrices[matrix_id] = np.asarray(matrix, dtype=complex)

    def depth(self) -> float:
        """Weighted layered depth: per-qubit busy time under ASAP scheduling."""
        busy = [0.0] * self.num_qubits
        for g in self.gates:
            if g.depth_weight == 0.0 or not g.qubits:
                continue
            start = max(busy[q] for q in g.qubits)
            for q in g.qubits:
                busy[q] = start + g.depth_weight
        return max(busy, default=0.0)

    def cnot_count(self) -> float:
        return sum(g.cnot_weight for g in self.gates)

    def count_kind(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)


# --- elementary controlled-SWAP ---------------------------------------------
#
# Nine CNOTs at layered depth 14 with exactly three CNOTs touching the
# control. The inner section is a CNOT+T realization of the doubly
# controlled phase (T phases applied to the seven parity functions of the
# three wires), conjugated by Hadamards on the second target and by the
# outer CNOT pair that turns the doubly controlled NOT into a controlled
# SWAP. Only the three control CNOTs resist parallelization, which is what
# the multi-target extension exploits.


def cswap_elementary(control: int, a: int, b: int) -> list[Gate]:
    if len({control, a, b}) != 3:
        raise QubitCollisionError("controlled-SWAP needs three distinct qubits")
    c = control
    return [
        cnot(b, a),
        t(c),
        h(b),
        t(a),
        t(b),
        cnot(c, a),
        tdg(a),
        cnot(a, b),
        t(b),
        cnot(c, a),
        cnot(a, b),
        tdg(b),
        cnot(c, b),
        cnot(b, a),
        tdg(a),
        cnot(b, a),
        h(b),
        cnot(b, a),
    ]


def multi_target_cswap(
    control: int, pairs, mode: str = "shared", ancillas=()
) -> list[Gate]:
    """Swap ``pairs`` of qubits under one control.

    shared mode emits a single logical gate of depth weight
    6*ceil(log2(n_t)) + 14; fanout mode copies the (already prepared)
    control onto fresh ancillas with a CNOT tree and runs one elementary
    CSWAP per pair in parallel, each of depth 14. A single pair lowers to
    the elementary decomposition in either mode. Neither mode prepares the
    control superposition itself.
    """
    pairs = [tuple(p) for p in pairs]
    n_t = len(pairs)
    if n_t == 0:
        return []
    flat = [control] + [q for p in pairs for q in p]
    if len(set(flat)) != len(flat):
        raise QubitCollisionError(f"qubits overlap in multi-target CSWAP: {flat}")
    if n_t == 1:
        return cswap_elementary(control, pairs[0][0], pairs[0][1])
    if mode == "shared":
        return [multi_target_cswap_gate(control, pairs)]
    if mode != "fanout":
        raise CircuitError(f"unknown ancilla mode {mode!r}")
    ancillas = tuple(ancillas)
    if len(ancillas) < n_t - 1:
        raise MissingAncillasError(
            f"fanout over {n_t} pairs needs {n_t - 1} fresh ancillas, got {len(ancillas)}"
        )
    chain = [control] + list(ancillas[: n_t - 1])
    if len(set(chain + flat[1:])) != len(chain) + len(flat) - 1:
        raise QubitCollisionError("fanout ancillas overlap the target pairs")
    gates: list[Gate] = []
    # doubling tree: after round r the first 2**r chain qubits are entangled
    filled = 1
    while filled < n_t:
        for i in range(min(filled, n_t - filled)):
            gates.append(cnot(chain[i], chain[filled + i]))
        filled *= 2
    for ctrl, (qa, qb) in zip(chain, pairs):
        gates.extend(cswap_elementary(ctrl, qa, qb))
    return gates


def build_mixer(
    num_states: int,
    state_width: int,
    mode: str = "shared",
    weights=None,
) -> Circuit:
    """Binary-tree CSWAP mixer over ``num_states`` registers.

    Registers of ``state_width`` qubits are combined pairwise at doubling
    strides; after tracing out every other register and all ancillas,
    register 0 holds the weighted mixture of the inputs. ``weights``
    defaults to uniform, in which case controls are prepared with H;
    otherwise each merge control gets an RY angle matching the relative
    subtree weights.
    """
    n_states = num_states
    q = state_width
    if n_states < 1 or (n_states & (n_states - 1)) != 0:
        raise NotPowerOfTwoError(f"number of states {n_states} is not a power of two")
    if q < 1:
        raise CircuitError("state width must be at least one qubit")
    if weights is None:
        w = [1.0] * n_states
        uniform = True
    else:
        w = [float(x) for x in weights]
        if len(w) != n_states or any(x < 0 for x in w) or sum(w) <= 0:
            raise CircuitError("weights must be a non-negative vector per state")
        uniform = len(set(w)) == 1

    regs = {f"reg{i}": tuple(range(i * q, (i + 1) * q)) for i in range(n_states)}
    anc_per_merge = 1 if mode == "shared" else q
    merges = n_states - 1
    num_anc = anc_per_merge * merges
    circ = Circuit(
        num_qubits=n_states * q + num_anc,
        registers={**regs, "mixer_anc": tuple(range(n_states * q, n_states * q + num_anc))},
        input_registers=tuple(regs[f"reg{i}"] for i in range(n_states)),
    )
    if n_states == 1:
        return circ

    next_anc = n_states * q
    subtree = list(w)
    layers = int(math.log2(n_states))
    for j in range(1, layers + 1):
        stride = 2 ** (j - 1)
        for i in range(0, n_states, 2**j):
            k = i + stride
            wi, wk = subtree[i], subtree[k]
            control = next_anc
            extra = tuple(range(next_anc + 1, next_anc + anc_per_merge))
            next_anc += anc_per_merge
            keep_amp = math.sqrt(wi / (wi + wk)) if wi + wk > 0 else 1.0
            if uniform:
                circ.add(h(control))
            else:
                circ.add(ry(control, 2 * math.acos(min(1.0, keep_amp))))
            pairs = list(zip(regs[f"reg{i}"], regs[f"reg{k}"]))
            if mode == "shared":
                # atomic logical gate keeps each layer at exactly one weight
                circ.add(multi_target_cswap_gate(control, pairs))
            else:
                circ.extend(
                    multi_target_cswap(control, pairs, mode=mode, ancillas=extra)
                )
            subtree[i] = wi + wk
    traced = [qb for i in range(1, n_states) for qb in regs[f"reg{i}"]]
    traced += list(range(n_states * q, n_states * q + num_anc))
    circ.add(trace_out(traced))
    return circ


# --- full pipeline assembly ---------------------------------------------------


def _branch_qubits(base: int, n: int, g: int):
    """(system, grouping, dilation) wire tuples of one branch register."""
    system = tuple(range(base, base + n))
    grouping = tuple(range(base + n, base + n + g))
    dil = base + n + g
    return system, grouping, dil


def assemble_simulation_circuit(
    kset: KrausSet,
    method: str,
    group_size: int = 1,
    mode: str = "shared",
) -> Circuit:
    """Lower a Kraus set to a full simulation circuit.

    stinespring: one opaque isometry block on system plus environment
    qubits, environment traced out, success probability 1.

    sznagy / svd: the operators are grouped, each expanded operator except
    the final identity block (which annihilates the embedded input exactly)
    is dilated into an opaque branch on n + log2(group_size) + 1 qubits, the
    branches are combined by the mixer, the dilation ancilla of register 0
    is post-selected on 0 and everything else is traced out. The reported
    success probability is group_size / m.
    """
    if method not in costmodel.METHODS:
        raise CircuitError(f"unknown method {method!r}")
    n = kset.num_qubits
    m = kset.num_operators

    if method == "stinespring":
        art = stinespring_isometry(kset, complete=True)
        k = art.ancilla_qubits
        cost = costmodel.dilation_cost("stinespring", n, m=m)
        system = tuple(range(n))
        env = tuple(range(n, n + k))
        circ = Circuit(
            num_qubits=n + k,
            registers={"system": system, "environment": env},
            input_registers=(system,),
        )
        mid = "stinespring_unitary"
        circ.add_matrix(mid, art.matrices["unitary"])
        # qubit listing is MSB-first: environment block index is most significant
        circ.add(
            opaque_unitary(
                tuple(reversed(env)) + tuple(reversed(system)),
                mid,
                depth_weight=cost.depth,
                cnot_weight=cost.cnot,
            )
        )
        if env:
            circ.add(trace_out(env))
        return circ

    if (m & (m - 1)) != 0:
        raise NotPowerOfTwoError(
            f"m = {m} is not a power of two; pad the set with zero operators first"
        )
    grouped = group_kraus(kset, group_size)
    g = int(math.log2(group_size))
    q = n + g + 1
    branches = grouped.branch_operators
    b_count = len(branches)
    cost = costmodel.dilation_cost(method, n, group_size=group_size)

    anc_per_merge = 1 if mode == "shared" else q
    num_anc = anc_per_merge * (b_count - 1)
    registers: dict[str, tuple[int, ...]] = {}
    input_regs = []
    for i in range(b_count):
        system, grouping, dil = _branch_qubits(i * q, n, g)
        registers[f"branch{i}_system"] = system
        if grouping:
            registers[f"branch{i}_grouping"] = grouping
        registers[f"branch{i}_dilation"] = (dil,)
        input_regs.append(system)
    registers["mixer_anc"] = tuple(range(b_count * q, b_count * q + num_anc))
    circ = Circuit(
        num_qubits=b_count * q + num_anc,
        registers=registers,
        input_registers=tuple(input_regs),
    )

    for i, op in enumerate(branches):
        system, grouping, dil = _branch_qubits(i * q, n, g)
        expanded = tuple(reversed(grouping)) + tuple(reversed(system))
        if method == "sznagy":
            art = sznagy_unitary(op, source_index=i)
            mid = f"branch{i}_sznagy"
            circ.add_matrix(mid, art.matrices["unitary"])
            circ.add(
                opaque_unitary(
                    (dil,) + expanded, mid, depth_weight=cost.depth, cnot_weight=cost.cnot
                )
            )
        else:
            art = svd_dilation(op, source_index=i)
            half_cnot, half_depth = costmodel.svd_unitary_block(grouped.expanded_dim)
            mid_v = f"branch{i}_vdag"
            mid_s = f"branch{i}_usigma"
            mid_u = f"branch{i}_u"
            circ.add_matrix(mid_v, art.matrices["vdag"])
            circ.add_matrix(mid_s, art.matrices["u_sigma"])
            circ.add_matrix(mid_u, art.matrices["u"])
            circ.add(
                opaque_unitary(
                    expanded, mid_v, depth_weight=half_depth, cnot_weight=half_cnot
                )
            )
            circ.add(h(dil))
            circ.add(
                opaque_unitary(
                    (dil,) + expanded,
                    mid_s,
                    depth_weight=cost.diag_gates,
                    cnot_weight=0.0,
                )
            )
            circ.add(h(dil))
            circ.add(
                opaque_unitary(
                    expanded, mid_u, depth_weight=half_depth, cnot_weight=half_cnot
                )
            )

    if b_count > 1:
        next_anc = b_count * q
        layers = int(math.log2(b_count))
        reg_wires = [tuple(range(i * q, (i + 1) * q)) for i in range(b_count)]
        for j in range(1, layers + 1):
            stride = 2 ** (j - 1)
            for i in range(0, b_count, 2**j):
                k = i + stride
                control = next_anc
                extra = tuple(range(next_anc + 1, next_anc + anc_per_merge))
                next_anc += anc_per_merge
                circ.add(h(control))
                pairs = list(zip(reg_wires[i], reg_wires[k]))
                if mode == "shared":
                    circ.add(multi_target_cswap_gate(control, pairs))
                else:
                    circ.extend(
                        multi_target_cswap(control, pairs, mode=mode, ancillas=extra)
                    )

    system0, grouping0, dil0 = _branch_qubits(0, n, g)
    circ.add(postselect(dil0, 0))
    traced = list(grouping0)
    for i in range(1, b_count):
        traced.extend(range(i * q, (i + 1) * q))
    traced.extend(range(b_count * q, b_count * q + num_anc))
    if traced:
        circ.add(trace_out(traced))
    return circ


# --- serialization -----------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def export_circuit(circ: Circuit, fmt: str = "native-text") -> str:
    """Serialize a circuit; deterministic gate-per-line text formats.

    ``native-text`` round-trips through :func:`parse_circuit` (opaque
    matrices travel in the JSON sidecar, see :func:`opaque_sidecar`).
    ``qasm-elementary`` emits OPENQASM 2.0 with opaque declarations for
    unitary blocks; logical multi-target CSWAPs are not expressible there.
    """
    if fmt == "native-text":
        return _export_native(circ)
    if fmt == "qasm-elementary":
        return _export_qasm(circ)
    raise UnsupportedGateError(f"unknown export format {fmt!r}")


def _gate_line(g: Gate) -> str:
    parts = ["GATE", g.kind] + [f"q{q}" for q in g.qubits]
    if g.theta is not None:
        parts.append(f"theta={_fmt(g.theta)}")
    notes = []
    if g.matrix_id is not None:
        notes.append(f"id={g.matrix_id}")
    if g.outcome is not None:
        notes.append(f"outcome={g.outcome}")
    if g.n_targets is not None:
        notes.append(f"n_targets={g.n_targets}")
    if g.kind == "OPAQUE_UNITARY" or g.kind == "MULTI_TARGET_CSWAP":
        notes.append(f"depth_weight={_fmt(g.depth_weight)}")
        notes.append(f"cnot_weight={_fmt(g.cnot_weight)}")
    line = " ".join(parts)
    if notes:
        line += " # " + ",".join(notes)
    return line


def _export_native(circ: Circuit) -> str:
    lines = [f"CIRCUIT num_qubits={circ.num_qubits}"]
    for name in sorted(circ.registers):
        qs = " ".join(f"q{q}" for q in circ.registers[name])
        lines.append(f"REGISTER {name} {qs}".rstrip())
    for reg in circ.input_registers:
        lines.append("INPUT " + " ".join(f"q{q}" for q in reg))
    lines.extend(_gate_line(g) for g in circ.gates)
    return "\n".join(lines) + "\n"


def parse_circuit(text: str, matrices: dict[str, np.ndarray] | None = None) -> Circuit:
    """Parse native-text back into a Circuit (inverse of the exporter)."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("CIRCUIT "):
        raise CircuitError("native-text must start with a CIRCUIT header")
    num_qubits = int(lines[0].split("num_qubits=")[1])
    circ = Circuit(num_qubits=num_qubits)
    registers: dict[str, tuple[int, ...]] = {}
    inputs: list[tuple[int, ...]] = []
    for ln in lines[1:]:
        tokens = ln.split()
        if tokens[0] == "REGISTER":
            registers[tokens[1]] = tuple(int(s[1:]) for s in tokens[2:])
            continue
        if tokens[0] == "INPUT":
            inputs.append(tuple(int(s[1:]) for s in tokens[1:]))
            continue
        if tokens[0] != "GATE":
            raise CircuitError(f"unrecognized line: {ln}")
        body, _, note = ln.partition(" # ")
        tokens = body.split()
        kind = tokens[1]
        qubits = []
        theta = None
        for tok in tokens[2:]:
            if tok.startswith("q"):
                qubits.append(int(tok[1:]))
            elif tok.startswith("theta="):
                theta = float(tok.split("=", 1)[1])
        meta = dict(kv.split("=", 1) for kv in note.split(",")) if note else {}
        qubits = tuple(qubits)
        if kind in ("H", "T", "TDG"):
            circ.add(Gate(kind, qubits))
        elif kind in ("RZ", "RY"):
            circ.add(Gate(kind, qubits, theta=theta))
        elif kind == "CNOT":
            circ.add(cnot(qubits[0], qubits[1]))
        elif kind == "OPAQUE_UNITARY":
            circ.add(
                opaque_unitary(
                    qubits,
                    meta["id"],
                    depth_weight=float(meta["depth_weight"]),
                    cnot_weight=float(meta["cnot_weight"]),
                )
            )
        elif kind == "MULTI_TARGET_CSWAP":
            n_t = int(meta["n_targets"])
            pairs = list(zip(qubits[1 : 1 + n_t], qubits[1 + n_t :]))
            circ.add(multi_target_cswap_gate(qubits[0], pairs))
        elif kind == "POSTSELECT":
            circ.add(postselect(qubits[0], int(meta["outcome"])))
        elif kind == "TRACE_OUT":
            circ.add(trace_out(qubits))
        else:
            raise UnsupportedGateError(f"unknown gate kind {kind!r}")
    circ.registers = registers
    circ.input_registers = tuple(inputs)
    if matrices:
        circ.matrices = {k: np.asarray(v, dtype=complex) for k, v in matrices.items()}
    return circ


def opaque_sidecar(circ: Circuit) -> str:
    """JSON sidecar mapping matrix ids to [re, im]-pair matrices."""
    payload = {
        mid: [[[float(z.real), float(z.imag)] for z in row] for row in mat]
        for mid, mat in sorted(circ.matrices.items())
    }
    return json.dumps(payload, indent=1)


def parse_sidecar(text: str) -> dict[str, np.ndarray]:
    raw = json.loads(text)
    out = {}
    for mid, rows in raw.items():
        dim = len(rows)
        m = np.empty((dim, len(rows[0])), dtype=complex)
        for i, row in enumerate(rows):
            for j, (re, im) in enumerate(row):
                m[i, j] = complex(re, im)
        out[mid] = m
    return out


_QASM_NAMES = {"H": "h", "T": "t", "TDG": "tdg", "RZ": "rz", "RY": "ry", "CNOT": "cx"}


def _export_qasm(circ: Circuit) -> str:
    lines = ['OPENQASM 2.0;', 'include "qelib1.inc";', f"qreg q[{circ.num_qubits}];"]
    declared: set[str] = set()
    for g in circ.gates:
        if g.kind in _QASM_NAMES:
            name = _QASM_NAMES[g.kind]
            args = ",".join(f"q[{q}]" for q in g.qubits)
            if g.theta is not None:
                lines.append(f"{name}({_fmt(g.theta)}) {args};")
            else:
                lines.append(f"{name} {args};")
        elif g.kind == "OPAQUE_UNITARY":
            if g.matrix_id not in declared:
                declared.add(g.matrix_id)
                params = ",".join(f"a{i}" for i in range(len(g.qubits)))
                lines.insert(3, f"opaque {g.matrix_id} {params};")
            args = ",".join(f"q[{q}]" for q in g.qubits)
            lines.append(f"{g.matrix_id} {args};")
        elif g.kind == "POSTSELECT":
            lines.append(f"// postselect q[{g.qubits[0]}] -> {g.outcome}")
        elif g.kind == "TRACE_OUT":
            qs = ",".join(f"q[{q}]" for q in g.qubits)
            lines.append(f"// trace_out {qs}")
        else:
            raise UnsupportedGateError(
                f"{g.kind} has no elementary QASM form; lower it first (fanout mode)"
            )
    return "\n".join(lines) + "\n"
