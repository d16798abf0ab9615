import numpy as np
import pytest

from oqsynth import costmodel
from oqsynth.channel import NotPowerOfTwoError, random_kraus_set, validate_cptp
from oqsynth.circuit import (
    Circuit,
    CircuitError,
    MissingAncillasError,
    QubitCollisionError,
    UnsupportedGateError,
    assemble_simulation_circuit,
    build_mixer,
    cnot,
    cswap_elementary,
    export_circuit,
    h,
    multi_target_cswap,
    opaque_sidecar,
    opaque_unitary,
    parse_circuit,
    parse_sidecar,
    postselect,
    ry,
    rz,
    t,
    trace_out,
)
from oqsynth.linalg import max_abs

# --- independent dense oracle for small gate lists ---------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_T = np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex)
_SINGLES = {"H": _H, "T": _T, "TDG": _T.conj().T}


def gate_matrix(g, num_qubits):
    """Embed one gate into the full space; qubit 0 is the least significant bit."""
    dim = 2**num_qubits
    if g.kind in _SINGLES or g.kind in ("RZ", "RY"):
        if g.kind == "RZ":
            u1 = np.diag([np.exp(-0.5j * g.theta), np.exp(0.5j * g.theta)])
        elif g.kind == "RY":
            c, s = np.cos(g.theta / 2), np.sin(g.theta / 2)
            u1 = np.array([[c, -s], [s, c]], dtype=complex)
        else:
            u1 = _SINGLES[g.kind]
        q = g.qubits[0]
        out = np.eye(1, dtype=complex)
        for pos in reversed(range(num_qubits)):  # MSB = highest qubit id
            out = np.kron(out, u1 if pos == q else np.eye(2))
        return out
    if g.kind == "CNOT":
        c, tgt = g.qubits
        m = np.zeros((dim, dim), dtype=complex)
        for i in range(dim):
            j = i ^ (1 << tgt) if (i >> c) & 1 else i
            m[j, i] = 1
        return m
    if g.kind == "MULTI_TARGET_CSWAP":
        n_t = g.n_targets
        ctrl = g.qubits[0]
        pairs = list(zip(g.qubits[1 : 1 + n_t], g.qubits[1 + n_t :]))
        m = np.zeros((dim, dim), dtype=complex)
        for i in range(dim):
            j = i
            if (i >> ctrl) & 1:
                for a, b in pairs:
                    ba, bb = (j >> a) & 1, (j >> b) & 1
                    if ba != bb:
                        j ^= (1 << a) | (1 << b)
            m[j, i] = 1
        return m
    raise AssertionError(f"oracle cannot embed {g.kind}")


def sequence_matrix(gates, num_qubits):
    u = np.eye(2**num_qubits, dtype=complex)
    for g in gates:
        u = gate_matrix(g, num_qubits) @ u
    return u


def cswap_reference(ctrl, a, b, num_qubits):
    dim = 2**num_qubits
    m = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        j = i
        if (i >> ctrl) & 1:
            ba, bb = (i >> a) & 1, (i >> b) & 1
            if ba != bb:
                j = i ^ ((1 << a) | (1 << b))
        m[j, i] = 1
    return m


def circuit_of(gates, num_qubits):
    c = Circuit(num_qubits=num_qubits)
    c.extend(gates)
    return c


class TestDepthAndCounts:
    def test_single_gate(self):
        c = circuit_of([h(0)], 1)
        assert c.depth() == 1 and c.cnot_count() == 0

    def test_disjoint_gates_share_layer(self):
        c = circuit_of([h(0), h(1), cnot(2, 3)], 4)
        assert c.depth() == 1

    def test_serial_chain(self):
        c = circuit_of([cnot(0, 1), cnot(1, 2), cnot(2, 3)], 4)
        assert c.depth() == 3 and c.cnot_count() == 3

    def test_depth_invariant_under_in_layer_reorder(self):
        gates = [h(0), h(1), cnot(0, 1), h(0), h(1)]
        swapped = [h(1), h(0), cnot(0, 1), h(1), h(0)]
        assert circuit_of(gates, 2).depth() == circuit_of(swapped, 2).depth()

    def test_opaque_weights(self):
        g = opaque_unitary((1, 0), "blk", depth_weight=7.5, cnot_weight=30.0)
        c = circuit_of([g, h(0)], 2)
        assert c.depth() == 8.5
        assert c.cnot_count() == 30.0

    def test_markers_cost_nothing(self):
        c = circuit_of([h(0), postselect(0, 0), trace_out((1,))], 2)
        assert c.depth() == 1 and c.cnot_count() == 0

    def test_opaque_weight_floor(self):
        with pytest.raises(CircuitError):
            opaque_unitary((0,), "blk", depth_weight=0.5, cnot_weight=0)


class TestCswapElementary:
    def test_matrix_is_exact_cswap(self):
        gates = cswap_elementary(0, 1, 2)
        u = sequence_matrix(gates, 3)
        assert max_abs(u - cswap_reference(0, 1, 2, 3)) <= 1e-12

    def test_other_wirings(self):
        for ctrl, a, b in [(2, 0, 1), (1, 2, 0)]:
            u = sequence_matrix(cswap_elementary(ctrl, a, b), 3)
            assert max_abs(u - cswap_reference(ctrl, a, b, 3)) <= 1e-12

    def test_counts(self):
        gates = cswap_elementary(0, 1, 2)
        c = circuit_of(gates, 3)
        assert c.cnot_count() == 9
        assert c.depth() == 14

    def test_three_cnots_touch_control(self):
        gates = cswap_elementary(5, 1, 2)
        touching = [g for g in gates if g.kind == "CNOT" and 5 in g.qubits]
        assert len(touching) == 3
        assert all(g.qubits[0] == 5 for g in touching)

    def test_distinct_qubits_required(self):
        with pytest.raises(QubitCollisionError):
            cswap_elementary(0, 0, 1)


class TestMultiTargetCswap:
    def test_single_pair_lowers_to_elementary(self):
        for mode in ("shared", "fanout"):
            gates = multi_target_cswap(0, [(1, 2)], mode=mode)
            assert circuit_of(gates, 3).depth() == 14
            u = sequence_matrix(gates, 3)
            assert max_abs(u - cswap_reference(0, 1, 2, 3)) <= 1e-12

    def test_shared_depth_formula(self):
        for n_t in (1, 2, 4, 8):
            pairs = [(1 + i, 1 + n_t + i) for i in range(n_t)]
            gates = multi_target_cswap(0, pairs, mode="shared")
            depth = circuit_of(gates, 1 + 2 * n_t).depth()
            assert depth == 6 * int(np.ceil(np.log2(n_t))) + 14

    def test_shared_semantics_two_pairs(self):
        gates = multi_target_cswap(0, [(1, 3), (2, 4)], mode="shared")
        u = sequence_matrix(gates, 5)
        want = cswap_reference(0, 1, 3, 5) @ cswap_reference(0, 2, 4, 5)
        assert max_abs(u - want) <= 1e-12

    def test_fanout_semantics_two_pairs(self):
        # ancilla starts |0>; copying the control gives the same controlled
        # swap, with the ancilla left correlated with the control
        gates = multi_target_cswap(0, [(1, 3), (2, 4)], mode="fanout", ancillas=(5,))
        u = sequence_matrix(gates, 6)
        cols = [i for i in range(64) if not (i >> 5) & 1]
        for i in cols:
            out = u[:, i]
            j = int(np.argmax(np.abs(out)))
            assert abs(abs(out[j]) - 1.0) <= 1e-12
            ctrl = (i >> 0) & 1
            expect = i
            if ctrl:
                for a, b in [(1, 3), (2, 4)]:
                    ba, bb = (expect >> a) & 1, (expect >> b) & 1
                    if ba != bb:
                        expect ^= (1 << a) | (1 << b)
                expect |= 1 << 5  # ancilla copies the control
            assert j == expect

    def test_fanout_layer_depth(self):
        # CSWAP blocks stay at depth 14; the copy tree adds its rounds minus
        # the one layer of control slack inside the elementary decomposition
        for n_t, want in [(2, 14), (4, 15), (8, 16)]:
            pairs = [(1 + i, 1 + n_t + i) for i in range(n_t)]
            anc = tuple(range(1 + 2 * n_t, 1 + 2 * n_t + n_t - 1))
            gates = multi_target_cswap(0, pairs, mode="fanout", ancillas=anc)
            depth = circuit_of(gates, 1 + 3 * n_t).depth()
            assert depth == want

    def test_fanout_needs_ancillas(self):
        with pytest.raises(MissingAncillasError):
            multi_target_cswap(0, [(1, 3), (2, 4)], mode="fanout", ancillas=())

    def test_collisions_rejected(self):
        with pytest.raises(QubitCollisionError):
            multi_target_cswap(0, [(1, 2), (2, 3)], mode="shared")


class TestBuildMixer:
    def test_shared_structure(self):
        c = build_mixer(4, 2, mode="shared")
        assert c.num_qubits == 4 * 2 + 3
        assert c.count_kind("MULTI_TARGET_CSWAP") == 3
        assert c.count_kind("H") == 3
        mix = costmodel.mixer_cost(4, 2, "shared")
        assert c.depth() == mix.total_depth
        assert c.cnot_count() == mix.cnot

    def test_fanout_structure(self):
        c = build_mixer(4, 3, mode="fanout")
        assert c.num_qubits == 4 * 3 + 3 * 3
        mix = costmodel.mixer_cost(4, 3, "fanout")
        assert c.depth() == mix.total_depth
        assert c.cnot_count() == mix.cnot

    def test_single_state_trivial(self):
        c = build_mixer(1, 2)
        assert c.depth() == 0 and not c.gates

    def test_weighted_controls_use_ry(self):
        c = build_mixer(2, 1, weights=(0.25, 0.75))
        kinds = [g.kind for g in c.gates]
        assert "RY" in kinds and "H" not in kinds

    def test_rejects_non_power_of_two(self):
        with pytest.raises(NotPowerOfTwoError):
            build_mixer(3, 1)


class TestAssemble:
    def test_stinespring_layout(self):
        k = random_kraus_set(2, 16, seed=1)
        c = assemble_simulation_circuit(k, "stinespring")
        assert c.num_qubits == 2 + 4
        assert c.count_kind("OPAQUE_UNITARY") == 1
        assert c.count_kind("POSTSELECT") == 0
        cost = costmodel.combined_cost("stinespring", 2, 16)
        assert c.depth() == cost.depth
        assert c.cnot_count() == cost.cnot_count

    def test_unitary_channel_stinespring(self):
        k = random_kraus_set(1, 1, seed=2)
        c = assemble_simulation_circuit(k, "stinespring")
        assert c.num_qubits == 1
        assert c.count_kind("TRACE_OUT") == 0

    def test_sznagy_ungrouped_counts(self):
        k = random_kraus_set(2, 16, seed=3)
        c = assemble_simulation_circuit(k, "sznagy", group_size=1)
        cost = costmodel.combined_cost("sznagy", 2, 16, group_size=1)
        assert c.num_qubits == cost.qubit_count == 16 * 3 + 15
        assert c.count_kind("OPAQUE_UNITARY") == 16
        assert c.depth() == pytest.approx(cost.depth)
        assert c.cnot_count() == pytest.approx(cost.cnot_count)

    def test_svd_grouped_counts(self):
        k = random_kraus_set(2, 16, seed=4)
        for l in (1, 2, 4):
            c = assemble_simulation_circuit(k, "svd", group_size=l)
            cost = costmodel.combined_cost("svd", 2, 16, group_size=l)
            assert c.num_qubits == cost.qubit_count
            assert c.depth() == pytest.approx(cost.depth)
            assert c.cnot_count() == pytest.approx(cost.cnot_count)

    def test_branch_count_excludes_identity_block(self):
        k = random_kraus_set(2, 16, seed=5)
        c = assemble_simulation_circuit(k, "sznagy", group_size=2)
        assert c.count_kind("OPAQUE_UNITARY") == 8  # not 9

    def test_full_grouping_has_no_mixer(self):
        k = random_kraus_set(1, 4, seed=6)
        c = assemble_simulation_circuit(k, "sznagy", group_size=4)
        assert c.count_kind("MULTI_TARGET_CSWAP") == 0
        assert c.count_kind("H") == 0
        assert c.count_kind("POSTSELECT") == 1

    def test_fanout_mode_is_elementary(self):
        k = random_kraus_set(1, 4, seed=7)
        c = assemble_simulation_circuit(k, "svd", group_size=1, mode="fanout")
        assert c.count_kind("MULTI_TARGET_CSWAP") == 0
        cost = costmodel.combined_cost("svd", 1, 4, group_size=1, mode="fanout")
        assert c.depth() == pytest.approx(cost.depth)
        assert c.cnot_count() == pytest.approx(cost.cnot_count)

    def test_non_power_of_two_rejected(self):
        k = random_kraus_set(1, 3, seed=8)
        with pytest.raises(NotPowerOfTwoError):
            assemble_simulation_circuit(k, "sznagy")


class TestSerialization:
    def test_single_h(self):
        c = circuit_of([h(0)], 1)
        assert "GATE H q0" in export_circuit(c)

    def test_cswap_has_nine_cnot_lines(self):
        c = circuit_of(cswap_elementary(0, 1, 2), 3)
        text = export_circuit(c)
        assert sum(1 for ln in text.splitlines() if "CNOT" in ln) == 9

    def test_native_round_trip(self):
        k = random_kraus_set(1, 4, seed=9)
        c = assemble_simulation_circuit(k, "svd", group_size=2)
        text = export_circuit(c)
        mats = parse_sidecar(opaque_sidecar(c))
        c2 = parse_circuit(text, matrices=mats)
        assert c2.num_qubits == c.num_qubits
        assert c2.gates == c.gates
        assert c2.registers == c.registers
        assert c2.input_registers == c.input_registers
        assert export_circuit(c2) == text
        for mid, mat in c.matrices.items():
            assert max_abs(c2.matrices[mid] - mat) == 0.0

    def test_round_trip_rz_theta(self):
        c = circuit_of([rz(0, 0.1234567890123456789), ry(1, -2.5)], 2)
        c2 = parse_circuit(export_circuit(c))
        assert c2.gates[0].theta == c.gates[0].theta
        assert c2.gates[1].theta == c.gates[1].theta

    def test_qasm_elementary(self):
        c = circuit_of(cswap_elementary(0, 1, 2), 3)
        text = export_circuit(c, fmt="qasm-elementary")
        assert text.startswith("OPENQASM 2.0;")
        assert text.count("cx q[") == 9

    def test_qasm_rejects_logical_gates(self):
        c = circuit_of(multi_target_cswap(0, [(1, 3), (2, 4)], mode="shared"), 5)
        with pytest.raises(UnsupportedGateError):
            export_circuit(c, fmt="qasm-elementary")

    def test_qasm_opaque_declaration(self):
        k = validate_cptp([np.eye(2, dtype=complex)])
        c = assemble_simulation_circuit(k, "stinespring")
        text = export_circuit(c, fmt="qasm-elementary")
        assert "opaque stinespring_unitary" in text
