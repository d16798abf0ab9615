"""Command-line front end: validate, synth, simulate, fmo, cost.

Exit codes: 0 success, 1 semantic failure (trace preservation or
equivalence out of tolerance), 2 malformed input or I/O error. All
floating-point text output uses 17 significant digits so values round-trip
exactly; commands are deterministic for a fixed ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import channel, circuit, costmodel, simulator
from .channel import ChannelError, NotTracePreservingError
from .linalg import LinalgError

EXIT_OK = 0
EXIT_SEMANTIC = 1
EXIT_INPUT = 2


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise _InputError(f"cannot read {path}: {exc}") from exc


class _InputError(Exception):
    pass


def _load_kraus(path: str, validate: bool, tol: float) -> channel.KrausSet:
    data = _load_json(path)
    try:
        return channel.kraus_from_json_dict(data, validate=validate, tol=tol)
    except NotTracePreservingError:
        raise
    except (ChannelError, LinalgError) as exc:
        raise _InputError(str(exc)) from exc


def _load_state(path: str) -> np.ndarray:
    data = _load_json(path)
    try:
        n = int(data["num_qubits"])
        kind = data["kind"]
        raw = data["data"]
        if kind == "pure":
            psi = np.array([complex(re, im) for re, im in raw])
            if psi.shape != (2**n,):
                raise _InputError(f"pure state needs {2**n} amplitudes")
            psi = psi / np.linalg.norm(psi)
            return np.outer(psi, psi.conj())
        if kind == "density":
            m = np.array([[complex(re, im) for re, im in row] for row in raw])
            if m.shape != (2**n, 2**n):
                raise _InputError(f"density matrix must be {2**n} square")
            return m
        raise _InputError(f"unknown state kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise _InputError(f"malformed state JSON: {exc}") from exc


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _pad_to_power_of_two(kset: channel.KrausSet) -> channel.KrausSet:
    m = kset.num_operators
    if m & (m - 1) == 0:
        return kset
    m_pad = 1 << (m - 1).bit_length()
    print(
        f"warning: padding operator count from {m} to {m_pad} with zero blocks",
        file=sys.stderr,
    )
    zeros = [np.zeros((kset.dim, kset.dim), dtype=complex) for _ in range(m_pad - m)]
    return channel.validate_cptp(
        list(kset.operators) + zeros, tol=max(1e-9, 2 * kset.deviation)
    )


def cmd_validate(args) -> int:
    try:
        kset = _load_kraus(args.kraus, validate=True, tol=args.tol)
    except NotTracePreservingError as exc:
        print(f"NOT trace preserving: {exc}")
        return EXIT_SEMANTIC
    print(
        f"valid CPTP set: m={kset.num_operators} dim={kset.dim} "
        f"qubits={kset.num_qubits} deviation={_fmt(kset.deviation)}"
        + ("" if kset.is_minimal else " (non-minimal: m > dim^2)")
    )
    return EXIT_OK


def cmd_synth(args) -> int:
    kset = _load_kraus(args.kraus, validate=not args.no_validate, tol=args.tol)
    if args.method != "stinespring":
        kset = _pad_to_power_of_two(kset)
    circ = circuit.assemble_simulation_circuit(
        kset, args.method, group_size=args.group, mode=args.mode
    )
    report = costmodel.combined_cost(
        args.method,
        kset.num_qubits,
        kset.num_operators,
        group_size=args.group if args.method != "stinespring" else 1,
        mode=args.mode,
    )
    _write_text(args.out, circuit.export_circuit(circ, fmt=args.format))
    if args.matrices:
        _write_text(args.matrices, circuit.opaque_sidecar(circ))
    if args.metrics:
        _write_text(args.metrics, json.dumps(report.to_dict(), indent=1) + "\n")
    print(
        f"synthesized {args.method} circuit: qubits={circ.num_qubits} "
        f"depth={_fmt(circ.depth())} cnots={_fmt(circ.cnot_count())} "
        f"p_success={_fmt(report.success_probability)}"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    kset = _load_kraus(args.kraus, validate=not args.no_validate, tol=1e-9)
    rho = _load_state(args.state)
    if rho.shape != (kset.dim, kset.dim):
        raise _InputError(
            f"state dimension {rho.shape[0]} does not match channel dimension {kset.dim}"
        )
    if args.method != "stinespring":
        kset = _pad_to_power_of_two(kset)
    circ = circuit.assemble_simulation_circuit(
        kset, args.method, group_size=args.group, mode=args.mode
    )
    want = channel.apply_channel(kset, rho)
    got, p = simulator.run(circ, rho)
    residual = float(np.abs(got.matrix - want).max())
    expected_p = (
        1.0 if args.method == "stinespring" else args.group / kset.num_operators
    )
    print(f"residual={_fmt(residual)}")
    print(f"success_probability={_fmt(p)} expected={_fmt(expected_p)}")
    if residual > args.tol or abs(p - expected_p) > 1e-12:
        print("FAIL: circuit output disagrees with the channel oracle")
        return EXIT_SEMANTIC
    print("PASS: circuit output matches the channel oracle")
    return EXIT_OK


def cmd_fmo(args) -> int:
    params = channel.FMOParams(
        alpha=args.alpha, beta=args.beta, gamma=args.gamma, dt=args.dt
    )
    rho0 = _load_state(args.init) if args.init else channel.fmo_initial_state()
    if rho0.shape != (8, 8):
        raise _InputError("FMO initial state must live on 3 qubits")
    traj = channel.fmo_trajectory(params, rho0, args.steps)
    lines = ["step,time_fs,p_site0,p_site1,p_site2,p_site3,p_site4,trace"]
    for step in range(traj.steps + 1):
        cols = [str(step), _fmt(traj.times_fs[step])]
        cols += [_fmt(x) for x in traj.populations[step]]
        cols.append(_fmt(traj.traces[step]))
        lines.append(",".join(cols))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write_text(args.out, text)
        print(f"wrote {traj.steps + 1} rows to {args.out}")
    else:
        print(text, end="")
    final = traj.populations[-1]
    print(
        "final populations: "
        + " ".join(f"site{s}={_fmt(final[s])}" for s in range(5))
        + f" trace={_fmt(traj.traces[-1])}"
    )
    return EXIT_OK


def cmd_cost(args) -> int:
    m = args.m
    if m & (m - 1) != 0:
        m_pad = 1 << (m - 1).bit_length()
        print(
            f"warning: m={m} is not a power of two; using padded m={m_pad}",
            file=sys.stderr,
        )
        m = m_pad
    if args.sweep_groups:
        if args.method == "stinespring":
            raise _InputError("--sweep-groups applies to sznagy/svd only")
        reports = costmodel.sweep_group_sizes(args.method, args.n, m, mode=args.mode)
        flags = costmodel.tradeoff_flags(reports)
        for r in reports:
            if r.notes:
                print(f"l={r.group_size}: {r.notes}", file=sys.stderr)
        print(
            f"tradeoff: cnot_nonincreasing={flags['cnot_nonincreasing']} "
            f"depth_nondecreasing={flags['depth_nondecreasing']} "
            f"best_cnot_per_depth_at_l={reports[flags['ratio_argmin']].group_size}"
        )
    else:
        reports = [
            costmodel.combined_cost(
                args.method, args.n, m, group_size=args.group, mode=args.mode
            )
        ]
    text = costmodel.reports_to_csv(reports)
    if args.out:
        _write_text(args.out, text)
        print(f"wrote {len(reports)} rows to {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oqsynth",
        description="Compile Kraus channels into dilation-based simulation circuits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a Kraus JSON file for trace preservation")
    p.add_argument("kraus")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="synthesize a simulation circuit")
    p.add_argument("kraus")
    p.add_argument("--method", choices=costmodel.METHODS, default="svd")
    p.add_argument("--group", type=int, default=1)
    p.add_argument("--mode", choices=costmodel.ANCILLA_MODES, default="shared")
    p.add_argument("--format", choices=["native-text", "qasm-elementary"], default="native-text")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--no-validate", action="store_true")
    p.add_argument("--out", default="circuit.txt")
    p.add_argument("--matrices", default=None, help="sidecar JSON for opaque blocks")
    p.add_argument("--metrics", default=None, help="cost report JSON path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="verify a circuit against the channel oracle")
    p.add_argument("kraus")
    p.add_argument("state")
    p.add_argument("--method", choices=costmodel.METHODS, default="svd")
    p.add_argument("--group", type=int, default=1)
    p.add_argument("--mode", choices=costmodel.ANCILLA_MODES, default="shared")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--no-validate", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fmo", help="run the discretized exciton-transport trajectory")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--dt", type=float, default=48.4)
    p.add_argument("--alpha", type=float, default=3e-3)
    p.add_argument("--beta", type=float, default=5e-7)
    p.add_argument("--gamma", type=float, default=6.28e-3)
    p.add_argument("--init", default=None, help="state JSON (default: built-in superposition)")
    p.add_argument("--out", default=None, help="trajectory CSV path")
    p.set_defaults(func=cmd_fmo)

    p = sub.add_parser("cost", help="analytic cost reports and group-size sweeps")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--method", choices=costmodel.METHODS, default="sznagy")
    p.add_argument("--group", type=int, default=1)
    p.add_argument("--mode", choices=costmodel.ANCILLA_MODES, default="shared")
    p.add_argument("--sweep-groups", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_cost)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NotTracePreservingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    except simulator.EquivalenceFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    except (_InputError, ChannelError, LinalgError, circuit.CircuitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def console_main() -> None:
    sys.exit(main())
