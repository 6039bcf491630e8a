"""Command-line entry point: ``qcert certify | simulate | emit-range``.

Exit codes: 0 success, 2 invalid input, 3 optimizer or feasibility failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .config import OptimizerError, QcertError, ValidationError
from .linalg import as_unitary, load_matrix, matrix_to_json, tensor_power
from .numrange import hull_of_unitary, wq_boundary_samples
from .povm import PovmCertProblem, assemble_povm_strategy
from .simulator import run_protocol
from .states import StateCertProblem, optimal_state_measurement
from .unitary import UnitaryCertProblem, optimal_unitary_strategy

SCHEMA = "qcert/1"

_S = 1 / math.sqrt(2)
BUILTIN_MATRICES = {
    "hadamard": np.array([[_S, _S], [_S, -_S]], dtype=complex),
    "fig1": np.diag(np.exp(1j * np.pi * np.array([0, 1 / 3, 2 / 3]))),
    "fig2": np.diag([1, np.exp(1j * np.pi / 3)]),
    "identity2": np.eye(2, dtype=complex),
    "paulix": np.array([[0, 1], [1, 0]], dtype=complex),
}
BUILTIN_STATES = {
    "ket0": np.array([1, 0], dtype=complex),
    "ket1": np.array([0, 1], dtype=complex),
    "plus": np.array([_S, _S], dtype=complex),
    "minus": np.array([_S, -_S], dtype=complex),
}


def _matrix_arg(name: str) -> np.ndarray:
    if name in BUILTIN_MATRICES:
        return BUILTIN_MATRICES[name]
    return load_matrix(name)


def _state_arg(name: str) -> np.ndarray:
    if name in BUILTIN_STATES:
        return BUILTIN_STATES[name]
    m = load_matrix(name)
    if 1 not in m.shape:
        raise ValidationError(f"{name}: a state must be a single row or column, got {m.shape[0]}x{m.shape[1]}")
    return m.reshape(-1)


def _unit_interval(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return x


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {n}")
    return n


def _seed(text: str) -> int:
    try:
        n = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= n < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return n


def _int_list(text: str) -> list[int]:
    """``"1,2,4"`` or ``"1..4"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            out = list(range(int(lo), int(hi) + 1))
        else:
            out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list: {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("copies must be positive integers")
    return out


def _q_list(text: str) -> list[float]:
    return [_unit_interval(t) for t in text.split(",") if t.strip()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qcert", description="Two-point certification of quantum states, unitaries and measurements.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def objects(sp):
        sp.add_argument("kind", choices=("state", "unitary", "povm"))
        sp.add_argument("--u", help="matrix JSON path or built-in name (hadamard, fig1, fig2, ...)")
        sp.add_argument("--psi", help="H0 state (JSON path or ket0/ket1/plus/minus)")
        sp.add_argument("--phi", help="H1 state")
        sp.add_argument("--delta", type=_unit_interval, required=True)
        sp.add_argument("--copies", type=_positive_int, default=1)
        sp.add_argument("--out", help="output path (default: stdout)")

    objects(sub.add_parser("certify", help="optimal strategy and error probabilities"))
    sim = sub.add_parser("simulate", help="Monte-Carlo run of the optimal strategy")
    objects(sim)
    sim.add_argument("--truth", choices=("h0", "h1", "both"), default="both")
    sim.add_argument("--shots", type=_positive_int, default=100_000)
    sim.add_argument("--seed", type=_seed, default=None, help="default: $QCERT_SEED or 0")

    er = sub.add_parser("emit-range", help="numerical-range data for external plotting")
    er.add_argument("--u", required=True)
    er.add_argument("--delta", type=_unit_interval, help="adds q = sqrt(1 - delta) to the grid")
    er.add_argument("--q-grid", type=_q_list, default=None, help="comma-separated q values in [0, 1]")
    er.add_argument("--copies", type=_int_list, default=[1], help='e.g. "1..4" or "1,2"')
    er.add_argument("--n-dirs", type=_positive_int, default=64)
    er.add_argument("--seed", type=_seed, default=0)
    er.add_argument("--out")
    er.add_argument("--csv", help="also write boundary samples as CSV")
    return p


def _problem(args):
    copies = args.copies
    if args.kind == "state":
        if args.psi is None or args.phi is None:
            raise ValidationError("state problems need --psi and --phi")
        return StateCertProblem(_state_arg(args.psi), _state_arg(args.phi), args.delta, copies)
    if args.u is None:
        raise ValidationError(f"{args.kind} problems need --u")
    u = _matrix_arg(args.u)
    cls = UnitaryCertProblem if args.kind == "unitary" else PovmCertProblem
    return cls(u, args.delta, copies)


def _echo(args, problem) -> dict:
    out = {"kind": args.kind, "delta": problem.delta, "copies": problem.copies}
    if args.kind == "state":
        out["psi"] = matrix_to_json(problem.psi.amplitudes)
        out["phi"] = matrix_to_json(problem.phi.amplitudes)
    else:
        out["u"] = matrix_to_json(problem.u.matrix)
    return out


def _strategy(problem):
    if isinstance(problem, StateCertProblem):
        return optimal_state_measurement(problem)
    if isinstance(problem, UnitaryCertProblem):
        return optimal_unitary_strategy(problem)
    return assemble_povm_strategy(problem)


def _strategy_json(s) -> dict:
    if hasattr(s, "to_json"):
        return s.to_json()
    out = {"effect": matrix_to_json(s.effect.matrix)}
    if hasattr(s, "input"):
        out["input"] = matrix_to_json(s.input.amplitudes)
    return out


def cmd_certify(args) -> dict:
    problem = _problem(args)
    s = _strategy(problem)
    return {
        "schema": SCHEMA,
        "command": "certify",
        "problem": _echo(args, problem),
        "p2": s.p2,
        "p1": s.p1,
        "strategy": _strategy_json(s),
        "flags": list(s.flags),
    }


def cmd_simulate(args) -> dict:
    problem = _problem(args)
    seed = args.seed
    if seed is None:
        try:
            seed = _seed(os.environ.get("QCERT_SEED", "0"))
        except argparse.ArgumentTypeError as exc:
            raise ValidationError(f"QCERT_SEED: {exc}") from None
    s = _strategy(problem)
    report = run_protocol(problem, s, args.shots, seed, truth=args.truth)
    return {
        "schema": SCHEMA,
        "command": "simulate",
        "problem": _echo(args, problem),
        "truth": args.truth,
        "report": report.to_json(),
        "flags": list(s.flags),
    }


def emit_range(u, qs, copies, n_dirs=64, seed=0) -> dict:
    """Hull polygon and W_q boundary samples of ``U^{(x)N}`` for each N and q.

    The tensor power is replaced by the diagonal of its eigenvalues; both
    ranges are invariant under unitary similarity.
    """
    u = np.asarray(u, dtype=complex)
    sets = []
    for n in copies:
        x = tensor_power(u, n) if n > 1 else u
        lam = np.linalg.eigvals(x)
        diag = np.diag(lam)
        hull = hull_of_unitary(x)
        ranges = [wq_boundary_samples(diag, q, n_dirs, seed=seed) for q in qs]
        sets.append({
            "copies": n,
            "hull": hull.to_json(),
            "ranges": [r.to_json() for r in ranges],
        })
    return {"schema": SCHEMA, "command": "emit-range", "u": matrix_to_json(u), "q_grid": list(qs), "sets": sets}


def cmd_emit_range(args) -> dict:
    u = as_unitary(_matrix_arg(args.u)).matrix
    qs = list(args.q_grid or [])
    if args.delta is not None:
        qs.append(math.sqrt(1 - args.delta))
    if not qs:
        raise ValidationError("emit-range needs --delta or --q-grid")
    result = emit_range(u, qs, args.copies, args.n_dirs, args.seed)
    if args.delta is not None:
        result["delta"] = args.delta
    if args.csv:
        _write_csv(args.csv, result)
    return result


def _write_csv(path, result):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["copies", "kind", "q", "index", "re", "im", "dist_to_zero"])
            for s in result["sets"]:
                for rs in [s["hull"], *s["ranges"]]:
                    for k, (re, im) in enumerate(rs["points"]):
                        w.writerow([s["copies"], rs["kind"], repr(rs["q"]), k, repr(re), repr(im),
                                    repr(rs["dist_to_zero"])])
    except OSError as exc:
        raise ValidationError(f"{path}: cannot write ({exc.strerror})") from exc


def _emit(obj: dict, out):
    text = json.dumps(obj, indent=2) + "\n"  # repr floats: shortest exact round-trip
    if out:
        try:
            with open(out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise ValidationError(f"{out}: cannot write ({exc.strerror})") from exc
    else:
        sys.stdout.write(text)


COMMANDS = {"certify": cmd_certify, "simulate": cmd_simulate, "emit-range": cmd_emit_range}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _emit(COMMANDS[args.command](args), args.out)
    except ValidationError as exc:
        print(f"qcert: invalid input: {exc}", file=sys.stderr)
        return 2
    except OptimizerError as exc:
        print(f"qcert: optimizer failure: {exc}", file=sys.stderr)
        return 3
    except QcertError as exc:
        print(f"qcert: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
