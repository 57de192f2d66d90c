"""Command-line front end.

Subcommands:
  encode    erasure-extend a file into a committed share matrix
  prob      emit probability tables as CSV
  simulate  run the sampling simulator from a key=value config file
  fraud     generate or verify fraud proofs against block files

Every command that writes artifacts also writes a manifest.json recording
the subcommand, inputs, and seed, so outputs are reproducible from the
manifest alone. The seed falls back to the DA_SEED environment variable.
Exit codes: 0 success (and "proof verifies"), 1 verification returned
false, 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from . import fraud, prob, rs2d, sim
from .block import BlockHeader
from .fraud import HeaderStore
from .smt import StateTree
from .state import AccountValue

EXIT_OK = 0
EXIT_VERIFY_FALSE = 1
EXIT_USAGE = 2


class CliError(Exception):
    pass


def _seed_override(args: argparse.Namespace) -> Optional[int]:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("DA_SEED")
    return int(env) if env else None


def _write_manifest(out_dir: Path, subcommand: str, details: dict) -> None:
    manifest = {"subcommand": subcommand, **details}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


# --- encode ----------------------------------------------------------------------


def cmd_encode(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = Path(args.input).read_bytes()
    matrix = rs2d.extend(raw, args.k, args.share_size)
    commitment = rs2d.commit(matrix)
    width = matrix.width
    cells = b"".join(matrix.cells[r][c] for r in range(width) for c in range(width))
    (out_dir / "matrix.bin").write_bytes(cells)
    (out_dir / "commitment.json").write_text(
        json.dumps(
            {
                "k": args.k,
                "share_size": args.share_size,
                "matrix_width": width,
                "data_length": commitment.data_length,
                "data_root": commitment.data_root.hex(),
                "row_roots": [r.hex() for r in commitment.row_roots],
                "column_roots": [c.hex() for c in commitment.column_roots],
            },
            indent=2,
        )
    )
    _write_manifest(
        out_dir,
        "encode",
        {"input": str(args.input), "k": args.k, "share_size": args.share_size},
    )
    print(f"data_root={commitment.data_root.hex()}")
    return EXIT_OK


# --- prob ------------------------------------------------------------------------


def _parse_int_list(spec: str) -> list[int]:
    """Comma-separated integers; a..b expands to an inclusive range."""
    values: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            values.extend(range(int(lo), int(hi) + 1))
        elif part:
            values.append(int(part))
    if not values:
        raise CliError(f"empty integer list: {spec!r}")
    return values


def cmd_prob(args: argparse.Namespace) -> int:
    import csv

    rows = []
    if args.table == "table1":
        header = ["k", "s", "min_clients"]
        for k in _parse_int_list(args.k):
            for s in _parse_int_list(args.s):
                rows.append(
                    [k, s, prob.min_clients(k, s, target=args.target, method=args.method)]
                )
    else:
        header = ["k", "s", "c", "c_hat", "d", "p1", "pc", "pc_from_j1", "pe", "px"]
        ks = _parse_int_list(args.k)
        ss = _parse_int_list(args.s)
        cs = _parse_int_list(args.c) if args.c else [0]
        for k in ks:
            n = (2 * k) ** 2
            lam = n - prob.recovery_threshold(k)
            for s in ss:
                p1_value = prob.p1(k, s)
                for c in cs:
                    row: dict[str, object] = {
                        "k": k, "s": s, "c": c, "c_hat": "", "d": "",
                        "p1": f"{p1_value:.10f}", "pc": "", "pc_from_j1": "",
                        "pe": "", "px": "",
                    }
                    if args.c_hat is not None and c:
                        row["c_hat"] = args.c_hat
                        row["pc"] = f"{prob.pc(k, s, c, args.c_hat):.10f}"
                        row["pc_from_j1"] = f"{prob.pc_as_printed(k, s, c, args.c_hat):.10f}"
                    if args.table in ("pe", "all") and c:
                        method = "dp" if args.method == "auto" else args.method
                        row["pe"] = f"{prob.pe(n, s, c, lam, method=method):.10f}"
                    if args.d is not None and c:
                        row["d"] = args.d
                        row["px"] = f"{prob.px(s, c, args.d):.10f}"
                    rows.append([row[name] for name in header])

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return EXIT_OK


# --- simulate ----------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    config = sim.SimConfig.from_file(args.config)
    seed = _seed_override(args)
    if seed is not None:
        config.seed = seed
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    verdict = sim.run_sampling(config)
    sim.write_events_csv(verdict.events, out_dir / "events.csv")
    sim.write_verdicts_csv(verdict, out_dir / "verdicts.csv")
    scenario = sim.prepare_scenario(config)
    (out_dir / "headers.bin").write_bytes(
        scenario.genesis.to_bytes() + scenario.built.header.to_bytes()
    )
    summary = {
        "accepting_clients": verdict.accepting_clients,
        "recovered_by_full_node": verdict.recovered_by_full_node,
        "recovered_tick": verdict.recovered_tick,
        "soundness_holds": verdict.soundness_holds,
        "agreement_holds": verdict.agreement_holds,
        "denied_requests": verdict.denied_requests,
        "fraud_proofs": [
            {"tick": tick, "kind": kind} for tick, kind in verdict.fraud_proof_ticks
        ],
        "horizon": verdict.horizon,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    _write_manifest(
        out_dir, "simulate", {"config": str(args.config), "seed": config.seed}
    )
    print(json.dumps(summary, indent=2))
    return EXIT_OK


# --- fraud -------------------------------------------------------------------------


def write_block_dir(built, prev_header: BlockHeader, prev_state: StateTree, out_dir: Path) -> None:
    """Lay out a block for the fraud commands: header, shares, matrix, state."""
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "header.bin").write_bytes(built.header.to_bytes())
    (out_dir / "prev_header.bin").write_bytes(prev_header.to_bytes())
    (out_dir / "shares.bin").write_bytes(b"".join(built.shares))
    width = built.matrix.width
    (out_dir / "matrix.bin").write_bytes(
        b"".join(built.matrix.cells[r][c] for r in range(width) for c in range(width))
    )
    (out_dir / "meta.json").write_text(
        json.dumps({"k": built.matrix.k, "share_size": built.matrix.share_size, "p": built.p})
    )
    accounts = {
        key.hex(): [AccountValue.decode(value).balance, AccountValue.decode(value).nonce]
        for key, value in prev_state.items()
    }
    (out_dir / "prev_state.json").write_text(json.dumps(accounts, indent=0))


def _load_block_dir(block_dir: Path):
    from .block import BuiltBlock
    from .rs2d import ExtendedMatrix

    meta = json.loads((block_dir / "meta.json").read_text())
    k, share_size, p = meta["k"], meta["share_size"], meta["p"]
    header = BlockHeader.from_bytes((block_dir / "header.bin").read_bytes())
    prev_header = BlockHeader.from_bytes((block_dir / "prev_header.bin").read_bytes())
    share_blob = (block_dir / "shares.bin").read_bytes()
    shares = [share_blob[i : i + share_size] for i in range(0, len(share_blob), share_size)]
    matrix_blob = (block_dir / "matrix.bin").read_bytes()
    width = 2 * k
    cells = [
        [
            matrix_blob[(r * width + c) * share_size : (r * width + c + 1) * share_size]
            for c in range(width)
        ]
        for r in range(width)
    ]
    matrix = ExtendedMatrix(k, share_size, cells)
    commitment = rs2d.commit(matrix)
    prev_state = StateTree()
    accounts = json.loads((block_dir / "prev_state.json").read_text())
    for key_hex, (balance, nonce) in accounts.items():
        prev_state.update(bytes.fromhex(key_hex), AccountValue(balance, nonce).encode())
    built = BuiltBlock(
        header=header,
        matrix=matrix,
        commitment=commitment,
        shares=shares,
        messages=[],
        state=prev_state,
        traces=[],
        producer=header.additional_data,
        p=p,
    )
    return built, prev_header, prev_state


def cmd_fraud(args: argparse.Namespace) -> int:
    if args.action == "gen":
        built, prev_header, prev_state = _load_block_dir(Path(args.block))
        if built.header.data_root != built.commitment.data_root:
            raise CliError("stored matrix does not match the header data root")
        proof = None
        if args.kind in ("transition", "auto"):
            proof = fraud.generate_transition_fraud_proof(built, prev_state)
        if proof is None and args.kind in ("codec", "auto"):
            partial = rs2d.PartialMatrix.from_matrix(built.matrix, with_proofs=True)
            result = rs2d.recover_matrix(partial, built.commitment)
            if isinstance(result, rs2d.CodecFault):
                proof = fraud.generate_codec_fraud_proof(
                    result, built.header.block_hash(), built.commitment
                )
        if proof is None:
            print("block replays cleanly; no fraud proof to generate")
            return EXIT_VERIFY_FALSE
        Path(args.out).write_bytes(fraud.encode_fraud_proof(proof))
        kind = "transition" if isinstance(proof, fraud.TransitionFraudProof) else "codec"
        print(f"wrote {kind} fraud proof: {args.out}")
        return EXIT_OK

    # verify
    store = HeaderStore()
    blob = Path(args.headers).read_bytes()
    while blob:
        header, blob = BlockHeader.read_from(blob)
        store.add(header)
    proof = fraud.decode_fraud_proof(Path(args.proof).read_bytes())
    ok = fraud.apply_fraud_proof(proof, store, p=args.p)
    print("fraud proof verifies: block rejected" if ok else "fraud proof does NOT verify")
    return EXIT_OK if ok else EXIT_VERIFY_FALSE


# --- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="daproofs",
        description="Erasure-coded data availability and fraud proof toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="extend a file into a committed share matrix")
    enc.add_argument("--input", required=True)
    enc.add_argument("--k", type=int, required=True)
    enc.add_argument("--share-size", type=int, default=256, dest="share_size")
    enc.add_argument("--out", required=True)
    enc.set_defaults(func=cmd_encode)

    pr = sub.add_parser("prob", help="emit probability tables as CSV")
    pr.add_argument("--table", choices=["p1", "pc", "pe", "px", "all", "table1"], default="all")
    pr.add_argument("--k", default="16")
    pr.add_argument("--s", default="1..15")
    pr.add_argument("--c", default="")
    pr.add_argument("--c-hat", type=int, default=None, dest="c_hat")
    pr.add_argument("--d", type=int, default=None)
    pr.add_argument("--target", type=float, default=0.99)
    pr.add_argument("--method", default="auto", choices=["auto", "exact", "dp", "mc", "series"])
    pr.add_argument("--out", default="")
    pr.set_defaults(func=cmd_prob)

    si = sub.add_parser("simulate", help="run the sampling simulator")
    si.add_argument("--config", required=True)
    si.add_argument("--seed", type=int, default=None)
    si.add_argument("--out", required=True)
    si.set_defaults(func=cmd_simulate)

    fr = sub.add_parser("fraud", help="generate or verify fraud proofs")
    fr.add_argument("action", choices=["gen", "verify"])
    fr.add_argument("--block", help="block directory (gen)")
    fr.add_argument("--kind", choices=["transition", "codec", "auto"], default="auto")
    fr.add_argument("--proof", help="proof file (verify)")
    fr.add_argument("--headers", help="concatenated header records (verify)")
    fr.add_argument("--p", type=int, default=10, help="period criterion")
    fr.add_argument("--out", help="output proof file (gen)")
    fr.set_defaults(func=cmd_fraud)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "fraud":
        if args.action == "gen" and (not args.block or not args.out):
            parser.error("fraud gen needs --block and --out")
        if args.action == "verify" and (not args.proof or not args.headers):
            parser.error("fraud verify needs --proof and --headers")
    try:
        return args.func(args)
    except (CliError, FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
