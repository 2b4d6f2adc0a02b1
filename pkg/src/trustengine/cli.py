"""``trustengine`` command line.

Exit codes: 0 success (a Deny verdict included), 1 domain error,
2 usage error, 3 storage or infrastructure failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import analysis
from .algorithm import DEFAULT_PARAMS, AlgorithmParams
from .engine import TrustEngine
from .errors import DomainError, InfrastructureError, TrustEngineError
from .integrity import KeyPair, Manifest, install, read_hex_file, sign_manifest
from .model import CodeUnit, Principal, PrincipalKind
from .scenarios import SCENARIOS, run_scenario
from .store import TrustStore

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_INFRA = 0, 1, 2, 3


def _emit(obj) -> None:
    print(json.dumps(obj, separators=(",", ":")))


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_keygen(args) -> int:
    keys = KeyPair.from_seed(args.seed) if args.seed else KeyPair.generate()
    priv, pub = keys.save(args.out)
    _emit({"private": str(priv), "public": str(pub), "public_key": keys.public_key.hex()})
    return EXIT_OK


def cmd_principal(args) -> int:
    with TrustStore(args.store) as store:
        principal = Principal(args.id, read_hex_file(args.public_key), args.owner_trust,
                              PrincipalKind(args.kind.capitalize()))
        store.add_principal(principal)
    _emit({"id": principal.id, "kind": principal.kind.value, "owner_trust": principal.owner_trust})
    return EXIT_OK


def cmd_manifest(args) -> int:
    body = Path(args.body).read_bytes()
    unit = CodeUnit.from_body(args.id, args.owner, body)
    manifest = Manifest.for_code(unit)
    Path(args.out).write_bytes(manifest.serialize())
    _emit({"code_id": unit.code_id, "hash": unit.body_hash, "lines": unit.line_count_n,
           "k": unit.ops_per_line_k})
    return EXIT_OK


def cmd_sign(args) -> int:
    data = Path(args.manifest).read_bytes()
    signature = sign_manifest(data, read_hex_file(args.key))
    Path(args.out).write_text(signature.hex() + "\n")
    _emit({"manifest": args.manifest, "signature": str(args.out)})
    return EXIT_OK


def cmd_install(args) -> int:
    manifest = Manifest.parse(Path(args.manifest).read_bytes())
    body = Path(args.body).read_bytes()
    signature = read_hex_file(args.sig) if args.sig else None
    unit = CodeUnit(manifest.code_id, manifest.owner_id, body, manifest.hash, manifest.lines,
                    manifest.k, signature)
    with TrustStore(args.store) as store:
        installed, record = install(unit, store, as_system=args.as_system)
    _emit({"code_id": installed.code_id, "owner_id": installed.owner_id, **record.to_json()})
    return EXIT_OK


def cmd_run(args) -> int:
    params = AlgorithmParams.load(args.params) if args.params else DEFAULT_PARAMS
    with TrustStore(args.store, params=params) as store:
        report = TrustEngine(store).run(args.code_id)
    if args.trace:
        Path(args.trace).write_text("".join(line + "\n" for line in report.trace))
    _emit(report.to_json())
    return EXIT_OK


def cmd_trust(args) -> int:
    store = TrustStore(args.store, readonly=True)
    _emit(store.record(args.code_id).to_json())
    return EXIT_OK


def cmd_history(args) -> int:
    store = TrustStore(args.store, readonly=True)
    store.install_entry(args.code_id)
    records = store.history.records(args.code_id)
    if args.limit is not None:
        records = records[-args.limit:] if args.limit > 0 else []
    for record in records:
        _emit(record.to_json())
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.l is None:
        perf, sec = analysis.baseline_metrics(args.n, args.k, args.o)
        fields = {"base_ops": analysis.base_operations(args.n, args.k, args.o),
                  "perf_base": perf, "sec_base": sec}
    else:
        result = analysis.secured_metrics(analysis.AnalysisInput(args.n, args.k, tuple(args.l), args.o))
        fields = result.as_dict()
        print(analysis.PROVENANCE_NOTE, file=sys.stderr)
    if args.json:
        _emit({k: float(v) for k, v in fields.items()})
    else:
        print(" ".join(f"{k}={format(float(v), '.12g')}" for k, v in fields.items()))
    return EXIT_OK


def cmd_sweep(args) -> int:
    table = analysis.sweep(args.n, args.k, args.l, args.o)
    Path(args.out).write_text(analysis.sweep_csv(table))
    _emit({"rows": int(table.shape[0]), "out": str(args.out)})
    print(analysis.PROVENANCE_NOTE, file=sys.stderr)
    return EXIT_OK


def cmd_scenario(args) -> int:
    report = run_scenario(args.name, keep=args.keep)
    for line in report.summary_lines():
        print(line, file=sys.stderr)
    out = {"scenario": report.name, "passed": report.passed,
           "expectations": [{"name": e.name, "passed": e.passed} for e in report.expectations]}
    if report.path is not None:
        out["path"] = str(report.path)
    _emit(out)
    return EXIT_OK if report.passed else EXIT_DOMAIN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trustengine", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate an Ed25519 key pair (<prefix>.key, <prefix>.pub)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", help="derive the key deterministically from this string")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("principal", help="register a principal in a store")
    p.add_argument("--store", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--public-key", required=True)
    p.add_argument("--owner-trust", type=float, required=True)
    p.add_argument("--kind", choices=("vendor", "user"), default="user")
    p.set_defaults(func=cmd_principal)

    p = sub.add_parser("manifest", help="write the canonical manifest for a workload")
    p.add_argument("--body", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--owner", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("sign", help="sign a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("install", help="install operating code into a store")
    p.add_argument("--manifest", required=True)
    p.add_argument("--body", required=True)
    p.add_argument("--sig")
    p.add_argument("--store", required=True)
    p.add_argument("--as-system", action="store_true")
    p.set_defaults(func=cmd_install)

    p = sub.add_parser("run", help="evaluate and execute installed code")
    p.add_argument("--code-id", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--trace")
    p.add_argument("--params")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trust", help="print the current trust record")
    p.add_argument("--code-id", required=True)
    p.add_argument("--store", required=True)
    p.set_defaults(func=cmd_trust)

    p = sub.add_parser("history", help="print execution history, oldest first")
    p.add_argument("--code-id", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--limit", type=int, help="only the most recent N records")
    p.set_defaults(func=cmd_history)

    p = sub.add_parser("analyze", help="evaluate the security/performance model")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--o", type=float, default=1.0)
    p.add_argument("--l", type=_floats)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="write the trade-off table as CSV")
    p.add_argument("--n", required=True, help="start:stop:step, stop inclusive")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--o", type=float, default=1.0)
    p.add_argument("--l", type=_floats, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scenario", help="run a threat scenario")
    p.add_argument("--name", required=True, choices=sorted(SCENARIOS))
    p.add_argument("--keep", action="store_true")
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (InfrastructureError, TrustEngineError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFRA
    except ValueError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
