"""``bct``: one executable for every role and tool.

Deployment variants (individual, service provider or authority as the
receiver) differ only in who runs which subcommand; see README.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import estimator, geo, harness
from .crypto import SeededRandomSource, SystemRandomSource
from .errors import BCTError
from .field import DEFAULT_FIELD, Field
from .ingest import SessionRange, align_receiver, align_sender, parse_config, parse_timestamp, parse_trail, split_by_user
from .transport import Endpoint, Role, run_dealer, run_receiver, run_sender

log = logging.getLogger("blindtrace")


class UsageError(BCTError):
    pass


def _common(top: bool) -> argparse.ArgumentParser:
    # Subcommands repeat the global flags with suppressed defaults so a
    # flag given before the subcommand is not reset after it.
    def d(value):
        return value if top else argparse.SUPPRESS

    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, default=d(None), help="key = value file with grid and session range settings")
    p.add_argument("--format", choices=("text", "json"), default=d("text"))
    p.add_argument("--field-modulus", type=int, default=d(None), help="prime modulus (testing only)")
    p.add_argument("--seed", type=int, default=d(None), help="deterministic randomness; needs --insecure-test-mode")
    p.add_argument("--insecure-test-mode", action="store_true", default=d(False), help="allow --seed")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return p


def _party(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dealer", required=True, metavar="HOST:PORT")
    p.add_argument("--session", required=True, type=int, metavar="ID")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", type=Path, help="CSV trail: user_id,timestamp,lat,lon")
    src.add_argument("--labels", type=Path, help="pre-aligned labels, one integer per line")
    p.add_argument("--user", help="user id to select when the CSV holds several")
    p.add_argument("--day", help="UTC start of a one-day session range when no --config is given")
    p.add_argument("--timeout", type=float, default=120.0)


def build_parser() -> argparse.ArgumentParser:
    common = _common(top=False)
    parser = argparse.ArgumentParser(prog="bct", description=__doc__.splitlines()[0], parents=[_common(top=True)])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dealer", parents=[common], help="serve correlated keys")
    p.add_argument("--listen", required=True, metavar="HOST:PORT")

    p = sub.add_parser("sender", parents=[common], help="answer one session with the case database")
    _party(p)
    p.add_argument("--listen", required=True, metavar="HOST:PORT")

    p = sub.add_parser("receiver", parents=[common], help="run one session and print the match count")
    _party(p)
    p.add_argument("--peer", required=True, metavar="HOST:PORT", help="sender address")

    p = sub.add_parser("estimate", parents=[common], help="key and traffic volume")
    p.add_argument("--population", type=int)
    p.add_argument("--cases", type=int)
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--key-bytes", type=float, default=estimator.FITTED_KEY_BYTES)
    p.add_argument("--comm-bytes", type=float, default=estimator.FITTED_COMM_BYTES)
    p.add_argument("--table", action="store_true", help="print the six reference scenarios")

    p = sub.add_parser("verify", parents=[common], help="security and statistics checks")
    vsub = p.add_subparsers(dest="check", required=True)
    v = vsub.add_parser("security", parents=[common])
    v.add_argument("--modulus", type=int, default=5)
    v.add_argument("--n", type=int, default=2)
    v.add_argument("--pairs", type=int, default=10)
    v = vsub.add_parser("uniformity", parents=[common])
    v.add_argument("--trials", type=int, default=100_000)
    v = vsub.add_parser("correctness", parents=[common])
    v.add_argument("--trials", type=int, default=10_000)
    v.add_argument("--max-n", type=int, default=512)

    p = sub.add_parser("grid", parents=[common], help="inspect the tessellation")
    gsub = p.add_subparsers(dest="op", required=True)
    for name in ("quantize", "expand"):
        g = gsub.add_parser(name, parents=[common])
        g.add_argument("--lat", type=float, required=True)
        g.add_argument("--lon", type=float, required=True)
        g.add_argument("--time", default="0", help="epoch seconds or ISO-8601 UTC")
    g = gsub.add_parser("encode", parents=[common])
    g.add_argument("--ix", type=int, required=True)
    g.add_argument("--iy", type=int, required=True)
    g = gsub.add_parser("constants", parents=[common])
    g.add_argument("--lat", type=float, required=True)
    return parser


def _rng(args):
    if args.seed is not None:
        if not args.insecure_test_mode:
            raise UsageError("--seed requires --insecure-test-mode")
        log.warning("insecure test mode: deterministic randomness")
        return SeededRandomSource(args.seed)
    return SystemRandomSource()


def _field(args) -> Field:
    return Field(args.field_modulus) if args.field_modulus else DEFAULT_FIELD


def _grid(args):
    if args.config is not None:
        return parse_config(args.config.read_text())
    return geo.GridConfig(), None, {}


def _emit(args, text: str, payload) -> None:
    print(json.dumps(payload) if args.format == "json" else text)


def _party_labels(args, role: str, field: Field) -> np.ndarray:
    if args.labels is not None:
        return field.asarray([int(tok) for tok in args.labels.read_text().split()])
    grid, rng, _ = _grid(args)
    if args.day is not None:
        rng = SessionRange.days(parse_timestamp(args.day), grid)
    if rng is None:
        raise UsageError("CSV input needs --config or --day to fix the session range")
    records, errors = parse_trail(args.input.read_text())
    users = split_by_user(records)
    if args.user is not None:
        records = users.get(args.user, [])
    elif len(users) > 1:
        raise UsageError(f"input holds {len(users)} users; pick one with --user")
    align = align_receiver if role == "receiver" else align_sender
    return align(records, grid, rng, field).labels


def cmd_dealer(args) -> int:
    run_dealer(Endpoint.parse(args.listen), _rng(args), _field(args))
    return 0


def cmd_sender(args) -> int:
    field = _field(args)
    run_sender(Endpoint.parse(args.dealer), Endpoint.parse(args.listen, Role.SENDER),
               _party_labels(args, "sender", field), args.session, field, args.timeout)
    return 0


def cmd_receiver(args) -> int:
    field = _field(args)
    n = run_receiver(Endpoint.parse(args.dealer), Endpoint.parse(args.peer, Role.SENDER),
                     _party_labels(args, "receiver", field), args.session, field, args.timeout)
    _emit(args, str(n), {"session": args.session, "matches": n})
    return 0


def cmd_estimate(args) -> int:
    if args.table:
        scenarios = estimator.default_scenarios()
    else:
        if args.population is None or args.cases is None:
            raise UsageError("estimate needs --population and --cases (or --table)")
        scenarios = [estimator.ScenarioParams(
            args.population, args.cases, days=args.days,
            key_bytes_per_position=args.key_bytes, comm_bytes_per_position=args.comm_bytes,
        )]
    print(estimator.table_report(scenarios, args.format))
    return 0


def cmd_verify(args) -> int:
    rng = _rng(args)
    if args.check == "security":
        results = harness.verify_security(args.modulus, args.n, args.pairs, rng)
    elif args.check == "uniformity":
        results = harness.verify_uniformity(args.trials, rng, _field(args))
    else:
        results = harness.verify_correctness(args.trials, args.max_n, rng, _field(args))
    ok = all(r.passed for r in results)
    if args.format == "json":
        print(json.dumps({"passed": ok, "checks": [r.__dict__ for r in results]}))
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  {r.detail}")
    return 0 if ok else 1


def cmd_grid(args) -> int:
    grid, _, _ = _grid(args)
    if args.op == "constants":
        c_lat, c_lon = geo.scaling_constants(args.lat)
        _emit(args, f"c_lat={c_lat:.5f} c_lon={c_lon:.5f}", {"c_lat": c_lat, "c_lon": c_lon})
        return 0
    if args.op == "encode":
        label = geo.encode_cell(geo.Cell(args.ix, args.iy, 0), _field(args))
        _emit(args, str(label), {"label": label})
        return 0
    point = geo.GeoPoint(args.lat, args.lon, parse_timestamp(args.time))
    if args.op == "quantize":
        c = geo.quantize(point, grid)
        _emit(args, repr(c), {**c._asdict(), "label": geo.encode_cell(c)})
    else:
        cells = geo.expand_point(point, grid)
        _emit(args, "\n".join(map(repr, cells)), [c._asdict() for c in cells])
    return 0


COMMANDS = {
    "dealer": cmd_dealer,
    "sender": cmd_sender,
    "receiver": cmd_receiver,
    "estimate": cmd_estimate,
    "verify": cmd_verify,
    "grid": cmd_grid,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is not None and not args.insecure_test_mode:
            raise UsageError("--seed requires --insecure-test-mode")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(json.dumps({"error": "UsageError", "message": str(exc)}), file=sys.stderr)
        return 2
    except (BCTError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
