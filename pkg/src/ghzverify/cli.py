"""Command-line front end: run sessions, sweep loss grids and emit the data
files behind the verification analyses.

Subcommands: ``verify``, ``curves``, ``dishonest-angle-profile``, ``session``.
Numeric CSV output uses 17-significant-digit decimals so identical seeds and
configs reproduce output files byte for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import adversary, analytics, protocol, qstate, simnet, sources
from .protocol import HONEST, ProtocolKind


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def parse_strategy_key(key: str, n_parties: int, dishonest_count: int):
    """Parse ``name`` or ``name:lam=0.3,theta-prime=0.5`` into a strategy."""
    if key == "honest":
        return None
    name, _, spec = key.partition(":")
    kwargs = {}
    if spec:
        for item in spec.split(","):
            pkey, _, pval = item.partition("=")
            if not pval:
                raise CliError(f"malformed strategy parameter {item!r}")
            kwargs[pkey.strip().replace("-", "_")] = float(pval)
    try:
        return adversary.make_strategy(
            name, n_parties=n_parties, dishonest_count=dishonest_count, **kwargs
        )
    except (ValueError, TypeError) as exc:
        raise CliError(f"bad strategy {key!r}: {exc}") from exc


def _load_config_file(path: str) -> dict:
    """Key-value config lines (``key = value``, '#' comments); flags win."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise CliError(f"malformed config line {raw!r}")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _add_common(p: _Parser):
    p.add_argument("--config", help="key=value defaults file; flags override")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--rounds", type=int, default=6000)
    p.add_argument("--parties", type=int, default=3)
    p.add_argument("--protocol", choices=("theta", "xy"), default="theta")
    p.add_argument("--source", default="ideal-ghz", help="source model key")
    p.add_argument("--strategy", default="honest", help="strategy key or 'honest'")
    p.add_argument("--dishonest-count", type=int, default=1)
    p.add_argument("--lambda-max", type=float, default=0.5)
    p.add_argument("--honest-loss", type=float, default=0.0)
    p.add_argument(
        "--trust",
        choices=tuple(t.value for t in analytics.TrustModel),
        default=analytics.TrustModel.DISHONEST_ALLOWED.value,
    )
    p.add_argument("--assumed-loss", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=3.0)
    p.add_argument("--out", help="output path (or prefix for session)")
    p.add_argument("--format", choices=("json", "csv"), default=None)


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="ghzverify")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {}
    for name in ("verify", "curves", "dishonest-angle-profile", "session"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "curves":
            p.add_argument("--lambda-grid", default="0,0.1,0.2,0.3,0.4,0.5")
        if name == "dishonest-angle-profile":
            p.add_argument("--angle-points", type=int, default=32)
            p.add_argument("--theta-prime", type=float, default=0.0)
        commands[name] = p
    return parser, commands


def _write_or_print(text: str, out: str | None):
    if out is None:
        print(text)
    else:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _run_session(args) -> simnet.Transcript:
    strategy = parse_strategy_key(args.strategy, args.parties, args.dishonest_count)
    model = sources.from_key(args.source, args.parties)
    config = simnet.SessionConfig.build(
        args.parties,
        ProtocolKind(args.protocol),
        args.rounds,
        args.seed,
        source=model,
        strategy=strategy,
        lambda_max=args.lambda_max,
        honest_loss=args.honest_loss,
    )
    return simnet.run_session(config)


def cmd_verify(args) -> int:
    transcript = _run_session(args)
    stats = transcript.stats
    v = analytics.verdict(
        stats,
        ProtocolKind(args.protocol),
        analytics.TrustModel(args.trust),
        args.assumed_loss,
        args.sigma,
    )
    doc = transcript.summary_dict(verdict=v)
    doc["bounds"] = {
        "honest_fidelity": analytics.honest_fidelity_bound(stats.estimate),
        "dishonest_fidelity": analytics.dishonest_fidelity_bound(stats.estimate),
    }
    _write_or_print(json.dumps(doc, sort_keys=True, indent=2), args.out)
    print(
        f"verify: estimate={stats.estimate:.6f} +- {stats.stderr:.6f} "
        f"threshold={v.threshold:.6f} -> {v.decision}",
        file=sys.stderr,
    )
    return 0 if v.decision == "GME-VERIFIED" else 2


CURVE_COLUMNS = (
    "lambda",
    "theta_bound",
    "xy_bound",
    "simulated_theta_cheat",
    "simulated_theta_cheat_stderr",
    "simulated_xy_cheat",
    "simulated_xy_cheat_stderr",
)


def cmd_curves(args) -> int:
    grid = [float(x) for x in args.lambda_grid.split(",") if x.strip() != ""]
    if not grid:
        raise CliError("empty lambda grid")
    if any(not 0.0 <= lam < 1.0 for lam in grid):
        raise CliError("lambda grid must lie within [0, 1)")
    rows = []
    for i, lam in enumerate(grid):
        row = {"lambda": lam, "theta_bound": adversary.theta_cheat_pass_curve(lam)}
        strat = adversary.make_strategy("theta-rotated-bell", n_parties=args.parties, lam=lam)
        st = protocol.estimate_pass_probability(
            None,
            [HONEST] * (args.parties - 1) + [strat],
            ProtocolKind.THETA,
            args.rounds,
            np.random.default_rng((args.seed, 101, i)),
        )
        row["simulated_theta_cheat"] = st.estimate
        row["simulated_theta_cheat_stderr"] = st.stderr
        if lam <= 0.5:
            row["xy_bound"] = adversary.xy_cheat_pass_curve(lam)
            strat = adversary.make_strategy("xy-mixed", n_parties=args.parties, lam=lam)
            st = protocol.estimate_pass_probability(
                None,
                [HONEST] * (args.parties - 1) + [strat],
                ProtocolKind.XY,
                args.rounds,
                np.random.default_rng((args.seed, 202, i)),
            )
            row["simulated_xy_cheat"] = st.estimate
            row["simulated_xy_cheat_stderr"] = st.stderr
        rows.append(row)
    _emit_rows(rows, CURVE_COLUMNS, args)
    return 0


PROFILE_COLUMNS = ("theta", "optimal_pass", "simulated_pass", "simulated_stderr")


def _profile_point(theta_d: float, theta_prime: float, args) -> tuple[float, float]:
    """Simulated pass rate with the dishonest angle pinned to ``theta_d``."""
    n = args.parties
    # the guesser's state phase is -theta_prime so the pass probability is
    # (1 + |cos(theta_prime - theta_d)|)/2 at each requested angle
    strat = adversary.make_strategy(
        "product-guesser", n_parties=n, theta_prime=(-theta_prime) % (2 * math.pi)
    )
    passes = 0
    for i in range(args.rounds):
        rng = np.random.default_rng((args.seed, 303, round(theta_d * 1e9), i))
        free = rng.uniform(0.0, np.pi, n - 2)
        completion = (-(free.sum() + theta_d)) % np.pi
        angles = tuple(free) + (float(completion), float(theta_d))
        total = sum(angles)
        assignment = protocol.AngleAssignment(
            angles, ProtocolKind.THETA, int(round(total / np.pi)) % 2
        )
        side = strat.sample_side_info(rng, None)
        bits = qstate.sample_outcomes(side.honest_state, angles[:-1], rng)
        answer = strat.respond(side, (theta_d,))
        bits.append(answer)
        passes += protocol.parity_test(assignment, bits)
    est = passes / args.rounds
    return est, math.sqrt(est * (1.0 - est) / args.rounds)


def cmd_profile(args) -> int:
    if args.angle_points < 1:
        raise CliError("need at least one angle point")
    thetas = np.linspace(0.0, np.pi, args.angle_points, endpoint=False)
    rows = []
    for theta_d in thetas:
        optimal = 0.5 + 0.5 * abs(math.cos(args.theta_prime - theta_d))
        est, se = _profile_point(float(theta_d), args.theta_prime, args)
        rows.append(
            {
                "theta": float(theta_d),
                "optimal_pass": optimal,
                "simulated_pass": est,
                "simulated_stderr": se,
            }
        )
    _emit_rows(rows, PROFILE_COLUMNS, args)
    return 0


def cmd_session(args) -> int:
    transcript = _run_session(args)
    v = analytics.verdict(
        transcript.stats,
        ProtocolKind(args.protocol),
        analytics.TrustModel(args.trust),
        args.assumed_loss,
        args.sigma,
    )
    prefix = args.out or "session"
    base = Path(prefix)
    base.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.messages.jsonl").write_text(transcript.messages_jsonl() + "\n")
    Path(f"{prefix}.records.jsonl").write_text(transcript.records_jsonl() + "\n")
    Path(f"{prefix}.summary.json").write_text(transcript.summary_json(verdict=v) + "\n")
    flagged = [p for p, a in transcript.audits.items() if a.status == "flagged"]
    print(
        f"session: estimate={transcript.stats.estimate:.6f} "
        f"loss_rates={[f'{r:.3f}' for r in transcript.stats.loss_rates]} "
        f"audit_flags={flagged}",
        file=sys.stderr,
    )
    return 0


def _emit_rows(rows: list[dict], columns: tuple[str, ...], args):
    fmt = args.format or "csv"
    if fmt == "json":
        text = json.dumps(rows, sort_keys=True, indent=2)
    else:
        lines = [",".join(columns)]
        for row in rows:
            lines.append(
                ",".join(_fmt(row[c]) if c in row else "" for c in columns)
            )
        text = "\n".join(lines) + "\n"
    _write_or_print(text, args.out)


def main(argv=None) -> int:
    parser, commands = build_parser()
    try:
        # two-phase parse so --config supplies defaults that flags override
        probe = _Parser(add_help=False)
        probe.add_argument("--config")
        known, _ = probe.parse_known_args(argv if argv is not None else sys.argv[1:])
        if known.config:
            file_values = _load_config_file(known.config)
            for command in commands.values():
                defaults = {}
                for act in command._actions:
                    if act.dest in file_values:
                        raw = file_values[act.dest]
                        defaults[act.dest] = act.type(raw) if act.type else raw
                command.set_defaults(**defaults)
        args = parser.parse_args(argv)
        handler = {
            "verify": cmd_verify,
            "curves": cmd_curves,
            "dishonest-angle-profile": cmd_profile,
            "session": cmd_session,
        }[args.command]
        return handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
