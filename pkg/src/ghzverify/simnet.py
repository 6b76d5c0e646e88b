"""Session harness: the Verifier, parties and source exchanging messages over
an ideal classical network, with loss caps and cheat-detection audits.

Each round the Verifier samples an assignment, sends one angle per party,
collects one outcome (or loss declaration) per party, and scores the round.
Message delivery order within a round is randomized from a dedicated seeded
stream; outcome sampling uses the same per-round streams as the protocol
module, so a session's statistics coincide with
``protocol.estimate_pass_probability`` under the same seed, and the Verifier's
scoring depends only on the set of collected responses, not their order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import stats as scipy_stats

from . import sources
from .protocol import (
    HONEST,
    LOSS,
    PassStats,
    ProtocolKind,
    RoundRecord,
    round_rng,
    run_round,
)
from .qstate import DensityMatrix, PureState

BROADCAST = -1

AUDIT_MIN_LOSSES = 100
AUDIT_SIGNIFICANCE = 0.01


@dataclass(frozen=True)
class AngleMsg:
    round: int
    party: int
    theta: float
    sender: int
    receiver: int

    def to_json_dict(self) -> dict:
        return {
            "type": "angle",
            "round": self.round,
            "party": self.party,
            "theta": self.theta,
            "sender": self.sender,
            "receiver": self.receiver,
        }


@dataclass(frozen=True)
class OutcomeMsg:
    round: int
    party: int
    outcome: Union[int, str]
    sender: int
    receiver: int

    def to_json_dict(self) -> dict:
        return {
            "type": "outcome",
            "round": self.round,
            "party": self.party,
            "outcome": self.outcome,
            "sender": self.sender,
            "receiver": self.receiver,
        }


@dataclass(frozen=True)
class AbortMsg:
    round: int
    reason: str
    sender: int
    receiver: int

    def to_json_dict(self) -> dict:
        return {
            "type": "abort",
            "round": self.round,
            "reason": self.reason,
            "sender": self.sender,
            "receiver": self.receiver,
        }


Message = Union[AngleMsg, OutcomeMsg, AbortMsg]


@dataclass(frozen=True)
class SessionConfig:
    """Everything needed to reproduce a session byte for byte."""

    n_parties: int
    kind: ProtocolKind
    rounds: int
    seed: int
    policies: tuple
    source: Union[sources.SourceModel, PureState, DensityMatrix, None] = None
    verifier: int = 0
    lambda_max: float = 0.5
    honest_loss: float = 0.0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("need at least one round")
        if not 0.0 <= self.lambda_max < 1.0:
            raise ValueError("lambda_max must lie in [0, 1)")
        if len(self.policies) != self.n_parties:
            raise ValueError("need one policy per party")
        if not 0 <= self.verifier < self.n_parties:
            raise ValueError("verifier index out of range")
        if self.policies[self.verifier] is not HONEST:
            raise ValueError("the Verifier must be honest")

    @classmethod
    def build(
        cls,
        n_parties: int,
        kind: ProtocolKind,
        rounds: int,
        seed: int,
        *,
        source=None,
        strategy=None,
        verifier: int = 0,
        lambda_max: float = 0.5,
        honest_loss: float = 0.0,
    ) -> "SessionConfig":
        """Place ``strategy`` (if any) on the last ``dishonest_count`` parties."""
        if strategy is None:
            policies = (HONEST,) * n_parties
        else:
            d = strategy.dishonest_count
            policies = (HONEST,) * (n_parties - d) + (strategy,) * d
        return cls(
            n_parties=n_parties,
            kind=ProtocolKind(kind),
            rounds=rounds,
            seed=seed,
            policies=policies,
            source=source,
            verifier=verifier,
            lambda_max=lambda_max,
            honest_loss=honest_loss,
        )

    def dishonest_parties(self) -> tuple[int, ...]:
        return tuple(j for j, p in enumerate(self.policies) if p is not HONEST)

    def describe(self) -> dict:
        if isinstance(self.source, sources.SourceModel):
            source_key = self.source.key()
        elif self.source is None:
            source_key = None
        else:
            source_key = f"<state:{self.source.n} qubits>"
        dishonest = self.dishonest_parties()
        return {
            "n_parties": self.n_parties,
            "verifier": self.verifier,
            "protocol": ProtocolKind(self.kind).value,
            "rounds": self.rounds,
            "seed": self.seed,
            "lambda_max": self.lambda_max,
            "honest_loss": self.honest_loss,
            "source": source_key,
            "strategy": self.policies[dishonest[0]].name if dishonest else None,
            "dishonest_parties": list(dishonest),
        }


@dataclass(frozen=True)
class PartyAudit:
    """Result of one party's loss-pattern test."""

    party: int
    losses: int
    status: str  # "ok" | "flagged" | "insufficient-data"
    test: str | None = None
    p_value: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "party": self.party,
            "losses": self.losses,
            "status": self.status,
            "test": self.test,
            "p_value": self.p_value,
        }


@dataclass(frozen=True)
class Transcript:
    """Ordered message log plus everything derived from it."""

    config: SessionConfig
    messages: tuple[Message, ...]
    records: tuple[RoundRecord, ...]
    stats: PassStats
    loss_flags: tuple[bool, ...]
    audits: dict = field(default_factory=dict)

    def messages_jsonl(self) -> str:
        return "\n".join(
            json.dumps(m.to_json_dict(), sort_keys=True, separators=(",", ":"))
            for m in self.messages
        )

    def records_jsonl(self) -> str:
        return "\n".join(r.to_json_line() for r in self.records)

    def summary_dict(self, verdict=None) -> dict:
        doc = {
            "config": self.config.describe(),
            "stats": self.stats.to_json_dict(),
            "loss_cap": {
                "lambda_max": self.config.lambda_max,
                "flags": list(self.loss_flags),
                "violated": any(self.loss_flags),
            },
            "audits": {str(p): a.to_json_dict() for p, a in sorted(self.audits.items())},
        }
        if verdict is not None:
            doc["verdict"] = verdict.to_json_dict()
        return doc

    def summary_json(self, verdict=None) -> str:
        return json.dumps(self.summary_dict(verdict), sort_keys=True, indent=2)


def _audit_party(
    records: Sequence[RoundRecord], kind: ProtocolKind, party: int
) -> PartyAudit:
    lost_angles = []
    kept_angles = []
    for rec in records:
        angle = rec.assignment.angles[party]
        if rec.outcomes[party] == LOSS:
            lost_angles.append(angle)
        else:
            kept_angles.append(angle)
    losses = len(lost_angles)
    if losses < AUDIT_MIN_LOSSES:
        return PartyAudit(party, losses, "insufficient-data")
    if kind is ProtocolKind.XY:
        # independence of declared loss and requested basis
        table = np.zeros((2, 2))
        for angles, col in ((lost_angles, 0), (kept_angles, 1)):
            for a in angles:
                table[int(a > np.pi / 4), col] += 1
        if table.sum(axis=0).min() == 0 or table.sum(axis=1).min() == 0:
            return PartyAudit(party, losses, "ok", "chi-square", 1.0)
        result = scipy_stats.chi2_contingency(table, correction=False)
        p = float(result.pvalue)
        status = "flagged" if p < AUDIT_SIGNIFICANCE else "ok"
        return PartyAudit(party, losses, status, "chi-square", p)
    # uniformity of the angles on which loss was declared
    ks = scipy_stats.kstest(lost_angles, scipy_stats.uniform(loc=0.0, scale=np.pi).cdf)
    p = float(ks.pvalue)
    status = "flagged" if p < AUDIT_SIGNIFICANCE else "ok"
    return PartyAudit(party, losses, status, "kolmogorov-smirnov", p)


def audit_records(records: Sequence[RoundRecord], kind: ProtocolKind) -> dict:
    kind = ProtocolKind(kind)
    n = records[0].assignment.n if records else 0
    return {party: _audit_party(records, kind, party) for party in range(n)}


def audit_loss_pattern(transcript: Transcript) -> dict:
    """Per-party loss-pattern tests at 1% significance.

    xy sessions get a chi-square independence test of loss against requested
    basis; theta sessions get a Kolmogorov-Smirnov uniformity test of the
    loss-conditioned angles.  Parties with fewer than 100 declared losses are
    reported as insufficient data.
    """
    return audit_records(transcript.records, transcript.config.kind)


def _round_messages(
    rec: RoundRecord, verifier: int, net: np.random.Generator
) -> list[Message]:
    n = rec.assignment.n
    msgs: list[Message] = []
    for j in net.permutation(n):
        msgs.append(
            AngleMsg(rec.index, int(j), rec.assignment.angles[j], verifier, int(j))
        )
    for j in net.permutation(n):
        msgs.append(OutcomeMsg(rec.index, int(j), rec.outcomes[j], int(j), verifier))
    if rec.passed is None:
        msgs.append(AbortMsg(rec.index, "loss-declared", verifier, BROADCAST))
    return msgs


def run_session(config: SessionConfig) -> Transcript:
    """Execute a full session and return its transcript.

    The per-round quantum sampling uses the protocol module's per-round
    streams, so the resulting PassStats match a direct Monte Carlo estimate
    with the same seed.  At session end each party's loss rate is checked
    against the cap: a party exceeding lambda_max by more than three binomial
    standard deviations is flagged.  Loss-pattern audits run for every party.
    """
    state = (
        sources.prepare(config.source)
        if isinstance(config.source, sources.SourceModel)
        else config.source
    )
    messages: list[Message] = []
    records: list[RoundRecord] = []
    for i in range(config.rounds):
        rec = run_round(
            state,
            config.policies,
            config.kind,
            round_rng(config.seed, i),
            honest_loss=config.honest_loss,
            index=i,
        )
        records.append(rec)
        net = np.random.default_rng((config.seed, i, 0xA11CE))
        messages.extend(_round_messages(rec, config.verifier, net))

    stats = PassStats.from_records(records)
    cap = config.lambda_max
    spread = 3.0 * float(np.sqrt(cap * (1.0 - cap) / config.rounds))
    flags = tuple(bool(rate > cap + spread) for rate in stats.loss_rates)
    audits = audit_records(records, config.kind)
    return Transcript(
        config=config,
        messages=tuple(messages),
        records=tuple(records),
        stats=stats,
        loss_flags=flags,
        audits=audits,
    )
