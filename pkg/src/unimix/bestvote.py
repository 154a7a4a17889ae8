"""The time/length-bounded best-vote agent.

Candidates are extended policies that emit a self-rated value claim w
alongside each action.  Every cycle each claim is checked against the
candidate's exactly-computed mixture value; over-claims are clamped to zero
and the action of the highest surviving claim is played.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .core import (
    Action,
    EMPTY_HISTORY,
    FixedHorizon,
    History,
    HorizonPolicy,
    Percept,
    append_cycle,
    discounted_reward,
    horizon_end,
)
from .models import ChronologicalModel, UndefinedConditionalError
from .planner import sample_percept
from .vm import (
    MachineState,
    Program,
    RunBudget,
    consistent_envs,
    enumerate_programs,
    env_cycle,
    run_cycle,
)


@dataclass(frozen=True)
class Claim:
    """A candidate's self-rating for the coming cycle: value estimate + action."""

    w: Fraction
    y: Action
    timed_out: bool = False
    steps_used: int = 0

    def __post_init__(self):
        object.__setattr__(self, "w", Fraction(self.w))
        if self.w < 0:
            raise ValueError("claims must be nonnegative")


class ExtendedCandidate:
    """A claim-emitting policy: either a bytecode program (two outputs per
    cycle: the claim, then the action) or a pure oracle function of the
    history.  Runtime state is incremental across cycles."""

    def __init__(
        self,
        label: str,
        sort_key: tuple,
        program: Optional[Program] = None,
        oracle: Optional[Callable[[History], Claim]] = None,
    ):
        if (program is None) == (oracle is None):
            raise ValueError("exactly one of program/oracle required")
        self.label = label
        self.sort_key = sort_key
        self.program = program
        self.oracle = oracle
        self.reset()

    @classmethod
    def from_program(cls, p: Program) -> "ExtendedCandidate":
        return cls(p.to_hex(), (0, p.code), program=p)

    @classmethod
    def from_oracle(
        cls, label: str, fn: Callable[[History], Claim], rank: int = 0
    ) -> "ExtendedCandidate":
        # oracles sort after all bytecode candidates, then by rank
        return cls(label, (1, rank), oracle=fn)

    def reset(self) -> None:
        self.state = MachineState()
        self.cycles_run = 0
        self.last_claim: Optional[Claim] = None
        self.alive = True

    def fresh(self) -> "ExtendedCandidate":
        return ExtendedCandidate(
            self.label, self.sort_key, program=self.program, oracle=self.oracle
        )


def run_candidate_cycle(
    c: ExtendedCandidate, h: History, budget: RunBudget, alphabet
) -> Claim:
    """Advance the candidate one cycle on the history so far.

    Incremental: the candidate must have been stepped on exactly the previous
    cycles.  A budget timeout yields the flagged (w=0, y=0) claim.
    """
    if not c.alive:
        raise ValueError("candidate is not alive")
    if c.cycles_run != len(h):
        raise ValueError(
            f"candidate has run {c.cycles_run} cycles but history has {len(h)}"
        )
    if c.oracle is not None:
        claim = c.oracle(h)
    else:
        x_prev = h.percepts()[-1] if h.cycles else None
        obs = x_prev.observation if x_prev is not None else 0
        rew = alphabet.reward_index(x_prev) if x_prev is not None else 0
        res = run_cycle(c.program, c.state, obs, rew, budget, max_outputs=2)
        if res.timed_out:
            claim = Claim(Fraction(0), 0, timed_out=True, steps_used=res.steps_used)
        else:
            claim = Claim(
                Fraction(res.outputs[0]),
                res.outputs[1] % alphabet.num_actions,
                steps_used=res.steps_used,
            )
    c.cycles_run += 1
    c.last_claim = claim
    return claim


def replay_candidate(
    c: ExtendedCandidate, h: History, budget: RunBudget, alphabet
) -> Claim:
    """From-scratch claim at cycle len(h)+1 after the given history."""
    cc = c.fresh()
    claim = run_candidate_cycle(cc, EMPTY_HISTORY, budget, alphabet)
    for i in range(1, len(h) + 1):
        claim = run_candidate_cycle(cc, History(h.cycles[:i]), budget, alphabet)
    return claim


def _ext_rollout_value(
    c: ExtendedCandidate,
    q: Program,
    k: int,
    m: int,
    h: History,
    budget: RunBudget,
    alphabet,
    horizon: Optional[HorizonPolicy],
) -> Fraction:
    """Reward sum of (candidate, environment-program) from cycle k, with the
    history's actions forced over the past."""
    cc = c.fresh()
    qs = MachineState()
    for i, (y, _) in enumerate(h.cycles):
        run_candidate_cycle(cc, History(h.cycles[:i]), budget, alphabet)
        env_cycle(q, qs, y, budget, alphabet)
    hist = h
    total = Fraction(0)
    for t in range(k, m + 1):
        claim = run_candidate_cycle(cc, hist, budget, alphabet)
        x, _, _, env_timeout = env_cycle(q, qs, claim.y, budget, alphabet)
        if env_timeout:
            break
        r = x.reward if horizon is None else discounted_reward(horizon, t, x.reward)
        total += r
        hist = append_cycle(hist, claim.y, x)
    return total


def candidate_value(
    c: ExtendedCandidate,
    env_pool: Sequence[Program],
    k: int,
    m: int,
    h: History,
    budget: RunBudget,
    alphabet,
    horizon: Optional[HorizonPolicy] = None,
) -> Fraction:
    """The candidate's exact mixture value over the consistent environments."""
    hat_q = consistent_envs(env_pool, h, budget, alphabet)
    if not hat_q:
        raise UndefinedConditionalError("no environment program matches the history")
    num = Fraction(0)
    den = Fraction(0)
    for q in hat_q:
        den += q.weight
        num += q.weight * _ext_rollout_value(c, q, k, m, h, budget, alphabet, horizon)
    return num / den


def validate_claim(
    c: ExtendedCandidate,
    claim: Claim,
    h: History,
    env_pool: Sequence[Program],
    budget: RunBudget,
    alphabet,
    m_k: int,
    horizon: Optional[HorizonPolicy] = None,
) -> bool:
    """True iff the claim never overrates the candidate: w <= its exact value."""
    k = len(h) + 1
    try:
        v = candidate_value(c, env_pool, k, m_k, h, budget, alphabet, horizon)
    except UndefinedConditionalError:
        return False
    return claim.w <= v


@dataclass(frozen=True)
class SelectionRow:
    cycle: int
    candidate: str
    claimed_w: Fraction
    valid: bool
    selected: bool
    action: Action
    steps_used: int


def best_vote_cycle(
    candidates: Sequence[ExtendedCandidate],
    h: History,
    env_pool: Sequence[Program],
    budget: RunBudget,
    alphabet,
    m_k: int,
    horizon: Optional[HorizonPolicy] = None,
) -> Tuple[Action, List[SelectionRow]]:
    """One round of claims, validation, clamping, and selection."""
    if not candidates:
        raise ValueError("no candidates")
    k = len(h) + 1
    entries = []
    for c in candidates:
        claim = run_candidate_cycle(c, h, budget, alphabet)
        valid = validate_claim(c, claim, h, env_pool, budget, alphabet, m_k, horizon)
        w_eff = claim.w if valid else Fraction(0)
        entries.append((c, claim, valid, w_eff))
    best = None
    for entry in sorted(entries, key=lambda e: e[0].sort_key):
        if best is None or entry[3] > best[3]:
            best = entry
    rows = [
        SelectionRow(k, c.label, claim.w, valid, c is best[0], claim.y, claim.steps_used)
        for c, claim, valid, _ in entries
    ]
    return best[1].y, rows


def selection_log_csv(rows: Sequence[SelectionRow]) -> str:
    lines = ["cycle,candidate,claimed_w,valid,selected,action,steps_used"]
    for r in rows:
        lines.append(
            f"{r.cycle},{r.candidate},{r.claimed_w},{int(r.valid)},"
            f"{int(r.selected)},{r.action},{r.steps_used}"
        )
    return "\n".join(lines) + "\n"


def run_best_vote(
    l_max: int,
    budget: RunBudget,
    env: ChronologicalModel,
    lifetime: int,
    horizon: Optional[HorizonPolicy] = None,
    seed: int = 0,
    extra_candidates: Sequence[ExtendedCandidate] = (),
) -> Tuple[History, List[SelectionRow]]:
    """Full best-vote run: enumerate candidates and environment pool at the
    given bounds, then interact with env for `lifetime` cycles."""
    pool = enumerate_programs(l_max)
    candidates = [ExtendedCandidate.from_program(p) for p in pool] + [
        c.fresh() for c in extra_candidates
    ]
    alphabet = env.alphabet
    hpol = horizon if horizon is not None else FixedHorizon(lifetime)
    rng = random.Random(seed)
    h = EMPTY_HISTORY
    log: List[SelectionRow] = []
    for k in range(1, lifetime + 1):
        m_k = horizon_end(hpol, k, lifetime)
        y, rows = best_vote_cycle(candidates, h, pool, budget, alphabet, m_k, horizon)
        log.extend(rows)
        x = sample_percept(rng, env.cond_map(h, y), alphabet)
        h = append_cycle(h, y, x)
    return h, log


def make_composite(
    members: Sequence[ExtendedCandidate],
    env_pool: Sequence[Program],
    budget: RunBudget,
    alphabet,
    lifetime: int,
    horizon: Optional[HorizonPolicy] = None,
) -> ExtendedCandidate:
    """The best-vote agent itself, packaged as an oracle candidate.

    Its claim at each history is the highest validated member claim (computed
    from scratch), paired with that member's action.
    """
    hpol = horizon if horizon is not None else FixedHorizon(lifetime)

    def oracle(h: History) -> Claim:
        k = len(h) + 1
        m_k = horizon_end(hpol, k, lifetime)
        best = None
        for c in sorted(members, key=lambda c: c.sort_key):
            claim = replay_candidate(c, h, budget, alphabet)
            valid = validate_claim(c, claim, h, env_pool, budget, alphabet, m_k, horizon)
            w_eff = claim.w if valid else Fraction(0)
            if best is None or w_eff > best[0]:
                best = (w_eff, claim.y)
        return Claim(best[0], best[1])

    return ExtendedCandidate.from_oracle("best-vote", oracle)


def validated_claim_weight(
    c: ExtendedCandidate,
    h: History,
    env_pool: Sequence[Program],
    budget: RunBudget,
    alphabet,
    m_k: int,
    horizon: Optional[HorizonPolicy] = None,
) -> Fraction:
    """The candidate's claim after clamping invalid claims to zero."""
    claim = replay_candidate(c, h, budget, alphabet)
    if validate_claim(c, claim, h, env_pool, budget, alphabet, m_k, horizon):
        return claim.w
    return Fraction(0)


def eff_intel_geq(
    c1: ExtendedCandidate,
    c2: ExtendedCandidate,
    depth: int,
    env_pool: Sequence[Program],
    budget: RunBudget,
    alphabet,
    lifetime: Optional[int] = None,
) -> bool:
    """Effective intelligence order: c1's validated claim dominates c2's on
    every history of up to `depth`-1 completed cycles, exhaustively."""
    life = lifetime if lifetime is not None else depth

    def walk(h: History) -> bool:
        k = len(h) + 1
        m_k = min(life, max(k, life))
        w1 = validated_claim_weight(c1, h, env_pool, budget, alphabet, m_k)
        w2 = validated_claim_weight(c2, h, env_pool, budget, alphabet, m_k)
        if w1 < w2:
            return False
        if len(h) < depth - 1:
            for y in alphabet.actions():
                for x in alphabet.percepts():
                    if not walk(append_cycle(h, y, x)):
                        return False
        return True

    return walk(EMPTY_HISTORY)
