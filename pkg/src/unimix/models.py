"""Chronological (semi)measures over percept sequences given actions.

A model maps a history plus a pending action to a (possibly sub-normalized)
distribution over the next percept.  Provided kinds: explicit tabular
environments, deterministic and stochastic rule-based environments, bytecode
programs replayed as deterministic measures, and weighted mixtures of any of
these.  All probability mass is exact rational.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .core import (
    Action,
    Alphabet,
    EMPTY_HISTORY,
    History,
    Percept,
    append_cycle,
    decode_history,
    encode_history,
)
from .vm import MachineState, Program, RunBudget, env_cycle, replay_env


class UndefinedConditionalError(ValueError):
    """Conditioning on a history the model assigns zero (or no) mass to."""


class ChronologicalModel:
    """Base class: subclasses supply ``alphabet`` and ``cond_map``."""

    alphabet: Alphabet

    def cond_map(self, h: History, y: Action) -> Dict[Percept, Fraction]:
        """Distribution over the next percept given h and pending action y.

        May be sub-normalized (semimeasure); missing percepts carry mass 0.
        """
        raise NotImplementedError

    def base_mass(self) -> Fraction:
        """Mass of the empty history (1 for proper measures)."""
        return Fraction(1)

    def joint(self, h: History) -> Fraction:
        """Chain-rule joint of a complete history."""
        if h.pending_action is not None:
            raise ValueError("joint of a history with a pending action")
        total = self.base_mass()
        ctx = EMPTY_HISTORY
        for y, x in h.cycles:
            if total == 0:
                return Fraction(0)
            total *= self.cond_map(ctx, y).get(x, Fraction(0))
            ctx = append_cycle(ctx, y, x)
        return total


def joint_prob(rho: ChronologicalModel, h: History) -> Fraction:
    return rho.joint(h)


def cond_prob(rho: ChronologicalModel, h: History, y: Action, x: Percept) -> Fraction:
    if rho.joint(h) == 0:
        raise UndefinedConditionalError(
            f"conditioning on zero-probability history {encode_history(h)!r}"
        )
    return rho.cond_map(h, y).get(x, Fraction(0))


def evidence_gap(rho: ChronologicalModel, h: History, y: Action) -> Fraction:
    """Per-context mass deficit 1 - sum_x rho(x | h, y).  Diagnostic only."""
    if rho.joint(h) == 0:
        raise UndefinedConditionalError("evidence gap of a zero-probability context")
    return Fraction(1) - sum(rho.cond_map(h, y).values(), Fraction(0))


def check_chronological(rho: ChronologicalModel, depth: int) -> bool:
    """True iff the next-percept marginal never depends on the pending action.

    Exhaustive over every context of up to ``depth`` cycles.
    """
    a = rho.alphabet

    def marginal(h: History, y: Action) -> Fraction:
        return sum(rho.cond_map(h, y).values(), Fraction(0))

    def walk(h: History, d: int) -> bool:
        sums = [marginal(h, y) for y in a.actions()]
        if any(s != sums[0] for s in sums):
            return False
        if d < depth:
            for y in a.actions():
                row = rho.cond_map(h, y)
                for x in a.percepts():
                    if row.get(x, Fraction(0)) > 0:
                        if not walk(append_cycle(h, y, x), d + 1):
                            return False
        return True

    return walk(EMPTY_HISTORY, 1)


# --- Concrete environment kinds --------------------------------------------


class TabularModel(ChronologicalModel):
    """Explicit conditional tables per context up to a depth; uniform beyond.

    ``rows`` maps a context key — the textual encoding of the history with its
    pending action — to a per-percept probability row in symbol order.  Every
    row must sum to 1 exactly.
    """

    def __init__(self, alphabet: Alphabet, depth: int, rows: Dict[str, Sequence[Fraction]]):
        if depth < 0:
            raise ValueError("depth >= 0 required")
        self.alphabet = alphabet
        self.depth = depth
        self.rows: Dict[str, Tuple[Fraction, ...]] = {}
        n = alphabet.num_percepts
        for key, row in rows.items():
            row = tuple(Fraction(p) for p in row)
            if len(row) != n:
                raise ValueError(f"row for {key!r} has {len(row)} entries, need {n}")
            if any(p < 0 for p in row) or sum(row) != 1:
                raise ValueError(f"row for {key!r} must be a probability vector")
            self.rows[key] = row

    def cond_map(self, h: History, y: Action) -> Dict[Percept, Fraction]:
        a = self.alphabet
        if len(h) < self.depth:
            key = encode_history(h.with_pending(y))
            row = self.rows.get(key)
            if row is not None:
                return {x: p for x, p in zip(a.percepts(), row) if p > 0}
        u = Fraction(1, a.num_percepts)
        return {x: u for x in a.percepts()}

    # -- plain-text table format: header key=value lines, then one line per
    #    context: `<history encoding with pending action> | p1 p2 ...`

    def dumps(self) -> str:
        a = self.alphabet
        lines = [
            f"actions={a.num_actions}",
            f"observations={a.num_observations}",
            "rewards=" + ",".join(str(r) for r in a.rewards),
            f"depth={self.depth}",
        ]
        for key in sorted(self.rows):
            lines.append(f"{key} | " + " ".join(str(p) for p in self.rows[key]))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "TabularModel":
        header: Dict[str, str] = {}
        rows: Dict[str, List[Fraction]] = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "|" in line:
                key, _, row = line.partition("|")
                rows[key.strip()] = [Fraction(tok) for tok in row.split()]
            else:
                k, _, v = line.partition("=")
                header[k.strip()] = v.strip()
        try:
            alphabet = Alphabet(
                num_actions=int(header["actions"]),
                num_observations=int(header["observations"]),
                rewards=tuple(Fraction(r) for r in header["rewards"].split(",")),
            )
            depth = int(header["depth"])
        except KeyError as e:
            raise ValueError(f"missing header field {e.args[0]}") from None
        for key in rows:
            decode_history(key)  # validates the context encoding
        return cls(alphabet, depth, rows)


def random_tabular(alphabet: Alphabet, depth: int, rng: random.Random) -> TabularModel:
    """A full random tabular environment: every context up to depth gets a row."""
    rows: Dict[str, List[Fraction]] = {}

    def row() -> List[Fraction]:
        weights = [rng.randint(0, 8) for _ in range(alphabet.num_percepts)]
        if sum(weights) == 0:
            weights[rng.randrange(alphabet.num_percepts)] = 1
        total = sum(weights)
        return [Fraction(w, total) for w in weights]

    def walk(h: History, d: int) -> None:
        if d >= depth:
            return
        for y in alphabet.actions():
            rows[encode_history(h.with_pending(y))] = row()
            for x in alphabet.percepts():
                walk(append_cycle(h, y, x), d + 1)

    walk(EMPTY_HISTORY, 0)
    return TabularModel(alphabet, depth, rows)


class FunctionalEnv(ChronologicalModel):
    """Deterministic environment defined by a rule (history, action) -> percept."""

    def __init__(self, alphabet: Alphabet, rule: Callable[[History, Action], Percept]):
        self.alphabet = alphabet
        self.rule = rule

    def cond_map(self, h: History, y: Action) -> Dict[Percept, Fraction]:
        return {self.rule(h, y): Fraction(1)}


class KernelEnv(ChronologicalModel):
    """Stochastic environment from a rule (history, action) -> percept distribution."""

    def __init__(
        self,
        alphabet: Alphabet,
        kernel: Callable[[History, Action], Dict[Percept, Fraction]],
    ):
        self.alphabet = alphabet
        self.kernel = kernel

    def cond_map(self, h: History, y: Action) -> Dict[Percept, Fraction]:
        return {x: Fraction(p) for x, p in self.kernel(h, y).items() if p != 0}


class ProgramEnv(ChronologicalModel):
    """A bytecode program replayed as a deterministic measure.

    A cycle that exhausts the step budget gets an all-zero conditional (the
    program drops out of every mixture it sits in from that point on).
    """

    def __init__(self, program: Program, budget: RunBudget, alphabet: Alphabet):
        self.program = program
        self.budget = budget
        self.alphabet = alphabet

    def cond_map(self, h: History, y: Action) -> Dict[Percept, Fraction]:
        _, ok, state = replay_env(self.program, h.actions(), self.budget, self.alphabet)
        if not ok:
            return {}
        x, _, _, timed_out = env_cycle(self.program, state, y, self.budget, self.alphabet)
        if timed_out:
            return {}
        return {x: Fraction(1)}

    def joint(self, h: History) -> Fraction:
        percepts, ok, _ = replay_env(self.program, h.actions(), self.budget, self.alphabet)
        return Fraction(1) if ok and percepts == h.percepts() else Fraction(0)


# --- Mixtures ---------------------------------------------------------------


@dataclass(frozen=True)
class PosteriorState:
    """Unnormalized per-component posterior mass after a history."""

    labels: tuple
    weights: tuple
    masses: tuple

    @property
    def total(self) -> Fraction:
        return sum(self.masses, Fraction(0))

    def top(self) -> str:
        """Label of the heaviest component (first on ties)."""
        best = max(range(len(self.masses)), key=lambda i: (self.masses[i], -i))
        return self.labels[best]


class MixtureModel(ChronologicalModel):
    """Weighted mixture of component models; the computable stand-in for xi.

    ``mode`` is "program-class" (weights 2^-length over enumerated programs)
    or "semimeasure-class" (arbitrary weights summing to <= 1).
    """

    def __init__(
        self,
        components: Sequence[Tuple[str, Fraction, ChronologicalModel]],
        alphabet: Alphabet,
        mode: str = "semimeasure-class",
    ):
        if not components:
            raise ValueError("mixture needs at least one component")
        if mode not in ("program-class", "semimeasure-class"):
            raise ValueError(f"unknown mixture mode {mode!r}")
        weights = [Fraction(w) for _, w, _ in components]
        if any(w <= 0 for w in weights):
            raise ValueError("component weights must be positive")
        if sum(weights) > 1:
            raise ValueError("component weights must sum to <= 1")
        self.components = tuple(
            (label, Fraction(w), m) for (label, w, m) in components
        )
        self.alphabet = alphabet
        self.mode = mode
        self._joint_cache: Dict[History, Fraction] = {}

    def base_mass(self) -> Fraction:
        return sum((w for _, w, _ in self.components), Fraction(0))

    def joint(self, h: History) -> Fraction:
        if h.pending_action is not None:
            raise ValueError("joint of a history with a pending action")
        cached = self._joint_cache.get(h)
        if cached is None:
            cached = sum(
                (w * m.joint(h) for _, w, m in self.components), Fraction(0)
            )
            self._joint_cache[h] = cached
        return cached

    def cond_map(self, h: History, y: Action) -> Dict[Percept, Fraction]:
        jh = self.joint(h)
        if jh == 0:
            raise UndefinedConditionalError(
                "mixture conditional on a zero-mass history"
            )
        out: Dict[Percept, Fraction] = {}
        for x in self.alphabet.percepts():
            jx = self.joint(append_cycle(h, y, x))
            if jx > 0:
                out[x] = jx / jh
        return out


def build_mixture(
    pool: Sequence[Program], budget: RunBudget, alphabet: Alphabet
) -> MixtureModel:
    """Program-class mixture with weights 2^-length over an enumerated pool."""
    if not pool:
        raise ValueError("empty program pool")
    components = [
        (q.to_hex(), q.weight, ProgramEnv(q, budget, alphabet)) for q in pool
    ]
    return MixtureModel(components, alphabet, mode="program-class")


def posterior(m: MixtureModel, h: History) -> PosteriorState:
    """Unnormalized component masses weight * component-joint on h."""
    if m.joint(h) == 0:
        raise UndefinedConditionalError("posterior on a zero-mass history")
    labels, weights, masses = [], [], []
    for label, w, comp in m.components:
        labels.append(label)
        weights.append(w)
        masses.append(w * comp.joint(h))
    return PosteriorState(tuple(labels), tuple(weights), tuple(masses))


def weights_csv(m: MixtureModel, h: Optional[History] = None) -> str:
    """Component weights (and posterior masses after h) as CSV text."""
    lines = ["component,weight,mass"]
    if h is None:
        for label, w, _ in m.components:
            lines.append(f"{label},{w},{w}")
    else:
        ps = posterior(m, h)
        for label, w, mass in zip(ps.labels, ps.weights, ps.masses):
            lines.append(f"{label},{w},{mass}")
    return "\n".join(lines) + "\n"


def sq_distance_sum(
    m: MixtureModel,
    mu: ChronologicalModel,
    pi: Callable[[History], Action],
    n: int,
) -> Fraction:
    """Cumulative mu-expected squared prediction gap of the mixture over n cycles.

    Sum over t <= n and mu-possible histories of
    mu(h) * sum_x (m(x|h,y_t) - mu(x|h,y_t))^2 with actions supplied by pi.
    """
    a = mu.alphabet
    total = Fraction(0)

    def walk(h: History, mu_joint: Fraction, t: int) -> None:
        nonlocal total
        if t > n:
            return
        y = pi(h)
        mu_row = mu.cond_map(h, y)
        try:
            m_row = m.cond_map(h, y)
        except UndefinedConditionalError:
            m_row = {}
        for x in a.percepts():
            gap = m_row.get(x, Fraction(0)) - mu_row.get(x, Fraction(0))
            total += mu_joint * gap * gap
        for x, p in mu_row.items():
            walk(append_cycle(h, y, x), mu_joint * p, t + 1)

    walk(EMPTY_HISTORY, Fraction(1), 1)
    return total
