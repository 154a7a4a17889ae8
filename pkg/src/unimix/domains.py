"""Problem-class embeddings as chronological-model constructors.

Covers sequence prediction (SP), strategic games against a minimax opponent
(SG), function minimization (FM), relation/example learning (EX), and the
demonstration environments heaven-hell, only-one, and the lazy-rest world.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .core import Action, Alphabet, History, Percept
from .models import (
    ChronologicalModel,
    FunctionalEnv,
    KernelEnv,
    MixtureModel,
)

# --- Sequence prediction ----------------------------------------------------


def make_sp_env(mu_sp: Dict[Tuple[int, ...], Fraction]) -> MixtureModel:
    """Prediction environment: reward 1 iff the action matches the next bit.

    ``mu_sp`` is a proper distribution over equal-length bit sequences; the
    percept carries no observation (the reward already reveals the bit).
    Beyond the sequence length the bit is fixed to 0.
    """
    if not mu_sp:
        raise ValueError("empty sequence distribution")
    lengths = {len(z) for z in mu_sp}
    if len(lengths) != 1:
        raise ValueError("all sequences must share one length")
    if sum(mu_sp.values(), Fraction(0)) != 1:
        raise ValueError("sequence distribution must sum to 1")
    alphabet = Alphabet(num_actions=2, num_observations=1, rewards=(Fraction(0), Fraction(1)))

    def seq_env(z: Tuple[int, ...]) -> FunctionalEnv:
        def rule(h: History, y: Action) -> Percept:
            k = len(h)  # 0-based position of the bit being predicted
            bit = z[k] if k < len(z) else 0
            return Percept(Fraction(1) if y == bit else Fraction(0), 0)

        return FunctionalEnv(alphabet, rule)

    components = [
        (f"seq:{''.join(map(str, z))}", p, seq_env(z))
        for z, p in sorted(mu_sp.items())
        if p > 0
    ]
    return MixtureModel(components, alphabet, mode="semimeasure-class")


def sp_argmax(env: MixtureModel, h: History) -> int:
    """The standalone predictor: most probable next bit given the history.

    Ties break toward bit 0, matching the planner's action tie-break.
    """
    best_bit, best_p = 0, Fraction(-1)
    for bit in (0, 1):
        # predicting `bit` earns reward 1 exactly when the bit occurs
        p = env.cond_map(h, bit).get(Percept(Fraction(1), 0), Fraction(0))
        if p > best_p:
            best_bit, best_p = bit, p
    return best_bit


# --- Strategic games --------------------------------------------------------


@dataclass(frozen=True)
class GameSpec:
    """A fixed-length alternating game: we move, the opponent replies.

    ``leaf_values`` maps every complete move sequence (y1, o1, ..., yn, on)
    to a value already shifted into [0, r_max].
    """

    rounds: int
    num_moves: int
    num_replies: int
    leaf_values: Dict[Tuple[int, ...], Fraction]

    def __post_init__(self):
        if self.rounds < 1 or self.num_moves < 1 or self.num_replies < 1:
            raise ValueError("rounds and move counts must be >= 1")
        object.__setattr__(
            self,
            "leaf_values",
            {tuple(k): Fraction(v) for k, v in self.leaf_values.items()},
        )
        expected = (self.num_moves * self.num_replies) ** self.rounds
        if len(self.leaf_values) != expected:
            raise ValueError(f"need {expected} leaves, got {len(self.leaf_values)}")
        if any(v < 0 for v in self.leaf_values.values()):
            raise ValueError("leaf values must be shifted into [0, r_max]")

    def dumps(self) -> str:
        lines = [
            f"rounds={self.rounds}",
            f"moves={self.num_moves}",
            f"replies={self.num_replies}",
        ]
        for seq in sorted(self.leaf_values):
            lines.append(" ".join(map(str, seq)) + f" | {self.leaf_values[seq]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "GameSpec":
        header: Dict[str, str] = {}
        leaves: Dict[Tuple[int, ...], Fraction] = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "|" in line:
                seq, _, val = line.partition("|")
                leaves[tuple(int(t) for t in seq.split())] = Fraction(val.strip())
            else:
                k, _, v = line.partition("=")
                header[k.strip()] = v.strip()
        return cls(
            rounds=int(header["rounds"]),
            num_moves=int(header["moves"]),
            num_replies=int(header["replies"]),
            leaf_values=leaves,
        )


def game_value(g: GameSpec, prefix: Sequence[int] = ()) -> Fraction:
    """Exact minimax value of the position after the given move prefix."""
    prefix = tuple(prefix)
    if len(prefix) == 2 * g.rounds:
        return g.leaf_values[prefix]
    if len(prefix) % 2 == 0:  # our move: maximize
        return max(game_value(g, prefix + (y,)) for y in range(g.num_moves))
    return min(game_value(g, prefix + (o,)) for o in range(g.num_replies))


def minimax_move(g: GameSpec, prefix: Sequence[int]) -> int:
    """Lexicographically smallest optimal move at the given position."""
    prefix = tuple(prefix)
    if len(prefix) % 2 == 0:
        n, pick = g.num_moves, max
    else:
        n, pick = g.num_replies, min
    values = [game_value(g, prefix + (c,)) for c in range(n)]
    return values.index(pick(values))


def make_sg_env(g: GameSpec, episodes: int = 1) -> FunctionalEnv:
    """The game as an environment: a deterministic minimax opponent.

    Rewards are 0 except at the last round of each episode, where the shifted
    leaf value is paid.  With episodes > 1 the same game repeats, giving a
    factorizable environment with boundaries at multiples of ``rounds``.
    """
    values = sorted(set(g.leaf_values.values()) | {Fraction(0)})
    alphabet = Alphabet(
        num_actions=g.num_moves,
        num_observations=g.num_replies,
        rewards=tuple(values),
    )

    def rule(h: History, y: Action) -> Percept:
        k = len(h)  # completed cycles
        round_in_ep = k % g.rounds
        prefix: List[int] = []
        for yy, xx in h.cycles[k - round_in_ep :]:
            prefix += [yy, xx.observation]
        prefix.append(y)
        o = minimax_move(g, prefix)
        prefix.append(o)
        if round_in_ep == g.rounds - 1:
            return Percept(g.leaf_values[tuple(prefix)], o)
        return Percept(Fraction(0), o)

    env = FunctionalEnv(alphabet, rule)
    env.episode_boundaries = tuple(g.rounds * i for i in range(episodes + 1))
    return env


# --- Function minimization --------------------------------------------------


@dataclass(frozen=True)
class FunctionClassSpec:
    """A finite function class f: Y -> Z with a prior over its members."""

    num_actions: int
    z_values: Tuple[Fraction, ...]
    prior: Tuple[Tuple[Tuple[int, ...], Fraction], ...]  # (f as z-index tuple, prob)
    r_max: Fraction = Fraction(1)

    def __post_init__(self):
        zs = tuple(Fraction(z) for z in self.z_values)
        object.__setattr__(self, "z_values", zs)
        if list(zs) != sorted(set(zs)):
            raise ValueError("z_values must be strictly increasing")
        prior = tuple((tuple(f), Fraction(p)) for f, p in self.prior)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "r_max", Fraction(self.r_max))
        if sum((p for _, p in prior), Fraction(0)) != 1:
            raise ValueError("function prior must sum to 1")
        for f, _ in prior:
            if len(f) != self.num_actions or any(
                not (0 <= zi < len(zs)) for zi in f
            ):
                raise ValueError(f"malformed function table {f}")

    def reward_of(self, z_index: int) -> Fraction:
        """Affine map sending z_min to r_max and z_max to 0 (minimize z)."""
        zs = self.z_values
        if len(zs) == 1:
            return self.r_max
        return (zs[-1] - zs[z_index]) / (zs[-1] - zs[0]) * self.r_max

    def dumps(self) -> str:
        lines = [
            f"actions={self.num_actions}",
            "z=" + ",".join(str(z) for z in self.z_values),
            f"rmax={self.r_max}",
        ]
        for f, p in self.prior:
            lines.append(" ".join(map(str, f)) + f" | {p}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "FunctionClassSpec":
        header: Dict[str, str] = {}
        prior: List[Tuple[Tuple[int, ...], Fraction]] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "|" in line:
                f, _, p = line.partition("|")
                prior.append((tuple(int(t) for t in f.split()), Fraction(p.strip())))
            else:
                k, _, v = line.partition("=")
                header[k.strip()] = v.strip()
        return cls(
            num_actions=int(header["actions"]),
            z_values=tuple(Fraction(z) for z in header["z"].split(",")),
            prior=tuple(prior),
            r_max=Fraction(header.get("rmax", "1")),
        )


def uniform_function_class(
    num_actions: int, z_values: Sequence[Fraction]
) -> FunctionClassSpec:
    """All |Z|^|Y| functions, uniformly weighted."""
    nz = len(z_values)
    tables = []

    def walk(f: Tuple[int, ...]) -> None:
        if len(f) == num_actions:
            tables.append(f)
            return
        for zi in range(nz):
            walk(f + (zi,))

    walk(())
    p = Fraction(1, len(tables))
    return FunctionClassSpec(
        num_actions=num_actions,
        z_values=tuple(z_values),
        prior=tuple((f, p) for f in tables),
    )


def make_fm_env(c: FunctionClassSpec) -> MixtureModel:
    """Function minimization: query a point, observe its value, earn more for
    smaller values.  The latent function is drawn from the class prior."""
    rewards = tuple(sorted({c.reward_of(i) for i in range(len(c.z_values))}))
    alphabet = Alphabet(
        num_actions=c.num_actions,
        num_observations=len(c.z_values),
        rewards=rewards,
    )

    def f_env(f: Tuple[int, ...]) -> FunctionalEnv:
        def rule(h: History, y: Action) -> Percept:
            zi = f[y]
            return Percept(c.reward_of(zi), zi)

        return FunctionalEnv(alphabet, rule)

    components = [
        (f"f:{''.join(map(str, f))}", p, f_env(f)) for f, p in c.prior if p > 0
    ]
    return MixtureModel(components, alphabet, mode="semimeasure-class")


def fm_expected_z(
    env: MixtureModel, c: FunctionClassSpec, h: History, y: Action
) -> Fraction:
    """Posterior-expected function value at the queried point."""
    total = Fraction(0)
    for x, p in env.cond_map(h, y).items():
        total += p * c.z_values[x.observation]
    return total


# --- Relation / example learning -------------------------------------------

QUESTION = None  # presentation marker for "(z, ?)"


@dataclass(frozen=True)
class RelationSpec:
    """A relation R over Z x Y with a presentation distribution.

    Presentations are either examples (z, v) with (z, v) in R, or questions
    (z, QUESTION).  Wrong examples must carry probability 0.
    """

    num_z: int
    num_actions: int
    relation: FrozenSet[Tuple[int, int]]
    presentation: Tuple[Tuple[Tuple[int, Optional[int]], Fraction], ...]

    def __post_init__(self):
        object.__setattr__(self, "relation", frozenset(self.relation))
        pres = tuple(((z, v), Fraction(p)) for (z, v), p in self.presentation)
        object.__setattr__(self, "presentation", pres)
        if sum((p for _, p in pres), Fraction(0)) != 1:
            raise ValueError("presentation distribution must sum to 1")
        for (z, v), p in pres:
            if not (0 <= z < self.num_z):
                raise ValueError(f"z={z} outside range")
            if v is not None and (z, v) not in self.relation and p > 0:
                raise ValueError(f"wrong example ({z},{v}) must have probability 0")

    def obs_index(self, z: int, v: Optional[int]) -> int:
        """Flatten a presentation to an observation symbol."""
        slot = self.num_actions if v is None else v
        return z * (self.num_actions + 1) + slot


def make_ex_env(r: RelationSpec) -> KernelEnv:
    """Example/question environment: presentations are drawn independently
    each cycle; the action answers the previous cycle's presentation and is
    rewarded iff that was a question (z, ?) and (z, y) is in the relation.
    Examples (and the very first cycle) reward unconditionally."""
    alphabet = Alphabet(
        num_actions=r.num_actions,
        num_observations=r.num_z * (r.num_actions + 1),
        rewards=(Fraction(0), Fraction(1)),
    )

    def decode_obs(o: int) -> Tuple[int, Optional[int]]:
        z, slot = divmod(o, r.num_actions + 1)
        return z, (None if slot == r.num_actions else slot)

    def kernel(h: History, y: Action) -> Dict[Percept, Fraction]:
        if len(h) == 0:
            reward = Fraction(1)
        else:
            z_prev, v_prev = decode_obs(h.cycles[-1][1].observation)
            if v_prev is None:
                reward = Fraction(1) if (z_prev, y) in r.relation else Fraction(0)
            else:
                reward = Fraction(1)
        out: Dict[Percept, Fraction] = {}
        for (z, v), p in r.presentation:
            if p == 0:
                continue
            x = Percept(reward, r.obs_index(z, v))
            out[x] = out.get(x, Fraction(0)) + p
        return out

    return KernelEnv(alphabet, kernel)


def make_relation_mixture(
    specs: Sequence[Tuple[RelationSpec, Fraction]]
) -> MixtureModel:
    """A sigma-weighted mixture over relation environments."""
    envs = [(make_ex_env(r), Fraction(w)) for r, w in specs]
    alphabet = envs[0][0].alphabet
    if any(e.alphabet != alphabet for e, _ in envs):
        raise ValueError("all relation environments must share an alphabet")
    components = [(f"R{i}", w, e) for i, (e, w) in enumerate(envs)]
    return MixtureModel(components, alphabet, mode="semimeasure-class")


class ProductEpisodeModel(ChronologicalModel):
    """Independent fixed-length episodes: the environment forgets everything
    at each episode boundary, making the joint a product over episodes."""

    def __init__(self, episode_models: Sequence[ChronologicalModel], episode_length: int):
        if not episode_models or episode_length < 1:
            raise ValueError("need at least one episode of positive length")
        alphabet = episode_models[0].alphabet
        if any(m.alphabet != alphabet for m in episode_models):
            raise ValueError("all episodes must share an alphabet")
        self.alphabet = alphabet
        self.episodes = tuple(episode_models)
        self.episode_length = episode_length

    @property
    def boundaries(self) -> Tuple[int, ...]:
        return tuple(self.episode_length * i for i in range(len(self.episodes) + 1))

    def cond_map(self, h: History, y: Action):
        k = len(h)  # completed cycles
        ep, local = divmod(k, self.episode_length)
        if ep >= len(self.episodes):
            raise ValueError("history extends past the last episode")
        local_h = History(h.cycles[k - local :])
        return self.episodes[ep].cond_map(local_h, y)


# --- Demonstration environments --------------------------------------------

_BINARY = Alphabet(num_actions=2, num_observations=1, rewards=(Fraction(0), Fraction(1)))


def make_heavenhell(i: int) -> FunctionalEnv:
    """The first action decides everything: match i and every reward is 1,
    miss and every reward is 0.  Absorbing after cycle 1."""
    if i not in (0, 1):
        raise ValueError("i must be 0 or 1")

    def rule(h: History, y: Action) -> Percept:
        first = h.cycles[0][0] if h.cycles else y
        return Percept(Fraction(1) if first == i else Fraction(0), 0)

    return FunctionalEnv(_BINARY, rule)


def make_onlyone(n: int, y_star: Action) -> FunctionalEnv:
    """Reward 1 exactly for the single correct action among n."""
    if not (0 <= y_star < n):
        raise ValueError("y_star must lie in [0, n)")
    alphabet = Alphabet(num_actions=n, num_observations=1, rewards=(Fraction(0), Fraction(1)))

    def rule(h: History, y: Action) -> Percept:
        return Percept(Fraction(1) if y == y_star else Fraction(0), 0)

    return FunctionalEnv(alphabet, rule)


def _ceil_sqrt(l: int) -> int:
    return math.isqrt(l - 1) + 1


def lazy_reward(actions: Sequence[int], k: int) -> bool:
    """Whether resting (action 1) at cycle k pays off.

    True iff some earlier all-zero work run of length ceil(sqrt(l)) ends
    exactly l cycles before k, entirely within cycles 1..k-1.  (Action 0 is
    work, action 1 is rest; actions is 1-cycle-indexed via actions[j-1].)
    """
    if actions[k - 1] != 1:
        return False
    for l in range(1, k):
        end = k - l
        start = end - _ceil_sqrt(l) + 1
        if start < 1:
            continue
        if all(actions[j - 1] == 0 for j in range(start, end + 1)):
            return True
    return False


def make_lazy(m: int) -> FunctionalEnv:
    """The rest-after-work world: work runs of length ceil(sqrt(l)) license
    rest l cycles later; only rest on a license earns reward."""
    if m < 2:
        raise ValueError("lifetime m >= 2 required")

    def rule(h: History, y: Action) -> Percept:
        actions = list(h.actions()) + [y]
        k = len(actions)
        return Percept(Fraction(1) if lazy_reward(actions, k) else Fraction(0), 0)

    env = FunctionalEnv(_BINARY, rule)
    env.lifetime = m
    return env
