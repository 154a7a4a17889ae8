"""Scenario runner: configs in, traces and reports out.

Configs are line-oriented ``key=value`` text.  Every number in a trace or
report originates in the planner/eval modules; the CLI only wires things
together.  Exit codes: 0 success, 1 validation error, 2 capacity error,
3 bound-check failure under --strict.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import __version__
from .bestvote import run_best_vote, selection_log_csv
from .core import (
    EMPTY_HISTORY,
    FixedHorizon,
    GeometricDiscount,
    History,
    HorizonPolicy,
    MovingHorizon,
    ProportionalHorizon,
    horizon_end,
)
from .domains import (
    FunctionClassSpec,
    GameSpec,
    make_fm_env,
    make_heavenhell,
    make_lazy,
    make_onlyone,
    make_sg_env,
    make_sp_env,
    uniform_function_class,
)
from .evaluate import BoundReport, CapacityError, summary_block
from .models import (
    MixtureModel,
    TabularModel,
    build_mixture,
    check_chronological,
    posterior,
)
from .planner import (
    ValueQuery,
    planning_policy,
    program_policy,
    run_interaction,
    sample_percept,
    value_opt,
)
from .vm import DecodeError, Program, RunBudget, enumerate_programs, kraft_sum

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CAPACITY = 2
EXIT_BOUND = 3

_SCENARIOS = ("heavenhell", "onlyone", "lazy", "sp", "sg", "fm", "tabular")
_AGENTS = ("informed", "mixture", "greedy", "best-vote", "program")


class ValidationError(ValueError):
    """Carries every violation found in a config, not just the first."""

    def __init__(self, violations: List[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass
class ScenarioConfig:
    scenario: str
    agent: str
    lifetime: int
    horizon: HorizonPolicy
    l_max: int
    steps: int
    seed: int
    extras: Dict[str, str] = field(default_factory=dict)
    source_text: str = ""

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def canonical(self) -> str:
        pairs = {
            "scenario": self.scenario,
            "agent": self.agent,
            "lifetime": str(self.lifetime),
            "horizon": _horizon_str(self.horizon),
            "l": str(self.l_max),
            "t": str(self.steps),
            "seed": str(self.seed),
            **dict(sorted(self.extras.items())),
        }
        return "\n".join(f"{k}={v}" for k, v in pairs.items()) + "\n"


def _horizon_str(h: HorizonPolicy) -> str:
    if isinstance(h, FixedHorizon):
        return f"fixed:{h.m}"
    if isinstance(h, MovingHorizon):
        return f"moving:{h.h}"
    if isinstance(h, ProportionalHorizon):
        return f"proportional:{h.beta}"
    return f"geometric:{h.gamma}:{h.m_cap}"


def parse_horizon(text: str) -> HorizonPolicy:
    kind, _, rest = text.partition(":")
    if kind == "fixed":
        return FixedHorizon(int(rest))
    if kind == "moving":
        return MovingHorizon(int(rest))
    if kind == "proportional":
        return ProportionalHorizon(Fraction(rest))
    if kind == "geometric":
        gamma, _, cap = rest.partition(":")
        return GeometricDiscount(Fraction(gamma), int(cap))
    raise ValueError(f"unknown horizon kind {kind!r}")


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate, collecting every violation before failing."""
    pairs: Dict[str, str] = {}
    violations: List[str] = []
    for idx, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            violations.append(f"line {idx}: expected key=value, got {line!r}")
            continue
        k, _, v = line.partition("=")
        pairs[k.strip()] = v.strip()

    def take(key: str, default: Optional[str] = None) -> Optional[str]:
        if key in pairs:
            return pairs.pop(key)
        if default is None:
            violations.append(f"missing required key {key!r}")
        return default

    scenario = take("scenario") or ""
    agent = take("agent", "informed")
    lifetime_s = take("lifetime") or "0"
    horizon_s = take("horizon", "")
    l_s = take("l", "6")
    t_s = take("t", "64")
    seed_s = take("seed", "0")

    if scenario and scenario not in _SCENARIOS:
        violations.append(f"unknown scenario {scenario!r} (choose from {_SCENARIOS})")
    if agent not in _AGENTS:
        violations.append(f"unknown agent kind {agent!r} (choose from {_AGENTS})")

    def to_int(name: str, s: str, lo: int, hi: int) -> int:
        try:
            v = int(s)
        except ValueError:
            violations.append(f"{name} must be an integer, got {s!r}")
            return lo
        if not (lo <= v <= hi):
            violations.append(f"{name}={v} outside [{lo}, {hi}]")
        return v

    lifetime = to_int("lifetime", lifetime_s, 1, 64)
    l_max = to_int("l", l_s, 1, 12)
    steps = to_int("t", t_s, 1, 4096)
    seed = to_int("seed", seed_s, 0, 2**31)

    if horizon_s:
        try:
            horizon = parse_horizon(horizon_s)
        except (ValueError, ZeroDivisionError) as e:
            violations.append(f"bad horizon {horizon_s!r}: {e}")
            horizon = FixedHorizon(max(1, lifetime))
    else:
        horizon = FixedHorizon(max(1, lifetime))

    if violations:
        raise ValidationError(violations)
    return ScenarioConfig(
        scenario=scenario,
        agent=agent,
        lifetime=lifetime,
        horizon=horizon,
        l_max=l_max,
        steps=steps,
        seed=seed,
        extras=pairs,
        source_text=text,
    )


def load_config(path: str) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


# --- Environment and agent wiring -------------------------------------------


def _build_env(cfg: ScenarioConfig):
    ex = cfg.extras
    if cfg.scenario == "heavenhell":
        return make_heavenhell(int(ex.get("i", "0")))
    if cfg.scenario == "onlyone":
        return make_onlyone(int(ex.get("n", "4")), int(ex.get("y_star", "0")))
    if cfg.scenario == "lazy":
        return make_lazy(cfg.lifetime)
    if cfg.scenario == "sp":
        mu = {}
        for item in ex.get("sequences", "").split(";"):
            if not item:
                continue
            bits, _, p = item.partition(":")
            mu[tuple(int(b) for b in bits)] = Fraction(p)
        if not mu:
            raise ValidationError(["sp scenario needs sequences=<bits:prob;...>"])
        return make_sp_env(mu)
    if cfg.scenario == "sg":
        spec = GameSpec.loads(Path(ex["env_file"]).read_text())
        return make_sg_env(spec, episodes=int(ex.get("episodes", "1")))
    if cfg.scenario == "fm":
        if ex.get("class") == "uniform16":
            spec = uniform_function_class(2, tuple(Fraction(z) for z in (1, 2, 3, 4)))
        else:
            spec = FunctionClassSpec.loads(Path(ex["env_file"]).read_text())
        return make_fm_env(spec)
    if cfg.scenario == "tabular":
        return TabularModel.loads(Path(ex["env_file"]).read_text())
    raise ValidationError([f"unknown scenario {cfg.scenario!r}"])


def _build_agent(cfg: ScenarioConfig, env):
    """Returns (policy, planning_model or None, mixture or None)."""
    budget = RunBudget(cfg.steps)
    if cfg.agent == "informed":
        return planning_policy(env, cfg.horizon, cfg.lifetime), env, None
    if cfg.agent == "greedy":
        return planning_policy(env, MovingHorizon(1), cfg.lifetime), env, None
    if cfg.agent == "mixture":
        xi = build_mixture(enumerate_programs(cfg.l_max), budget, env.alphabet)
        return planning_policy(xi, cfg.horizon, cfg.lifetime), xi, xi
    if cfg.agent == "program":
        hexcode = cfg.extras.get("program")
        if not hexcode:
            raise ValidationError(["agent=program needs program=<hex>"])
        p = Program.from_hex(hexcode)
        return program_policy(p, budget, env.alphabet), None, None
    raise ValidationError([f"agent kind {cfg.agent!r} not wired here"])


@dataclass
class RunArtifacts:
    trace_csv: str
    manifest: str
    results: str
    reports: List[BoundReport]
    selection_csv: Optional[str] = None


def run_scenario(cfg: ScenarioConfig) -> RunArtifacts:
    env = _build_env(cfg)
    budget = RunBudget(cfg.steps)
    reports: List[BoundReport] = []
    selection_csv = None

    if cfg.agent == "best-vote":
        h, log = run_best_vote(
            cfg.l_max, budget, env, cfg.lifetime, cfg.horizon, cfg.seed
        )
        selection_csv = selection_log_csv(log)
        model = None
        mixture = build_mixture(enumerate_programs(cfg.l_max), budget, env.alphabet)
    else:
        policy, model, mixture = _build_agent(cfg, env)
        h = run_interaction(policy, env, cfg.lifetime, cfg.seed)

    rows = ["cycle,action,observation,reward,planner_value,posterior_top"]
    for k in range(1, len(h) + 1):
        y, x = h.cycles[k - 1]
        prefix = History(h.cycles[: k - 1])
        if model is not None:
            hor = cfg.horizon if cfg.agent != "greedy" else MovingHorizon(1)
            m_k = horizon_end(hor, k, cfg.lifetime)
            v = value_opt(ValueQuery(model, prefix, k, m_k, hor))
            value_s = str(v)
        else:
            value_s = ""
        if mixture is not None and mixture.joint(prefix) > 0:
            top = posterior(mixture, prefix).top()
        else:
            top = ""
        rows.append(f"{k},{y},{x.observation},{x.reward},{value_s},{top}")
    trace_csv = "\n".join(rows) + "\n"

    total_reward = sum(h.rewards(), Fraction(0))
    manifest = (
        f"config_hash={cfg.config_hash()}\n"
        f"seed={cfg.seed}\n"
        f"version={__version__}\n"
        "config_begin\n" + cfg.canonical() + "config_end\n"
    )
    results_lines = [
        f"scenario={cfg.scenario}",
        f"agent={cfg.agent}",
        f"cycles={len(h)}",
        f"total_reward={total_reward}",
    ]
    for r in reports:
        results_lines.append(
            f"bound {'holds' if r.holds else 'FAILS'} lhs={r.lhs} rhs={r.rhs} ({r.context})"
        )
    results = "\n".join(results_lines) + "\n"
    return RunArtifacts(trace_csv, manifest, results, reports, selection_csv)


def emit_report(art: RunArtifacts) -> str:
    """Aggregate a finished run into a human-readable summary."""
    lines = [ln for ln in art.trace_csv.strip().splitlines()[1:]]
    if not lines:
        raise ValueError("empty trace")
    total = sum(Fraction(ln.split(",")[3]) for ln in lines)
    out = [art.results.rstrip(), f"trace_total_reward={total}"]
    if art.reports:
        out.append(summary_block(art.reports).rstrip())
    return "\n".join(out) + "\n"


# --- verify: the re-checkable invariant suite -------------------------------


def verify_invariants(l_max: int) -> List[BoundReport]:
    from .vm import decode

    reports: List[BoundReport] = []
    pool = enumerate_programs(l_max)
    ks = kraft_sum(pool)
    reports.append(
        BoundReport(ks, Fraction(1), ks <= 1, f"kraft sum at l={l_max}")
    )
    # prefix-freeness: decoding any valid code plus junk consumes only the code
    prefix_free = True
    for p in pool:
        q = decode(p.code + (1,))
        if q.code != p.code:
            prefix_free = False
            break
    reports.append(
        BoundReport(
            Fraction(0 if prefix_free else 1),
            Fraction(0),
            prefix_free,
            f"prefix-freeness at l={l_max}",
        )
    )
    hh = make_heavenhell(0)
    ok = check_chronological(hh, 3)
    reports.append(
        BoundReport(Fraction(0 if ok else 1), Fraction(0), ok, "heavenhell chronological at depth 3")
    )
    return reports


# --- argparse wiring ---------------------------------------------------------


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="unimix", description="universal-mixture agent scenario runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument("--strict", action="store_true")
    p_run.add_argument("--threads", type=int, default=1, help="advisory only")

    p_verify = sub.add_parser("verify", help="re-check invariant suites")
    p_verify.add_argument("--l", type=int, default=10, dest="l_max")
    p_verify.add_argument("--strict", action="store_true")
    p_verify.add_argument("--out", default=None)

    p_enum = sub.add_parser("enumerate", help="dump a program pool")
    p_enum.add_argument("--l", type=int, required=True, dest="l_max")
    p_enum.add_argument("--out", default=None)

    p_dis = sub.add_parser("disasm", help="disassemble a hex-coded program")
    p_dis.add_argument("program", help="program in <bits>:<hex> form")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ValidationError as e:
        for v in e.violations:
            print(f"validation error: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except DecodeError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return EXIT_CAPACITY


def _dispatch(args) -> int:
    if args.command == "run":
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        art = run_scenario(cfg)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "trace.csv").write_text(art.trace_csv)
            (out / "manifest.txt").write_text(art.manifest)
            (out / "results.txt").write_text(art.results)
            if art.selection_csv is not None:
                (out / "selection.csv").write_text(art.selection_csv)
        else:
            sys.stdout.write(art.trace_csv)
        sys.stdout.write(emit_report(art))
        if args.strict and any(not r.holds for r in art.reports):
            return EXIT_BOUND
        return EXIT_OK

    if args.command == "verify":
        reports = verify_invariants(args.l_max)
        text = summary_block(reports)
        sys.stdout.write(text)
        if args.out:
            Path(args.out).write_text(text)
        if args.strict and any(not r.holds for r in reports):
            return EXIT_BOUND
        return EXIT_OK

    if args.command == "enumerate":
        pool = enumerate_programs(args.l_max)
        lines = [f"{p.to_hex()}  # {p.length_bits} bits" for p in pool]
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK

    if args.command == "disasm":
        p = Program.from_hex(args.program)
        sys.stdout.write(p.disassemble() + "\n")
        return EXIT_OK

    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
