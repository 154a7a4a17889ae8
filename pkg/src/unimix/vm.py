"""Step-budgeted chronological bytecode machine.

Programs are bit strings decoding to an instruction list terminated by END;
because END ends decoding, the set of valid codes is prefix-free and the
weights 2^-length satisfy Kraft's inequality exactly.  The same machine runs
as a policy (reads percepts, writes actions) and as an environment (reads
actions, writes percept symbols).  State persists across cycles so execution
is incremental; the program counter restarts each cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

from .core import Action, Alphabet, History, Percept

# Opcodes: 3 bits each, followed by a fixed-width operand (possibly empty).
OP_END = 0  # end of cycle / end of code
OP_OUT = 1  # emit accumulator as next output symbol
OP_IN = 2  # accumulator := primary input channel
OP_INR = 3  # accumulator := secondary input channel (reward level)
OP_LDC = 4  # accumulator := constant (2-bit operand)
OP_JZ = 5  # if accumulator == 0: pc += operand - 1  (operand 2 bits)
OP_INC = 6  # accumulator += 1
OP_MOVT = 7  # tape op (2-bit operand): 0 left, 1 right, 2 store, 3 load

OPCODE_BITS = 3
OPERAND_BITS = {
    OP_END: 0,
    OP_OUT: 0,
    OP_IN: 0,
    OP_INR: 0,
    OP_LDC: 2,
    OP_JZ: 2,
    OP_INC: 0,
    OP_MOVT: 2,
}
_MNEMONIC = {
    OP_END: "END",
    OP_OUT: "OUT",
    OP_IN: "IN",
    OP_INR: "INR",
    OP_LDC: "LDC",
    OP_JZ: "JZ",
    OP_INC: "INC",
    OP_MOVT: "MOVT",
}


class DecodeError(ValueError):
    """Bit string does not decode to a valid END-terminated program."""


@dataclass(frozen=True)
class Instruction:
    op: int
    arg: int = 0


@dataclass(frozen=True)
class Program:
    """Prefix-free bytecode; ``code`` is exactly the consumed bit prefix."""

    code: tuple
    instructions: tuple

    @property
    def length_bits(self) -> int:
        return len(self.code)

    @property
    def weight(self) -> Fraction:
        return Fraction(1, 2 ** self.length_bits)

    def to_hex(self) -> str:
        # length prefix keeps trailing zero bits unambiguous
        n = len(self.code)
        value = int("".join(map(str, self.code)), 2) if n else 0
        width = max(1, (n + 3) // 4)
        return f"{n}:{value:0{width}x}"

    @classmethod
    def from_hex(cls, text: str) -> "Program":
        n_str, hex_str = text.split(":")
        n = int(n_str)
        value = int(hex_str, 16)
        bits = tuple((value >> (n - 1 - i)) & 1 for i in range(n))
        return decode(bits)

    def disassemble(self) -> str:
        lines = []
        for i, ins in enumerate(self.instructions):
            if OPERAND_BITS[ins.op]:
                lines.append(f"{i:3d}  {_MNEMONIC[ins.op]} {ins.arg}")
            else:
                lines.append(f"{i:3d}  {_MNEMONIC[ins.op]}")
        return "\n".join(lines)

    def __lt__(self, other: "Program") -> bool:
        return self.code < other.code


def _bits_to_int(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | b
    return v


def decode(bits: Sequence[int]) -> Program:
    """Consume a prefix-free code from ``bits``; extra trailing bits are ignored."""
    bits = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in bits):
        raise DecodeError("non-binary input")
    pos = 0
    instructions: List[Instruction] = []
    while True:
        if pos + OPCODE_BITS > len(bits):
            raise DecodeError("truncated code: missing END")
        op = _bits_to_int(bits[pos : pos + OPCODE_BITS])
        pos += OPCODE_BITS
        width = OPERAND_BITS[op]
        if pos + width > len(bits):
            raise DecodeError("truncated operand")
        arg = _bits_to_int(bits[pos : pos + width])
        pos += width
        instructions.append(Instruction(op, arg))
        if op == OP_END:
            return Program(bits[:pos], tuple(instructions))


def enumerate_programs(l_max: int) -> List[Program]:
    """All valid programs with length_bits <= l_max, in lexicographic code order."""
    if l_max < 1:
        raise ValueError("l_max >= 1 required")
    out: List[Program] = []

    def walk(code: List[int], instrs: List[Instruction]) -> None:
        for op in range(8):
            width = OPERAND_BITS[op]
            need = OPCODE_BITS + width
            if len(code) + need > l_max:
                continue
            op_bits = [(op >> (OPCODE_BITS - 1 - i)) & 1 for i in range(OPCODE_BITS)]
            for arg in range(2 ** width):
                arg_bits = [(arg >> (width - 1 - i)) & 1 for i in range(width)]
                new_code = code + op_bits + arg_bits
                new_instrs = instrs + [Instruction(op, arg)]
                if op == OP_END:
                    out.append(Program(tuple(new_code), tuple(new_instrs)))
                else:
                    walk(new_code, new_instrs)

    walk([], [])
    out.sort(key=lambda p: p.code)
    return out


def kraft_sum(pool: Iterable[Program]) -> Fraction:
    return sum((p.weight for p in pool), Fraction(0))


@dataclass
class MachineState:
    """Persistent per-program state: accumulator bank, tape, monotone cursors."""

    registers: List[int] = field(default_factory=lambda: [0])
    work_tape: dict = field(default_factory=dict)
    head: int = 0
    input_cursor: int = 0
    output_count: int = 0

    def copy(self) -> "MachineState":
        return MachineState(
            list(self.registers), dict(self.work_tape), self.head,
            self.input_cursor, self.output_count,
        )


@dataclass(frozen=True)
class RunBudget:
    steps_per_cycle: int

    def __post_init__(self):
        if self.steps_per_cycle < 1:
            raise ValueError("steps_per_cycle >= 1 required")


@dataclass(frozen=True)
class CycleResult:
    outputs: tuple
    steps_used: int
    timed_out: bool


def run_cycle(
    program: Program,
    state: MachineState,
    primary_in: int,
    secondary_in: int,
    budget: RunBudget,
    max_outputs: int = 1,
) -> CycleResult:
    """Run one cycle in place; stops at END, at max_outputs emits, or on budget.

    Missing outputs are padded with the default symbol 0; ``timed_out`` is set
    only when the step budget ran out before the cycle finished.
    """
    instrs = program.instructions
    pc = 0
    steps = 0
    outputs: List[int] = []
    state.input_cursor += 1
    timed_out = False
    while True:
        if pc < 0 or pc >= len(instrs):
            break  # fell off the code: treat as END
        if steps >= budget.steps_per_cycle:
            timed_out = True
            break
        ins = instrs[pc]
        steps += 1
        if ins.op == OP_END:
            break
        elif ins.op == OP_OUT:
            outputs.append(state.registers[0])
            state.output_count += 1
            if len(outputs) >= max_outputs:
                break
            pc += 1
        elif ins.op == OP_IN:
            state.registers[0] = primary_in
            pc += 1
        elif ins.op == OP_INR:
            state.registers[0] = secondary_in
            pc += 1
        elif ins.op == OP_LDC:
            state.registers[0] = ins.arg
            pc += 1
        elif ins.op == OP_JZ:
            pc += (ins.arg - 1) if state.registers[0] == 0 else 1
        elif ins.op == OP_INC:
            state.registers[0] += 1
            pc += 1
        elif ins.op == OP_MOVT:
            if ins.arg == 0:
                state.head -= 1
            elif ins.arg == 1:
                state.head += 1
            elif ins.arg == 2:
                state.work_tape[state.head] = state.registers[0]
            else:
                state.registers[0] = state.work_tape.get(state.head, 0)
            pc += 1
    while len(outputs) < max_outputs:
        outputs.append(0)
    return CycleResult(tuple(outputs), steps, timed_out)


def policy_cycle(
    p: Program,
    s: MachineState,
    x_prev: Optional[Percept],
    budget: RunBudget,
    alphabet: Alphabet,
) -> Tuple[Action, MachineState, int, bool]:
    """One agent cycle: reads the previous percept, emits an action.

    On timeout the designated default action 0 is returned with the flag set.
    """
    obs = x_prev.observation if x_prev is not None else 0
    rew = alphabet.reward_index(x_prev) if x_prev is not None else 0
    res = run_cycle(p, s, obs, rew, budget, max_outputs=1)
    action = res.outputs[0] % alphabet.num_actions
    if res.timed_out:
        action = 0
    return action, s, res.steps_used, res.timed_out


def env_cycle(
    q: Program,
    s: MachineState,
    y: Action,
    budget: RunBudget,
    alphabet: Alphabet,
) -> Tuple[Percept, MachineState, int, bool]:
    """One environment cycle: reads the current action, emits a percept."""
    res = run_cycle(q, s, y, 0, budget, max_outputs=1)
    if res.timed_out:
        return Percept(Fraction(0), 0), s, res.steps_used, True
    return alphabet.percept_of(res.outputs[0]), s, res.steps_used, False


def replay_env(
    q: Program,
    actions: Sequence[Action],
    budget: RunBudget,
    alphabet: Alphabet,
) -> Tuple[tuple, bool, MachineState]:
    """Percepts q produces on an action sequence; ok=False if any cycle timed out."""
    s = MachineState()
    percepts = []
    for y in actions:
        x, s, _, timed_out = env_cycle(q, s, y, budget, alphabet)
        if timed_out:
            return tuple(percepts), False, s
        percepts.append(x)
    return tuple(percepts), True, s


def consistent_envs(
    pool: Sequence[Program],
    h: History,
    budget: RunBudget,
    alphabet: Alphabet,
) -> List[Program]:
    """Programs whose replay on h's actions reproduces h's percepts without timeout."""
    if h.pending_action is not None:
        raise ValueError("history has a pending action")
    actions = h.actions()
    expected = h.percepts()
    result = []
    for q in pool:
        percepts, ok, _ = replay_env(q, actions, budget, alphabet)
        if ok and percepts == expected:
            result.append(q)
    return result
