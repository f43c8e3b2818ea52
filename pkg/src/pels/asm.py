"""Microcode assembly language: parser, assembler, disassembler.

Grammar (one statement per line, `#` starts a comment):

    line     := [label ':'] [statement]
    statement:= 'write'   offset ',' value
              | 'set'     offset ',' mask
              | 'clear'   offset ',' mask
              | 'toggle'  offset ',' mask
              | 'capture' offset ',' mask
              | 'jif'     cond ',' operand ',' label
              | 'loop'    count ',' label
              | 'wait'    cycles
              | 'action'  'grp' group '.' ('set'|'toggle') ',' bits
    cond     := 'eq' | 'ne' | 'ltu' | 'geu'
    literal  := decimal | 0x hex | 0b binary

Offsets are register word offsets from the link base address. Jump and
loop targets are labels; loop targets must not be forward references
(hardware loops only run backward). Loop bodies must not contain another
loop. Diagnostics carry a line/column location and a stable error code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .isa import ActionMode, Command, Condition, OpCode

# Target line indices are encoded in 8 bits, bounding any program.
MAX_PROGRAM_LENGTH = 256

CONDITION_NAMES = {
    "eq": Condition.EQ,
    "ne": Condition.NE,
    "ltu": Condition.LTU,
    "geu": Condition.GEU,
}

_LABEL_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*:")
_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_GRP_RE = re.compile(r"^grp([0-9]+|0x[0-9A-Fa-f]+)\.(set|toggle)$")


class AsmError(Exception):
    """Base class for assembly diagnostics.

    Every diagnostic has a stable `code` for test assertions plus a
    1-based source line (0 when no location applies).
    """

    code = "asm-error"

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"line {line}: {message}" if line else message)


class AsmSyntaxError(AsmError):
    """Malformed source text: bad mnemonic, arity, literal, or label."""

    def __init__(self, code: str, message: str, line: int, col: int = 0):
        self.code = code
        super().__init__(message, line, col)


class UndefinedLabel(AsmError):
    code = "undefined-label"

    def __init__(self, symbol: str, line: int):
        self.symbol = symbol
        super().__init__(f"undefined label '{symbol}'", line)


class TargetOutOfRange(AsmError):
    code = "target-range"

    def __init__(self, message: str, line: int):
        super().__init__(message, line)


class NestedLoop(AsmError):
    code = "nested-loop"

    def __init__(self, line: int):
        super().__init__("loop body contains another loop", line)


class OperandWidth(AsmError):
    code = "operand-width"

    def __init__(self, message: str, line: int):
        super().__init__(message, line)


class CapacityExceeded(AsmError):
    code = "capacity"

    def __init__(self, length: int, scm_lines: int):
        self.length = length
        self.scm_lines = scm_lines
        super().__init__(f"program of {length} commands exceeds {scm_lines} SCM lines")


@dataclass
class Statement:
    """One parsed source statement with its location."""

    mnemonic: str
    args: tuple
    label: str | None
    line: int
    col: int


@dataclass
class SourceProgram:
    """Parse result: statements in order plus the label table."""

    statements: list[Statement]
    labels: dict[str, int]  # label -> statement index


@dataclass(frozen=True)
class Program:
    """A validated command sequence; entry point is index 0."""

    commands: tuple[Command, ...]

    def __len__(self) -> int:
        return len(self.commands)

    def __iter__(self):
        return iter(self.commands)

    def __getitem__(self, i):
        return self.commands[i]


def _parse_literal(token: str, line: int) -> int:
    try:
        return int(token, 0)
    except ValueError:
        raise AsmSyntaxError("bad-literal", f"malformed literal '{token}'", line)


def parse(text: str) -> SourceProgram:
    """Tokenize and parse source text, checking grammar and label uniqueness."""
    statements: list[Statement] = []
    labels: dict[str, int] = {}
    pending: list[tuple[str, int]] = []  # labels waiting for a statement

    for lineno, raw in enumerate(text.splitlines(), start=1):
        code = raw.split("#", 1)[0]
        stripped = code.strip()
        if not stripped:
            continue

        label = None
        m = _LABEL_RE.match(stripped)
        if m:
            label = m.group(1)
            if label in labels or any(label == p for p, _ in pending):
                raise AsmSyntaxError(
                    "duplicate-label", f"duplicate label '{label}'", lineno
                )
            stripped = stripped[m.end():].strip()

        if not stripped:
            # Label on its own line attaches to the next statement.
            pending.append((label, lineno))
            continue

        col = len(code) - len(code.lstrip()) + 1
        parts = stripped.split(None, 1)
        mnemonic = parts[0].lower()
        argtext = parts[1] if len(parts) > 1 else ""
        args = tuple(a.strip() for a in argtext.split(",")) if argtext else ()
        if any(a == "" for a in args):
            raise AsmSyntaxError("arity", "empty argument", lineno)

        stmt = _check_statement(mnemonic, args, label, lineno, col)
        for sym, _ in pending:
            labels[sym] = len(statements)
        pending.clear()
        if label is not None:
            labels[label] = len(statements)
        statements.append(stmt)

    if pending:
        sym, ln = pending[0]
        raise AsmSyntaxError(
            "dangling-label", f"label '{sym}' points past the end of the program", ln
        )
    return SourceProgram(statements, labels)


def _check_statement(
    mnemonic: str, args: tuple, label: str | None, line: int, col: int
) -> Statement:
    def want(n: int):
        if len(args) != n:
            raise AsmSyntaxError(
                "arity",
                f"'{mnemonic}' takes {n} argument{'s' if n != 1 else ''}, got {len(args)}",
                line,
            )

    if mnemonic in ("write", "set", "clear", "toggle", "capture"):
        want(2)
        parsed = (_parse_literal(args[0], line), _parse_literal(args[1], line))
    elif mnemonic == "jif":
        want(3)
        cond = args[0].lower()
        if cond not in CONDITION_NAMES:
            raise AsmSyntaxError(
                "bad-condition", f"unknown condition '{args[0]}'", line
            )
        if not _IDENT_RE.match(args[2]):
            raise AsmSyntaxError("bad-label", f"malformed label '{args[2]}'", line)
        parsed = (CONDITION_NAMES[cond], _parse_literal(args[1], line), args[2])
    elif mnemonic == "loop":
        want(2)
        if not _IDENT_RE.match(args[1]):
            raise AsmSyntaxError("bad-label", f"malformed label '{args[1]}'", line)
        parsed = (_parse_literal(args[0], line), args[1])
    elif mnemonic == "wait":
        want(1)
        parsed = (_parse_literal(args[0], line),)
    elif mnemonic == "action":
        want(2)
        m = _GRP_RE.match(args[0].lower())
        if not m:
            raise AsmSyntaxError(
                "bad-argument",
                f"expected grp<N>.set or grp<N>.toggle, got '{args[0]}'",
                line,
            )
        mode = ActionMode.SET_LEVELS if m.group(2) == "set" else ActionMode.TOGGLE
        parsed = (int(m.group(1), 0), mode, _parse_literal(args[1], line))
    else:
        raise AsmSyntaxError("unknown-mnemonic", f"unknown mnemonic '{mnemonic}'", line)

    return Statement(mnemonic, parsed, label, line, col)


def _require_width(value: int, bits: int, what: str, line: int) -> int:
    if not 0 <= value < (1 << bits):
        raise OperandWidth(f"{what} 0x{value:x} exceeds {bits} bits", line)
    return value


def assemble(src: SourceProgram) -> Program:
    """Resolve labels and produce a validated Program."""
    commands: list[Command] = []
    loops: list[tuple[int, int, int]] = []  # (index, target, line)

    if len(src.statements) > MAX_PROGRAM_LENGTH:
        raise CapacityExceeded(len(src.statements), MAX_PROGRAM_LENGTH)

    for index, stmt in enumerate(src.statements):
        ln = stmt.line
        m = stmt.mnemonic
        if m in ("write", "set", "clear", "toggle", "capture"):
            offset = _require_width(stmt.args[0], 12, "register offset", ln)
            value = _require_width(stmt.args[1], 32, "operand", ln)
            opcode = {
                "write": OpCode.WRITE,
                "set": OpCode.SET,
                "clear": OpCode.CLEAR,
                "toggle": OpCode.TOGGLE,
                "capture": OpCode.CAPTURE,
            }[m]
            commands.append(Command(opcode, offset, value))
        elif m == "jif":
            cond, operand, symbol = stmt.args
            _require_width(operand, 32, "operand", ln)
            target = _resolve(src, symbol, ln)
            commands.append(Command.jump_if(cond, operand, target))
        elif m == "loop":
            count, symbol = stmt.args
            _require_width(count, 32, "loop count", ln)
            target = _resolve(src, symbol, ln)
            if target > index:
                raise TargetOutOfRange(
                    f"loop target '{symbol}' is a forward reference", ln
                )
            commands.append(Command.loop(count, target))
            loops.append((index, target, ln))
        elif m == "wait":
            commands.append(Command.wait(_require_width(stmt.args[0], 32, "cycle count", ln)))
        elif m == "action":
            group, mode, bits = stmt.args
            _require_width(group, 8, "event group", ln)
            _require_width(bits, 32, "line bits", ln)
            commands.append(Command.action(mode, group, bits))
        else:  # pragma: no cover - parse() rejects unknown mnemonics
            raise AsmSyntaxError("unknown-mnemonic", m, ln)

    # Non-nesting: a loop at index i with target t owns body [t, i]; no
    # other loop command may sit inside that region.
    for i, t, _ in loops:
        for j, _, ln_j in loops:
            if j != i and t <= j <= i:
                raise NestedLoop(ln_j)

    return Program(tuple(commands))


def _resolve(src: SourceProgram, symbol: str, line: int) -> int:
    if symbol not in src.labels:
        raise UndefinedLabel(symbol, line)
    target = src.labels[symbol]
    if target > 0xFF:
        raise TargetOutOfRange(f"target index {target} exceeds 8 bits", line)
    return target


def assemble_text(text: str) -> Program:
    return assemble(parse(text))


def validate_against_capacity(prog: Program, scm_lines: int) -> None:
    """Check that a program fits an SCM with the given number of lines."""
    if scm_lines <= 0:
        raise ValueError(f"scm_lines must be positive, got {scm_lines}")
    if len(prog) > scm_lines:
        raise CapacityExceeded(len(prog), scm_lines)
    for i, cmd in enumerate(prog):
        if cmd.opcode in (OpCode.JUMP_IF, OpCode.LOOP) and cmd.target >= scm_lines:
            raise TargetOutOfRange(
                f"command {i} targets line {cmd.target} beyond {scm_lines} SCM lines",
                0,
            )


def validate_program(prog: Program) -> None:
    """Structural checks for programs built directly from commands."""
    if len(prog) > MAX_PROGRAM_LENGTH:
        raise CapacityExceeded(len(prog), MAX_PROGRAM_LENGTH)
    loops = []
    for i, cmd in enumerate(prog):
        if cmd.opcode in (OpCode.JUMP_IF, OpCode.LOOP):
            if cmd.target >= len(prog):
                raise TargetOutOfRange(
                    f"command {i} targets line {cmd.target} past the program end", 0
                )
        if cmd.opcode is OpCode.LOOP:
            if cmd.target > i:
                raise TargetOutOfRange(f"loop at {i} targets forward line {cmd.target}", 0)
            loops.append((i, cmd.target))
    for i, t in loops:
        for j, _ in loops:
            if j != i and t <= j <= i:
                raise NestedLoop(0)


_COND_TEXT = {v: k for k, v in CONDITION_NAMES.items()}


def disassemble(prog: Program) -> str:
    """Render a program as source text that reassembles to it exactly.

    Jump and loop targets get synthesized labels L<index>.
    """
    targets = sorted(
        {c.target for c in prog if c.opcode in (OpCode.JUMP_IF, OpCode.LOOP)}
    )
    label_for = {t: f"L{t}" for t in targets}

    lines = []
    for i, cmd in enumerate(prog):
        op = cmd.opcode
        if op in (OpCode.WRITE, OpCode.SET, OpCode.CLEAR, OpCode.TOGGLE, OpCode.CAPTURE):
            body = f"{op.name.lower()} 0x{cmd.field:x}, 0x{cmd.operand:x}"
        elif op is OpCode.JUMP_IF:
            body = (
                f"jif {_COND_TEXT[cmd.condition]}, 0x{cmd.operand:x}, "
                f"{label_for[cmd.target]}"
            )
        elif op is OpCode.LOOP:
            body = f"loop {cmd.operand}, {label_for[cmd.target]}"
        elif op is OpCode.WAIT:
            body = f"wait {cmd.operand}"
        else:
            mode = "set" if cmd.action_mode is ActionMode.SET_LEVELS else "toggle"
            body = f"action grp{cmd.action_group}.{mode}, 0x{cmd.operand:x}"

        prefix = f"{label_for[i]}:" if i in label_for else ""
        lines.append(f"{prefix:<8}{body}")
    return "\n".join(lines) + ("\n" if lines else "")
