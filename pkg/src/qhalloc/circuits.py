"""OpenQASM 2.0 subset parsing into program profiles.

Supported statements: qreg, creg, barrier, measure, any named one-qubit gate
(parameters parsed and discarded), and the two-qubit gates cx / cz / swap.
Gates on three or more qubits are rejected; benchmarks must arrive
pre-decomposed to a 1q+2q gate set.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from importlib import resources

TWO_QUBIT_GATES = ("cx", "cz", "swap")
_RESERVED = ("openqasm", "include", "qreg", "creg", "measure", "barrier")
_UNSUPPORTED = ("gate", "opaque", "if", "reset")

_QREG_RE = re.compile(r"^(qreg|creg)\s+([A-Za-z_][A-Za-z0-9_]*)\s*\[\s*(\d+)\s*\]$")
_APP_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(?:\(([^()]*)\))?\s+(.+)$")
_OPERAND_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(?:\[\s*(\d+)\s*\])?$")


class QasmError(ValueError):
    """Structured parse failure with source position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class ProgramProfile:
    """Shape of one quantum program: size, two-qubit structure, gate counts."""

    name: str
    logical_qubits: int
    two_qubit_ops: tuple[tuple[int, int], ...]
    single_qubit_op_count: int
    cx_count: int
    priority: int = 0
    arrival_index: int = 0

    def __post_init__(self):
        if self.logical_qubits < 1:
            raise ValueError(f"{self.name}: needs at least one qubit")
        if self.cx_count != len(self.two_qubit_ops):
            raise ValueError(f"{self.name}: cx_count does not match op list")
        for a, b in self.two_qubit_ops:
            if not (0 <= a < self.logical_qubits and 0 <= b < self.logical_qubits):
                raise ValueError(f"{self.name}: op ({a},{b}) outside qubit range")

    def with_queue_info(self, priority: int, arrival_index: int) -> "ProgramProfile":
        return replace(self, priority=priority, arrival_index=arrival_index)


@dataclass(frozen=True)
class InteractionGraph:
    """Two-qubit op multigraph collapsed to weighted edges."""

    nodes: tuple[int, ...]
    edges: dict[tuple[int, int], int]

    def weighted_degree(self, q: int) -> int:
        return sum(w for (a, b), w in self.edges.items() if q in (a, b))


def interaction_graph(p: ProgramProfile) -> InteractionGraph:
    edges: dict[tuple[int, int], int] = {}
    for a, b in p.two_qubit_ops:
        key = (a, b) if a < b else (b, a)
        edges[key] = edges.get(key, 0) + 1
    return InteractionGraph(nodes=tuple(range(p.logical_qubits)), edges=edges)


def _statements(text: str):
    """Split source into ';'-terminated statements with (line, column) anchors."""
    line, col = 1, 1
    buf: list[str] = []
    anchor: tuple[int, int] | None = None
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "/" and text[i : i + 2] == "//":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if ch == ";":
            if buf and anchor is not None:
                yield "".join(buf).strip(), anchor
            buf, anchor = [], None
        elif ch in "{}":
            raise QasmError("gate/opaque definitions are not supported", line, col)
        else:
            if not ch.isspace() and anchor is None:
                anchor = (line, col)
            buf.append(ch)
        if ch == "\n":
            line += 1
            col = 1
        else:
            col += 1
        i += 1
    tail = "".join(buf).strip()
    if tail and anchor is not None:
        yield tail, anchor


def parse_qasm(text: str, name: str = "program", priority: int = 0, arrival_index: int = 0) -> ProgramProfile:
    """Parse an OpenQASM 2.0 subset program into its profile.

    barrier and measure statements are ignored for all counts; qubit
    operands are mapped to a dense global index across qreg declarations.
    """
    reg_offset: dict[str, int] = {}
    reg_width: dict[str, int] = {}
    creg_names: set[str] = set()
    total_qubits = 0
    two_qubit_ops: list[tuple[int, int]] = []
    single_count = 0

    def resolve(operand: str, line: int, col: int) -> tuple[str, int | None]:
        match = _OPERAND_RE.match(operand.strip())
        if not match:
            raise QasmError(f"malformed operand {operand.strip()!r}", line, col)
        reg, idx = match.group(1), match.group(2)
        if reg in creg_names:
            raise QasmError(f"classical register {reg!r} used as a qubit", line, col)
        if reg not in reg_offset:
            raise QasmError(f"unknown quantum register {reg!r}", line, col)
        if idx is None:
            return reg, None
        index = int(idx)
        if index >= reg_width[reg]:
            raise QasmError(
                f"index {index} out of bounds for register {reg!r} of width {reg_width[reg]}",
                line,
                col,
            )
        return reg, index

    for stmt, (line, col) in _statements(text):
        lowered = stmt.lower()
        if lowered.startswith("openqasm") or lowered.startswith("include"):
            continue
        decl = _QREG_RE.match(stmt)
        if decl:
            kind, reg, width = decl.group(1), decl.group(2), int(decl.group(3))
            if kind == "creg":
                creg_names.add(reg)
                continue
            if reg in reg_offset:
                raise QasmError(f"register {reg!r} declared twice", line, col)
            if width < 1:
                raise QasmError(f"register {reg!r} has zero width", line, col)
            reg_offset[reg] = total_qubits
            reg_width[reg] = width
            total_qubits += width
            continue
        if lowered.startswith("barrier") or lowered.startswith("measure"):
            continue
        first_word = lowered.split()[0].split("(")[0] if lowered.split() else ""
        if first_word in _UNSUPPORTED:
            raise QasmError(f"{first_word!r} statements are not supported", line, col)

        app = _APP_RE.match(stmt)
        if not app:
            raise QasmError(f"cannot parse statement {stmt!r}", line, col)
        gate = app.group(1).lower()
        operands = [op for op in app.group(3).split(",")]
        if len(operands) == 1:
            reg, idx = resolve(operands[0], line, col)
            single_count += 1 if idx is not None else reg_width[reg]
        elif len(operands) == 2:
            if gate not in TWO_QUBIT_GATES:
                raise QasmError(
                    f"unsupported two-qubit gate {gate!r} (only {', '.join(TWO_QUBIT_GATES)})",
                    line,
                    col,
                )
            pair = []
            for op in operands:
                reg, idx = resolve(op, line, col)
                if idx is None:
                    raise QasmError("two-qubit gate operands must be indexed", line, col)
                pair.append(reg_offset[reg] + idx)
            if pair[0] == pair[1]:
                raise QasmError("two-qubit gate operands must differ", line, col)
            two_qubit_ops.append((pair[0], pair[1]))
        else:
            raise QasmError(
                f"gate {gate!r} has {len(operands)} qubit operands; "
                "pre-decompose to 1- and 2-qubit gates",
                line,
                col,
            )

    if total_qubits == 0:
        raise QasmError("no qreg declared", 1, 1)
    return ProgramProfile(
        name=name,
        logical_qubits=total_qubits,
        two_qubit_ops=tuple(two_qubit_ops),
        single_qubit_op_count=single_count,
        cx_count=len(two_qubit_ops),
        priority=priority,
        arrival_index=arrival_index,
    )


def parse_qasm_file(path: str, priority: int = 0, arrival_index: int = 0) -> ProgramProfile:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stem = re.sub(r"\.qasm$", "", path.replace("\\", "/").rsplit("/", 1)[-1])
    return parse_qasm(text, name=stem, priority=priority, arrival_index=arrival_index)


def bundled_names() -> list[str]:
    """Names of the benchmark circuits shipped with the package."""
    root = resources.files(__package__) / "benchmarks"
    return sorted(entry.name[: -len(".qasm")] for entry in root.iterdir() if entry.name.endswith(".qasm"))


def load_bundled(name: str) -> ProgramProfile:
    root = resources.files(__package__) / "benchmarks"
    text = (root / f"{name}.qasm").read_text(encoding="utf-8")
    return parse_qasm(text, name=name)


def bundled_corpus() -> list[ProgramProfile]:
    """All bundled benchmark profiles, sorted by name."""
    return [load_bundled(name) for name in bundled_names()]
