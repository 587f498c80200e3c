"""Pauli strings, qubit operators and the Hamiltonian listing format.

The text format is the one used for the bundled Hc Hamiltonians::

    (-0.4640485702054111+0j) [] +
    (-0.0332912087832737+0j) [X0 Z1 Z2 Z3 X4] +
    (0.07335+0j) [Z0 Z1]

Coefficients are Python-style complex literals, factors are an axis letter
followed by a qubit index, and terms are joined by `` +`` and a line break.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import EmptyInput, IndexOutOfRange, OperatorSyntaxError, TooWide, WidthMismatch
from .states import DensityMatrix, StateVector, as_array

AXES = ("X", "Y", "Z")
DENSE_LIMIT = 12
DEFAULT_TOL = 1e-12

# (a, b) -> (phase, a*b) for distinct non-identity single-qubit Paulis
_PRODUCT = {
    ("X", "Y"): (1j, "Z"),
    ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("X", "Z"): (-1j, "Y"),
}


@dataclass(frozen=True, order=True)
class PauliString:
    """Tensor product of X/Y/Z factors; identity on every qubit not listed."""

    factors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        items = tuple(sorted((int(q), str(a)) for q, a in self.factors))
        seen = set()
        for q, a in items:
            if q < 0:
                raise IndexOutOfRange(f"negative qubit index {q}")
            if a not in AXES:
                raise ValueError(f"unknown Pauli axis {a!r}")
            if q in seen:
                raise ValueError(f"duplicate qubit index {q}")
            seen.add(q)
        object.__setattr__(self, "factors", items)

    @classmethod
    def from_dict(cls, factors: Mapping[int, str]) -> PauliString:
        return cls(tuple(factors.items()))

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        """Parse ``"X0 Z1"``-style labels (the bracket contents of the listing)."""
        out = []
        for tok in label.split():
            out.append((int(tok[1:]), tok[0]))
        return cls(tuple(out))

    def as_dict(self) -> dict[int, str]:
        return dict(self.factors)

    @property
    def is_identity(self) -> bool:
        return not self.factors

    @property
    def width(self) -> int:
        return self.factors[-1][0] + 1 if self.factors else 0

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.factors)

    @cached_property
    def x_mask(self) -> int:
        return sum(1 << q for q, a in self.factors if a in "XY")

    @cached_property
    def z_mask(self) -> int:
        return sum(1 << q for q, a in self.factors if a in "YZ")

    @cached_property
    def n_y(self) -> int:
        return sum(1 for _, a in self.factors if a == "Y")

    def commutes_with(self, other: PauliString) -> bool:
        anti = (self.x_mask & other.z_mask) ^ (self.z_mask & other.x_mask)
        return bin(anti).count("1") % 2 == 0

    def qubitwise_commutes(self, other: PauliString) -> bool:
        mine = self.as_dict()
        return all(mine.get(q, a) == a for q, a in other.factors)

    def relabel(self, mapping: Mapping[int, int]) -> PauliString:
        return PauliString(tuple((mapping[q], a) for q, a in self.factors))

    def __str__(self) -> str:
        return " ".join(f"{a}{q}" for q, a in self.factors)

    def __repr__(self) -> str:
        return f"PauliString([{self}])"


def multiply_strings(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Qubit-wise product ``a @ b`` as ``(phase, product)``."""
    phase = 1 + 0j
    result = a.as_dict()
    for q, axis in b.factors:
        mine = result.get(q)
        if mine is None:
            result[q] = axis
        elif mine == axis:
            del result[q]
        else:
            p, r = _PRODUCT[(mine, axis)]
            phase *= p
            result[q] = r
    return phase, PauliString.from_dict(result)


def pauli_action(string: PauliString, n_qubits: int) -> tuple[np.ndarray, np.ndarray]:
    """Index/phase arrays with ``(P psi)[c] = phase[c] * psi[src[c]]``."""
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    src = idx ^ string.x_mask
    parity = np.bitwise_count(src & string.z_mask) & 1
    phase = (1j ** string.n_y) * (1.0 - 2.0 * parity)
    return src, phase


def apply_pauli(string: PauliString, psi: np.ndarray) -> np.ndarray:
    n = psi.shape[0].bit_length() - 1
    src, phase = pauli_action(string, n)
    return phase * psi[src]


@dataclass(frozen=True, eq=False)
class QubitOperator:
    """Weighted sum of Pauli strings.

    Terms keep insertion order; :meth:`simplify` merges duplicates. Equality is
    structural (same terms, same order, same coefficients).
    """

    terms: tuple[tuple[complex, PauliString], ...] = ()
    declared_qubits: int | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "terms", tuple((complex(c), s) for c, s in self.terms)
        )

    @classmethod
    def from_terms(cls, terms: Iterable, declared_qubits: int | None = None) -> QubitOperator:
        out = []
        for c, s in terms:
            if isinstance(s, str):
                s = PauliString.from_label(s)
            elif isinstance(s, Mapping):
                s = PauliString.from_dict(s)
            out.append((c, s))
        return cls(tuple(out), declared_qubits)

    @classmethod
    def identity(cls, coefficient: complex = 1.0) -> QubitOperator:
        return cls(((coefficient, PauliString()),))

    @classmethod
    def term(cls, label: str, coefficient: complex = 1.0) -> QubitOperator:
        return cls(((coefficient, PauliString.from_label(label)),))

    @property
    def num_qubits(self) -> int:
        width = max((s.width for _, s in self.terms), default=0)
        return max(width, self.declared_qubits or 0)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QubitOperator):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def coefficient(self, string: PauliString | str) -> complex:
        if isinstance(string, str):
            string = PauliString.from_label(string)
        return sum((c for c, s in self.terms if s == string), 0j)

    @property
    def max_imag(self) -> float:
        return max((abs(c.imag) for c, _ in self.terms), default=0.0)

    def is_hamiltonian(self, tol: float = DEFAULT_TOL) -> bool:
        """Real-coefficient check; Pauli strings are Hermitian, so this implies H = H^dagger."""
        return self.max_imag <= tol

    def real_coefficients(self) -> QubitOperator:
        return QubitOperator(tuple((c.real, s) for c, s in self.terms), self.declared_qubits)

    def simplify(self, tol: float = DEFAULT_TOL) -> QubitOperator:
        return simplify(self, tol)

    def adjoint(self) -> QubitOperator:
        return QubitOperator(tuple((c.conjugate(), s) for c, s in self.terms), self.declared_qubits)

    def relabel(self, mapping: Mapping[int, int], declared_qubits: int | None = None) -> QubitOperator:
        return QubitOperator(
            tuple((c, s.relabel(mapping)) for c, s in self.terms), declared_qubits
        )

    def _declared(self, other: QubitOperator) -> int | None:
        widths = [w for w in (self.declared_qubits, other.declared_qubits) if w is not None]
        return max(widths) if widths else None

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = QubitOperator.identity(other)
        if not isinstance(other, QubitOperator):
            return NotImplemented
        return QubitOperator(self.terms + other.terms, self._declared(other)).simplify(0.0)

    __radd__ = __add__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-1) * other

    def __rsub__(self, other):
        return (-1) * self + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return QubitOperator(
                tuple((c * other, s) for c, s in self.terms), self.declared_qubits
            )
        if not isinstance(other, QubitOperator):
            return NotImplemented
        out = []
        for ca, sa in self.terms:
            for cb, sb in other.terms:
                phase, prod = multiply_strings(sa, sb)
                out.append((ca * cb * phase, prod))
        return QubitOperator(tuple(out), self._declared(other)).simplify(0.0)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def __str__(self) -> str:
        return serialize_operator(self)

    def __repr__(self) -> str:
        return f"QubitOperator({len(self.terms)} terms, {self.num_qubits} qubits)"


def simplify(op: QubitOperator, tol: float = DEFAULT_TOL) -> QubitOperator:
    """Merge duplicate strings (first-occurrence order) and drop ``|c| < tol``."""
    merged: dict[PauliString, complex] = {}
    for c, s in op.terms:
        merged[s] = merged.get(s, 0j) + c
    kept = tuple((c, s) for s, c in merged.items() if not abs(c) < tol)
    return QubitOperator(kept, op.declared_qubits)


# --- text format -----------------------------------------------------------

_REAL = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_SIGNED = re.compile(r"[+-](?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_FACTOR = re.compile(r"([A-Za-z])(\d+)")


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def where(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def fail(self, message: str, pos: int | None = None):
        line, col = self.where(pos)
        raise OperatorSyntaxError(message, line, col)

    def peek(self) -> str:
        return self.text[self.pos : self.pos + 1]

    def expect(self, literal: str, what: str | None = None):
        if not self.text.startswith(literal, self.pos):
            found = self.peek() or "end of input"
            self.fail(f"expected {what or repr(literal)}, found {found!r}")
        self.pos += len(literal)

    def match(self, pattern: re.Pattern):
        m = pattern.match(self.text, self.pos)
        if m:
            self.pos = m.end()
        return m

    def skip(self, chars: str):
        while self.pos < len(self.text) and self.text[self.pos] in chars:
            self.pos += 1

    def at_end(self) -> bool:
        return self.pos >= len(self.text)


def _parse_term(sc: _Scanner) -> tuple[complex, PauliString]:
    sc.expect("(")
    start = sc.pos
    re_part = sc.match(_REAL)
    if re_part is None:
        sc.fail("malformed real part of coefficient", start)
    start = sc.pos
    im_part = sc.match(_SIGNED)
    if im_part is None:
        sc.fail("malformed imaginary part of coefficient (expected sign and number)", start)
    sc.expect("j)", "'j)' closing the coefficient")
    if sc.peek() not in (" ", "\t"):
        sc.fail("expected a space before the factor list")
    sc.skip(" \t")
    sc.expect("[")
    factors: dict[int, str] = {}
    while True:
        sc.skip(" \t")
        if sc.peek() == "]":
            sc.pos += 1
            break
        start = sc.pos
        m = sc.match(_FACTOR)
        if m is None:
            sc.fail("expected a factor such as 'Z3' or ']'", start)
        axis, qubit = m.group(1), int(m.group(2))
        if axis not in AXES:
            sc.fail(f"unknown Pauli axis {axis!r}", start)
        if qubit in factors:
            sc.fail(f"duplicate qubit index {qubit} in one term", start)
        factors[qubit] = axis
        if sc.peek() not in (" ", "\t", "]"):
            sc.fail("expected a space or ']' after factor")
    coeff = complex(float(re_part.group(0)), float(im_part.group(0)))
    return coeff, PauliString.from_dict(factors)


def parse_operator(text: str) -> QubitOperator:
    """Parse the Hamiltonian listing format into a :class:`QubitOperator`.

    One term per bracketed factor list; duplicates are kept as written.
    Raises :class:`EmptyInput` for whitespace-only text and
    :class:`OperatorSyntaxError` with line/column otherwise.
    """
    if not text.strip():
        raise EmptyInput("no terms in operator text")
    sc = _Scanner(text)
    sc.skip(" \t\r\n")
    terms = []
    while True:
        terms.append(_parse_term(sc))
        sc.skip(" \t")
        if sc.peek() == "+":
            plus = sc.pos
            sc.pos += 1
            sc.skip(" \t\r\n")
            if sc.at_end():
                sc.fail("dangling '+' with no following term", plus)
            continue
        sc.skip(" \t\r\n")
        if sc.at_end():
            break
        sc.fail("expected ' +' line break before the next term")
    return QubitOperator(tuple(terms))


def _format_float(x: float) -> str:
    r = repr(float(x))
    return r[:-2] if r.endswith(".0") else r


def format_coefficient(c: complex) -> str:
    sign = "-" if math.copysign(1.0, c.imag) < 0 else "+"
    return f"({_format_float(c.real)}{sign}{_format_float(abs(c.imag))}j)"


def serialize_operator(op: QubitOperator) -> str:
    lines = [f"{format_coefficient(c)} [{s}]" for c, s in op.terms]
    return " +\n".join(lines)


def load_operator(path) -> QubitOperator:
    with open(path, encoding="ascii") as fh:
        return parse_operator(fh.read())


# --- realization -------------------------------------------------------------


def to_matrix(op: QubitOperator, n_qubits: int | None = None) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix, qubit 0 as the least-significant bit."""
    n = op.num_qubits if n_qubits is None else n_qubits
    if n < op.num_qubits:
        raise WidthMismatch(f"operator needs {op.num_qubits} qubits, got {n}")
    if n > DENSE_LIMIT:
        raise TooWide(f"{n} qubits exceeds the dense limit of {DENSE_LIMIT}")
    dim = 1 << n
    mat = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for c, s in op.terms:
        # column b has a single nonzero at row b ^ x
        rows = cols ^ s.x_mask
        parity = np.bitwise_count(cols & s.z_mask) & 1
        mat[rows, cols] += c * (1j ** s.n_y) * (1.0 - 2.0 * parity)
    return mat


def apply_operator(op: QubitOperator, psi: np.ndarray) -> np.ndarray:
    """Matrix-free ``H @ psi``."""
    out = np.zeros_like(psi, dtype=complex)
    n = psi.shape[0].bit_length() - 1
    for c, s in op.terms:
        src, phase = pauli_action(s, n)
        out += c * phase * psi[src]
    return out


def expectation(op: QubitOperator, state) -> complex:
    """``sum_a w_a <P_a>`` on a state vector or density matrix.

    Terms are reduced sequentially in operator order.
    """
    data = as_array(state)
    dim = data.shape[0]
    n = dim.bit_length() - 1
    if n < op.num_qubits:
        raise WidthMismatch(f"state has {n} qubits, operator needs {op.num_qubits}")
    mixed = isinstance(state, DensityMatrix) or data.ndim == 2
    idx = np.arange(dim, dtype=np.int64)
    total = 0j
    for c, s in op.terms:
        if s.is_identity:
            value = np.trace(data) if mixed else np.vdot(data, data)
        elif mixed:
            src = idx ^ s.x_mask
            parity = np.bitwise_count(src & s.z_mask) & 1
            value = (1j ** s.n_y) * np.sum((1.0 - 2.0 * parity) * data[src, idx])
        else:
            src, phase = pauli_action(s, n)
            value = np.vdot(data, phase * data[src])
        total += c * complex(value)
    return total


class CompiledOperator:
    """``op`` regrouped by X-mask for repeated matrix-free products.

    ``H psi = sum_x d_x * psi[c ^ x]``, one gather per distinct X-mask.
    """

    def __init__(self, op: QubitOperator, n_qubits: int | None = None):
        n = op.num_qubits if n_qubits is None else n_qubits
        if n < op.num_qubits:
            raise WidthMismatch(f"operator needs {op.num_qubits} qubits, got {n}")
        self.n_qubits = n
        idx = np.arange(1 << n, dtype=np.int64)
        diagonals: dict[int, np.ndarray] = {}
        for c, s in op.terms:
            parity = np.bitwise_count((idx ^ s.x_mask) & s.z_mask) & 1
            d = c * (1j**s.n_y) * (1.0 - 2.0 * parity)
            if s.x_mask in diagonals:
                diagonals[s.x_mask] = diagonals[s.x_mask] + d
            else:
                diagonals[s.x_mask] = d
        self._blocks = [(x, None if x == 0 else idx ^ x, d) for x, d in diagonals.items()]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """``H @ psi``; a 2-D ``psi`` is treated column by column."""
        out = np.zeros(psi.shape, dtype=complex)
        for _, src, d in self._blocks:
            if psi.ndim == 2:
                d = d[:, None]
            out += d * (psi if src is None else psi[src])
        return out

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.vdot(psi, self.apply(psi)).real)


__all__ = [
    "AXES",
    "CompiledOperator",
    "PauliString",
    "QubitOperator",
    "StateVector",
    "DensityMatrix",
    "multiply_strings",
    "parse_operator",
    "serialize_operator",
    "simplify",
    "to_matrix",
    "expectation",
    "apply_operator",
    "pauli_action",
    "load_operator",
]
