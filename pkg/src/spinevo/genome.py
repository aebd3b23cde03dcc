"""The ASCII genome language.

A genome string looks like::

    <A|G>AB500BC500CD500DE500EF500FG500@5.40#000000

* ``<init|target>`` is the protocol.  Adjacent letters are a product of single
  excitations (``AB`` = both A and B up), terms are joined with ``+``/``-`` and
  may carry a coefficient: ``i``, a decimal (``2A``) or a parenthesised complex
  number (``(1+2i)A``).  The single character ``0`` is the vacuum (all down).
* ``XY123`` is a coupling token.  Letters in alphabetical order give +123,
  reversed order gives -123; a repeated letter (``AA650``) is an on-site energy.
  Every token in a genome has the same digit width.
* ``@12.40`` fixes the target time in units of 1/Jmax.
* ``#04`` gives one hex direction per off-site coupling (used only for drawing).

Couplings are kept in canonical order, sorted by their unordered letter pair,
so that ``serialize(parse(s)) == s`` for canonical strings and genomes of one
topology line up character by character.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .errors import (
    GenomeSemanticError,
    GenomeSyntaxError,
    RoundingRangeError,
    ZeroStateError,
)

LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
VACUUM = "0"
HEX = "0123456789abcdef"

_DECIMAL = re.compile(r"\d+(?:\.\d+)?")
_COMPLEX_BODY = re.compile(r"[+-]?(?:\d+(?:\.\d+)?)?(?:[+-]?(?:\d+(?:\.\d+)?)?i)?")
_COUPLING = re.compile(r"([A-Z])([A-Z])(\d+)")
_TIME = re.compile(r"@(\d+(?:\.\d+)?)")
_HINTS = re.compile(r"#([0-9a-fA-F]+)")


class Term(NamedTuple):
    coefficient: complex
    sites: str  # sorted letters, "" for the vacuum


@dataclass(frozen=True)
class StateExpression:
    """A superposition of occupation-number basis states.

    ``terms`` keeps the coefficients exactly as written so the genome can be
    reproduced; :meth:`amplitudes` gives the normalized vector.
    """

    terms: tuple[Term, ...]

    @property
    def letters(self) -> set[str]:
        return {c for t in self.terms for c in t.sites}

    @property
    def excitation_numbers(self) -> set[int]:
        return {len(t.sites) for t in self.terms}

    def amplitudes(self) -> dict[str, complex]:
        norm = math.sqrt(sum(abs(t.coefficient) ** 2 for t in self.terms))
        if norm == 0.0:
            raise ZeroStateError("state expression has no nonzero coefficient")
        return {t.sites: t.coefficient / norm for t in self.terms}

    def __str__(self) -> str:
        return _format_expression(self)


def normalize(expr: StateExpression) -> StateExpression:
    """Return the same state with unit norm; relative phases are untouched."""
    amps = expr.amplitudes()
    return StateExpression(tuple(Term(c, s) for s, c in amps.items()))


@dataclass(frozen=True)
class CouplingTerm:
    site_a: str
    site_b: str
    magnitude: int

    @property
    def is_onsite(self) -> bool:
        return self.site_a == self.site_b

    @property
    def pair(self) -> tuple[str, str]:
        return tuple(sorted((self.site_a, self.site_b)))  # type: ignore[return-value]

    @property
    def value(self) -> int:
        return -self.magnitude if self.site_a > self.site_b else self.magnitude

    @classmethod
    def from_value(cls, pair: tuple[str, str], value: int) -> "CouplingTerm":
        lo, hi = sorted(pair)
        if value < 0 and lo != hi:
            return cls(hi, lo, -value)
        return cls(lo, hi, abs(value))

    def token(self, width: int) -> str:
        return f"{self.site_a}{self.site_b}{self.magnitude:0{width}d}"


@dataclass(frozen=True)
class Genome:
    initial: StateExpression
    target: StateExpression
    couplings: tuple[CouplingTerm, ...]
    width: int
    target_time: float | None = None
    layout_hints: tuple[int, ...] | None = None

    @property
    def sites(self) -> list[str]:
        return sorted({c for term in self.couplings for c in (term.site_a, term.site_b)})

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(c.value for c in self.couplings)

    @property
    def max_value(self) -> int:
        return 10**self.width - 1

    @property
    def offsite(self) -> list[CouplingTerm]:
        return [c for c in self.couplings if not c.is_onsite]

    @property
    def j_max(self) -> float:
        return float(max((abs(c.value) for c in self.offsite), default=0))

    def structure(self) -> tuple:
        """Everything except the coupling values; equal for crossover partners."""
        return (
            self.initial,
            self.target,
            tuple(c.pair for c in self.couplings),
            self.width,
            self.target_time,
            self.layout_hints,
        )

    def with_values(self, values: Iterable[int]) -> "Genome":
        values = [int(v) for v in values]
        if len(values) != len(self.couplings):
            raise ValueError("value count does not match coupling count")
        couplings = tuple(
            CouplingTerm.from_value(c.pair, v) for c, v in zip(self.couplings, values)
        )
        return replace(self, couplings=couplings)

    def with_protocol(self, initial: StateExpression, target: StateExpression) -> "Genome":
        g = replace(self, initial=initial, target=target)
        _check_semantics(g)
        return g

    def __str__(self) -> str:
        return serialize(self)


# -- parsing ------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> GenomeSyntaxError:
        return GenomeSyntaxError(message, self.text, self.pos)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str) -> None:
        if self.peek() != char:
            raise self.error(f"expected {char!r}")
        self.pos += 1

    def match(self, pattern: re.Pattern) -> re.Match | None:
        m = pattern.match(self.text, self.pos)
        if m:
            self.pos = m.end()
        return m

    def expression(self, terminator: str) -> StateExpression:
        combined: dict[str, complex] = {}
        sign = 1
        if self.peek() == "-":
            sign = -1
            self.pos += 1
        while True:
            coefficient, sites = self.term()
            combined[sites] = combined.get(sites, 0) + sign * coefficient
            char = self.peek()
            if char == terminator:
                break
            if not char or char not in "+-":
                raise self.error("expected '+', '-' or " + repr(terminator))
            sign = 1 if char == "+" else -1
            self.pos += 1
        terms = tuple(Term(complex(c), s) for s, c in combined.items() if c != 0)
        if not terms:
            raise ZeroStateError(f"state expression in {self.text!r} has no nonzero term")
        return StateExpression(terms)

    def term(self) -> tuple[complex, str]:
        coefficient: complex = 1
        char = self.peek()
        if char == "i":
            coefficient = 1j
            self.pos += 1
        elif char == "(":
            end = self.text.find(")", self.pos)
            body = self.text[self.pos + 1 : end] if end > 0 else ""
            if end < 0 or not body or not _COMPLEX_BODY.fullmatch(body):
                raise self.error("malformed complex coefficient")
            try:
                coefficient = complex(body.replace("i", "j"))
            except ValueError:
                raise self.error("malformed complex coefficient") from None
            self.pos = end + 1
        elif char == VACUUM and not self.text[self.pos + 1 : self.pos + 2].isdigit() and (
            self.text[self.pos + 1 : self.pos + 2] != "."
        ):
            self.pos += 1
            return coefficient, ""
        elif char.isdigit():
            m = self.match(_DECIMAL)
            coefficient = float(m.group())  # type: ignore[union-attr]
            if not self.peek() or self.peek() not in LETTERS:
                raise self.error("a decimal coefficient must be followed by site letters")
        return coefficient, self.sites()

    def sites(self) -> str:
        if self.peek() == VACUUM:
            self.pos += 1
            return ""
        start = self.pos
        while self.peek() and self.peek() in LETTERS:
            self.pos += 1
        letters = self.text[start : self.pos]
        if not letters:
            raise self.error("expected site letters or the vacuum token '0'")
        if len(set(letters)) != len(letters):
            raise self.error(f"site repeated inside term {letters!r}")
        return "".join(sorted(letters))


def parse(text: str) -> Genome:
    """Parse and validate a genome string."""
    text = text.strip()
    if not text:
        raise GenomeSyntaxError("empty genome")
    if not text.isascii():
        raise GenomeSyntaxError("genome must be ASCII")
    p = _Parser(text)
    p.expect("<")
    initial = p.expression("|")
    p.expect("|")
    target = p.expression(">")
    p.expect(">")

    couplings: list[CouplingTerm] = []
    width = None
    target_time = None
    hints = None
    while p.pos < len(text):
        char = p.peek()
        if char == "@":
            if target_time is not None:
                raise p.error("target time given twice")
            m = p.match(_TIME)
            if not m:
                raise p.error("malformed target time")
            target_time = float(m.group(1))
        elif char == "#":
            m = p.match(_HINTS)
            if not m or p.pos != len(text):
                raise p.error("layout hints must be hex digits at the end of the genome")
            hints = tuple(int(h, 16) for h in m.group(1))
        else:
            m = p.match(_COUPLING)
            if not m:
                raise p.error("bad coupling token")
            digits = m.group(3)
            if width is None:
                width = len(digits)
            elif len(digits) != width:
                raise GenomeSyntaxError(
                    f"coupling {m.group()!r} has {len(digits)} digits, expected {width}"
                )
            couplings.append(CouplingTerm(m.group(1), m.group(2), int(digits)))
    if not couplings:
        raise GenomeSyntaxError("genome has no coupling tokens", text, p.pos)

    seen = set()
    for c in couplings:
        if c.pair in seen:
            raise GenomeSemanticError(f"duplicate coupling for pair {''.join(c.pair)}")
        seen.add(c.pair)

    offsite_before = [c for c in couplings if not c.is_onsite]
    if hints is not None and len(hints) != len(offsite_before):
        raise GenomeSemanticError(
            f"{len(hints)} layout hints for {len(offsite_before)} off-site couplings"
        )
    order = sorted(range(len(couplings)), key=lambda k: couplings[k].pair)
    ordered = tuple(couplings[k] for k in order)
    if hints is not None:
        hint_of = dict(zip((c.pair for c in offsite_before), hints))
        hints = tuple(hint_of[c.pair] for c in ordered if not c.is_onsite)

    g = Genome(initial, target, ordered, width, target_time, hints)  # type: ignore[arg-type]
    _check_semantics(g)
    return g


def _check_semantics(g: Genome) -> None:
    sites = set(g.sites)
    missing = (g.initial.letters | g.target.letters) - sites
    if missing:
        raise GenomeSemanticError(
            f"protocol sites {''.join(sorted(missing))} do not appear in any coupling"
        )
    if g.target_time is not None and g.target_time < 0:
        raise GenomeSemanticError("target time must be non-negative")


# -- serialization ------------------------------------------------------------


def _fmt_real(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _fmt_coefficient(c: complex, sites: str) -> str:
    if c == 1:
        return ""
    if c == 1j:
        return "i"
    if c.imag == 0 and sites:
        return _fmt_real(c.real)
    if c.imag == 0:
        return f"({_fmt_real(c.real)})"
    sign = "-" if c.imag < 0 else "+"
    return f"({_fmt_real(c.real)}{sign}{_fmt_real(abs(c.imag))}i)"


def _format_expression(expr: StateExpression) -> str:
    out = []
    for k, (c, sites) in enumerate(expr.terms):
        c = complex(c)
        negative = c.real < 0 or (c.real == 0 and c.imag < 0)
        if negative:
            c = -c
            out.append("-")
        elif k:
            out.append("+")
        out.append(_fmt_coefficient(c, sites))
        out.append(sites or VACUUM)
    return "".join(out)


def serialize(g: Genome) -> str:
    parts = [f"<{_format_expression(g.initial)}|{_format_expression(g.target)}>"]
    parts.extend(c.token(g.width) for c in g.couplings)
    if g.target_time is not None:
        parts.append(f"@{g.target_time:.2f}")
    if g.layout_hints is not None:
        parts.append("#" + "".join(HEX[h] for h in g.layout_hints))
    return "".join(parts)


def parse_expression(text: str) -> StateExpression:
    """Parse a bare state expression such as ``A+iB`` or ``0+R+A+AR``."""
    p = _Parser(text.strip() + "|")
    expr = p.expression("|")
    if p.pos != len(p.text) - 1:
        raise p.error("trailing characters")
    return expr


def parse_protocol(text: str) -> tuple[StateExpression, StateExpression]:
    """Parse ``<init|target>`` on its own."""
    p = _Parser(text.strip())
    p.expect("<")
    initial = p.expression("|")
    p.expect("|")
    target = p.expression(">")
    p.expect(">")
    if p.pos != len(p.text):
        raise p.error("trailing characters after protocol")
    return initial, target


# -- transforms ---------------------------------------------------------------


def round_magnitude(m: int, width: int, n: int) -> int:
    """Round to the nearest 10**(width-n), half away from zero (not divided)."""
    q = 10 ** (width - n)
    return (m + q // 2) // q * q


def round_couplings(g: Genome, n: int) -> Genome:
    """Keep ``n`` significant figures per coupling and shrink the width to ``n``.

    1432 at n=1 rounds to 1000 and is stored as 1; 2524 at n=2 becomes 25.
    A magnitude that rounds up past the new width (9960 at n=2) is capped at
    the largest n-digit value.
    """
    if not 1 <= n <= g.width:
        raise RoundingRangeError(f"significant figures must be in [1, {g.width}], got {n}")
    q = 10 ** (g.width - n)
    cap = 10**n - 1
    couplings = tuple(
        replace(c, magnitude=min(round_magnitude(c.magnitude, g.width, n) // q, cap))
        for c in g.couplings
    )
    return replace(g, couplings=couplings, width=n)


# -- files --------------------------------------------------------------------


def parse_lines(lines: Iterable[str]) -> list[Genome]:
    """Genome file contents: one genome per line, ``;`` comments, and ``#``
    lines that attach layout hints to the genome above them."""
    raw: list[str] = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith(";"):
            continue
        if line.startswith("#"):
            if not raw:
                raise GenomeSyntaxError("layout-hint line before any genome")
            raw[-1] += line
        else:
            raw.append(line)
    return [parse(s) for s in raw]


def read_genomes(path: str | Path) -> list[Genome]:
    return parse_lines(Path(path).read_text().splitlines())


def read_genome(path: str | Path) -> Genome:
    genomes = read_genomes(path)
    if not genomes:
        raise GenomeSyntaxError(f"no genome found in {path}")
    return genomes[0]


def uniform_chain(n_sites: int, value: int = 500, width: int = 3) -> Genome:
    """End-to-end transfer template on a uniform linear chain."""
    letters = LETTERS[:n_sites]
    tokens = "".join(f"{a}{b}{value:0{width}d}" for a, b in zip(letters, letters[1:]))
    return parse(f"<{letters[0]}|{letters[-1]}>{tokens}")


def chain_genome(values: Sequence[int], width: int, protocol: str | None = None) -> Genome:
    letters = LETTERS[: len(values) + 1]
    template = uniform_chain(len(letters), 0, width)
    g = template.with_values(values)
    if protocol is not None:
        g = g.with_protocol(*parse_protocol(protocol))
    return g
