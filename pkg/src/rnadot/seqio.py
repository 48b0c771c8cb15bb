"""Parsing and validation of RNA sequence inputs.

Supports FASTA and a small Stockholm 1.0 subset (sequence rows, the
``#=GF AC`` accession markup, and the ``//`` terminator). Residues are
normalized to the strict {A, C, G, U} alphabet; anything else, including
IUPAC ambiguity codes, is rejected at ingestion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

ALPHABET = frozenset("ACGU")

GAP_CHARS = frozenset(".-~")


class ParseError(ValueError):
    """Malformed sequence input (bad header, empty body, bad residue)."""


@dataclass(frozen=True)
class RnaSequence:
    """A validated RNA sequence belonging to one family."""

    id: str
    family: str
    residues: str

    def __post_init__(self):
        if not self.id:
            raise ParseError("sequence id must be non-empty")
        if not self.residues:
            raise ParseError(f"sequence {self.id!r} has no residues")
        for pos, ch in enumerate(self.residues, start=1):
            if ch not in ALPHABET:
                raise ParseError(
                    f"sequence {self.id!r}: invalid residue {ch!r} at position {pos}"
                )

    @property
    def length(self) -> int:
        return len(self.residues)

    @property
    def key(self) -> tuple[str, str]:
        """(family, id) pair; ids are only unique within a family."""
        return (self.family, self.id)


@dataclass
class Family:
    """An ordered group of sequences sharing one accession."""

    accession: str
    members: list[RnaSequence] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for m in self.members:
            if m.family != self.accession:
                raise ValueError(
                    f"member {m.id!r} carries family {m.family!r}, "
                    f"expected {self.accession!r}"
                )
            if m.id in seen:
                raise ValueError(
                    f"duplicate sequence id {m.id!r} in family {self.accession!r}"
                )
            seen.add(m.id)


def normalize_residues(raw: str) -> str:
    """Uppercase, map T to U, and reject anything outside {A,C,G,U}.

    The rejection names the offending character and its 1-based position.
    """
    out = []
    for pos, ch in enumerate(raw, start=1):
        c = ch.upper()
        if c == "T":
            c = "U"
        if c not in ALPHABET:
            raise ParseError(f"invalid residue {ch!r} at position {pos}")
        out.append(c)
    return "".join(out)


def _decode(data: bytes | str) -> str:
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8 text: {exc}") from None
    return data


def parse_fasta(data: bytes | str, default_family: str | None = None) -> list[RnaSequence]:
    """Parse FASTA records into validated sequences, order preserved.

    Headers are ``>family/id`` (split on the first ``/``) or ``>id`` with
    the family taken from ``default_family``. Multi-line bodies are
    joined; case is folded and T mapped to U.
    """
    text = _decode(data)
    sequences: list[RnaSequence] = []
    header: tuple[str, str, int] | None = None  # (family, id, line number)
    body: list[str] = []

    def finish():
        if header is None:
            return
        family, seq_id, lineno = header
        if not body:
            raise ParseError(f"record {seq_id!r} (line {lineno}): empty sequence body")
        sequences.append(RnaSequence(id=seq_id, family=family, residues="".join(body)))

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            finish()
            body = []
            tokens = line[1:].split()
            if not tokens:
                raise ParseError(f"line {lineno}: malformed header (no id)")
            token = tokens[0]
            if "/" in token:
                family, seq_id = token.split("/", 1)
            else:
                family, seq_id = default_family or "", token
            if not family:
                raise ParseError(
                    f"line {lineno}: header {token!r} has no family accession "
                    "and no default family was given"
                )
            if not seq_id:
                raise ParseError(f"line {lineno}: malformed header (no id)")
            header = (family, seq_id, lineno)
        else:
            if header is None:
                raise ParseError(f"line {lineno}: sequence data before first header")
            try:
                body.append(normalize_residues(line))
            except ParseError as exc:
                raise ParseError(
                    f"record {header[1]!r} (line {lineno}): {exc}"
                ) from None
    finish()
    return sequences


def parse_stockholm(
    data: bytes | str, default_accession: str | None = None
) -> list[Family]:
    """Parse a Stockholm 1.0 stream into one Family per alignment block.

    Aligned rows are de-gapped ('.', '-', '~' removed) before residue
    normalization. The accession comes from ``#=GF AC`` markup when
    present, else ``default_accession``.
    """
    text = _decode(data)
    lines = text.splitlines()

    first = next((ln for ln in lines if ln.strip()), None)
    if first is None or not first.strip().startswith("# STOCKHOLM"):
        raise ParseError('missing "# STOCKHOLM 1.0" header')

    families: list[Family] = []
    accession: str | None = None
    rows: list[tuple[str, str, int]] = []
    names: set[str] = set()

    def finish(lineno):
        nonlocal accession, rows, names
        if not rows and accession is None:
            return
        acc = accession or default_accession
        if acc is None:
            raise ParseError(
                f"alignment ending at line {lineno} has no #=GF AC accession "
                "and no default was given"
            )
        members = []
        for name, aligned, row_line in rows:
            degapped = "".join(ch for ch in aligned if ch not in GAP_CHARS)
            try:
                residues = normalize_residues(degapped)
            except ParseError as exc:
                raise ParseError(f"row {name!r} (line {row_line}): {exc}") from None
            members.append(RnaSequence(id=name, family=acc, residues=residues))
        families.append(Family(accession=acc, members=members))
        accession, rows, names = None, [], set()

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "//":
            finish(lineno)
        elif line.startswith("#"):
            parts = line.split()
            if len(parts) >= 3 and parts[0] == "#=GF" and parts[1] == "AC":
                accession = parts[2]
        else:
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: malformed sequence row {line!r}")
            name, aligned = parts[0], parts[1].replace(" ", "")
            if name in names:
                raise ParseError(f"line {lineno}: duplicate row name {name!r}")
            names.add(name)
            rows.append((name, aligned, lineno))

    if rows:
        raise ParseError('alignment block not terminated by "//"')
    return families


def group_by_family(sequences: list[RnaSequence]) -> list[Family]:
    """Group a flat sequence list into families, sorted by accession."""
    by_acc: dict[str, list[RnaSequence]] = {}
    for seq in sequences:
        by_acc.setdefault(seq.family, []).append(seq)
    return [Family(accession=acc, members=by_acc[acc]) for acc in sorted(by_acc)]
