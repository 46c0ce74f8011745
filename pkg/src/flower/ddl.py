"""Tokenizer and parser for CREATE TABLE statements.

Covers the PostgreSQL flavour plus a permissive generic mode: quoted and
unquoted identifiers, schema-qualified names, multi-word types, inline
column constraints (PRIMARY KEY, NOT NULL, DEFAULT, REFERENCES, CHECK) and
table-level constraints (PRIMARY KEY, FOREIGN KEY, UNIQUE, CHECK), including
composite foreign keys. Views, triggers and ALTER TABLE are out of scope.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import FlowerError


class DdlParseError(FlowerError):
    """Unparseable DDL. Carries the byte offset of the offending token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<line_comment>--[^\n]*)
  | (?P<block_comment>/\*.*?\*/)
  | (?P<qident>"(?:[^"]|"")*")
  | (?P<string>'(?:[^']|'')*')
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<word>[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<punct>[(),;.\[\]]|::|[^\s])
    """,
    re.VERBOSE | re.DOTALL,
)

# kinds: WORD (unquoted ident / keyword), QIDENT, STRING, NUMBER, PUNCT


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    pos: int  # character offset into the source text


def tokenize(text: str) -> list[Token]:
    """Split DDL text into tokens, dropping whitespace and comments."""
    tokens: list[Token] = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise DdlParseError("unrecognized character", _byte_offset(text, i))
        i = m.end()
        if m.lastgroup in ("ws", "line_comment", "block_comment"):
            continue
        kind = {
            "qident": "QIDENT",
            "string": "STRING",
            "number": "NUMBER",
            "word": "WORD",
            "punct": "PUNCT",
        }[m.lastgroup]
        tokens.append(Token(kind, m.group(), m.start()))
    return tokens


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def fold_ident(token: Token) -> str:
    """Identifier text: unquoted folds to lowercase, quoted is verbatim."""
    if token.kind == "QIDENT":
        return token.value[1:-1].replace('""', '"')
    return token.value.lower()


# --- parsed structures -----------------------------------------------------

@dataclass
class ParsedColumn:
    name: str
    declared_type: str
    is_primary_key: bool = False
    nullable: bool = True


@dataclass
class ForeignKeyClause:
    """One FOREIGN KEY / REFERENCES clause, possibly composite."""

    columns: list[str]
    target_schema: Optional[str]
    target_table: str
    target_columns: Optional[list[str]]  # None: references the target's PK


@dataclass
class ParsedTable:
    schema: Optional[str]
    name: str
    columns: list[ParsedColumn] = field(default_factory=list)
    primary_key: list[str] = field(default_factory=list)
    foreign_keys: list[ForeignKeyClause] = field(default_factory=list)
    ddl_text: str = ""


# Keywords that terminate a column's type token run.
_CONSTRAINT_STARTERS = {
    "NOT", "NULL", "PRIMARY", "UNIQUE", "REFERENCES", "DEFAULT", "CHECK",
    "CONSTRAINT", "GENERATED", "COLLATE",
}


class _Parser:
    def __init__(self, tokens: list[Token], text: str):
        self.tokens = tokens
        self.text = text
        self.i = 0

    # -- cursor helpers

    def peek(self, offset: int = 0) -> Optional[Token]:
        j = self.i + offset
        return self.tokens[j] if j < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of statement")
        self.i += 1
        return tok

    def at_word(self, word: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "WORD" and tok.value.upper() == word

    def accept_word(self, word: str) -> bool:
        if self.at_word(word):
            self.i += 1
            return True
        return False

    def expect_word(self, word: str) -> Token:
        if not self.at_word(word):
            raise self.error(f"expected {word}")
        return self.next()

    def expect_punct(self, value: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != "PUNCT" or tok.value != value:
            raise self.error(f"expected '{value}'")
        return self.next()

    def error(self, message: str) -> DdlParseError:
        tok = self.peek()
        pos = tok.pos if tok is not None else len(self.text)
        return DdlParseError(message, _byte_offset(self.text, pos))

    # -- grammar

    def parse_ident(self) -> str:
        tok = self.peek()
        if tok is None or tok.kind not in ("WORD", "QIDENT"):
            raise self.error("expected identifier")
        return fold_ident(self.next())

    def parse_qualified_name(self) -> tuple[Optional[str], str]:
        first = self.parse_ident()
        tok = self.peek()
        if tok is not None and tok.kind == "PUNCT" and tok.value == ".":
            self.next()
            return first, self.parse_ident()
        return None, first

    def parse_create_table(self) -> ParsedTable:
        self.expect_word("CREATE")
        self.accept_word("TEMPORARY") or self.accept_word("TEMP") or self.accept_word("UNLOGGED")
        self.expect_word("TABLE")
        if self.accept_word("IF"):
            self.expect_word("NOT")
            self.expect_word("EXISTS")
        schema, name = self.parse_qualified_name()
        table = ParsedTable(schema=schema, name=name)
        self.expect_punct("(")
        for element in self._split_elements():
            self._parse_element(element, table)
        # trailing options (WITH (...), TABLESPACE ...) are skipped up to ';'
        while True:
            tok = self.peek()
            if tok is None or (tok.kind == "PUNCT" and tok.value == ";"):
                break
            self.next()
        return table

    def _split_elements(self) -> list[list[Token]]:
        """Split the table body into comma-separated elements; consumes ')'."""
        elements: list[list[Token]] = []
        current: list[Token] = []
        depth = 0
        while True:
            tok = self.peek()
            if tok is None:
                raise self.error("unterminated table body, expected ')'")
            if tok.kind == "PUNCT":
                if tok.value == "(":
                    depth += 1
                elif tok.value == ")":
                    if depth == 0:
                        self.next()
                        if current:
                            elements.append(current)
                        elif elements:
                            raise DdlParseError(
                                "empty table element",
                                _byte_offset(self.text, tok.pos),
                            )
                        return elements
                    depth -= 1
                elif tok.value == "," and depth == 0:
                    if not current:
                        raise self.error("empty table element")
                    elements.append(current)
                    current = []
                    self.next()
                    continue
                elif tok.value == ";":
                    raise self.error("unterminated table body, expected ')'")
            current.append(self.next())

    def _parse_element(self, element: list[Token], table: ParsedTable) -> None:
        sub = _Parser(element, self.text)
        first = sub.peek()
        if first is None:
            raise self.error("empty table element")
        head = first.value.upper() if first.kind == "WORD" else ""
        if head == "CONSTRAINT":
            sub.next()
            sub.parse_ident()  # constraint name, not retained
            head = ""
            nxt = sub.peek()
            if nxt is not None and nxt.kind == "WORD":
                head = nxt.value.upper()
        if head in ("PRIMARY", "FOREIGN", "UNIQUE", "CHECK", "EXCLUDE"):
            self._parse_table_constraint(sub, table)
        else:
            self._parse_column(sub, table)

    def _parse_table_constraint(self, sub: _Parser, table: ParsedTable) -> None:
        if sub.accept_word("PRIMARY"):
            sub.expect_word("KEY")
            cols = _parse_column_list(sub)
            if table.primary_key:
                raise sub.error("duplicate PRIMARY KEY constraint")
            table.primary_key = cols
            for col in table.columns:
                if col.name in cols:
                    col.is_primary_key = True
                    col.nullable = False
        elif sub.accept_word("FOREIGN"):
            sub.expect_word("KEY")
            cols = _parse_column_list(sub)
            clause = self._parse_references(sub, cols)
            table.foreign_keys.append(clause)
        elif sub.accept_word("UNIQUE"):
            _parse_column_list(sub)
        elif sub.accept_word("CHECK") or sub.accept_word("EXCLUDE"):
            pass  # expression not modelled
        else:
            raise sub.error("unsupported table constraint")

    def _parse_references(self, sub: _Parser, columns: list[str]) -> ForeignKeyClause:
        ref_tok = sub.peek()
        sub.expect_word("REFERENCES")
        target_schema, target_table = sub.parse_qualified_name()
        target_columns: Optional[list[str]] = None
        nxt = sub.peek()
        if nxt is not None and nxt.kind == "PUNCT" and nxt.value == "(":
            target_columns = _parse_column_list(sub)
            if len(target_columns) != len(columns):
                pos = ref_tok.pos if ref_tok else 0
                raise DdlParseError(
                    "FOREIGN KEY column count does not match REFERENCES",
                    _byte_offset(self.text, pos),
                )
        return ForeignKeyClause(
            columns=columns,
            target_schema=target_schema,
            target_table=target_table,
            target_columns=target_columns,
        )

    def _parse_column(self, sub: _Parser, table: ParsedTable) -> None:
        name = sub.parse_ident()
        type_tokens: list[str] = []
        while True:
            tok = sub.peek()
            if tok is None:
                break
            if tok.kind == "WORD" and tok.value.upper() in _CONSTRAINT_STARTERS:
                break
            if tok.kind == "WORD":
                type_tokens.append(sub.next().value.lower())
            elif tok.kind == "PUNCT" and tok.value == "(":
                type_tokens.append(self._consume_parenthesized(sub))
            elif tok.kind == "PUNCT" and tok.value == "[":
                sub.next()
                sub.expect_punct("]")
                type_tokens.append("[]")
            else:
                break
        if not type_tokens:
            raise sub.error("expected column type")
        declared_type = _join_type(type_tokens)
        column = ParsedColumn(name=name, declared_type=declared_type)
        table.columns.append(column)

        while sub.peek() is not None:
            if sub.accept_word("NOT"):
                sub.expect_word("NULL")
                column.nullable = False
            elif sub.accept_word("NULL"):
                column.nullable = True
            elif sub.accept_word("PRIMARY"):
                sub.expect_word("KEY")
                column.is_primary_key = True
                column.nullable = False
                if name not in table.primary_key:
                    table.primary_key.append(name)
            elif sub.accept_word("UNIQUE"):
                pass
            elif sub.accept_word("REFERENCES"):
                sub.i -= 1  # let _parse_references consume the keyword
                clause = self._parse_references(sub, [name])
                table.foreign_keys.append(clause)
                self._skip_reference_actions(sub)
            elif sub.accept_word("DEFAULT"):
                self._skip_expression(sub)
            elif sub.accept_word("CHECK"):
                self._consume_parenthesized(sub)
            elif sub.accept_word("CONSTRAINT"):
                sub.parse_ident()
            elif sub.accept_word("COLLATE"):
                sub.parse_ident()
            elif sub.accept_word("GENERATED"):
                self._skip_expression(sub)
            else:
                raise sub.error("unexpected token in column definition")

    def _skip_reference_actions(self, sub: _Parser) -> None:
        while sub.at_word("ON") or sub.at_word("MATCH") or sub.at_word("DEFERRABLE") \
                or sub.at_word("INITIALLY"):
            sub.next()
            while True:
                tok = sub.peek()
                if tok is None:
                    return
                if tok.kind == "WORD" and tok.value.upper() in (
                    "ON", "MATCH", "DEFERRABLE", "INITIALLY", *_CONSTRAINT_STARTERS,
                ):
                    break
                sub.next()

    def _skip_expression(self, sub: _Parser) -> None:
        """Skip a DEFAULT/GENERATED expression up to the next constraint keyword."""
        while True:
            tok = sub.peek()
            if tok is None:
                return
            if tok.kind == "WORD" and tok.value.upper() in _CONSTRAINT_STARTERS:
                return
            if tok.kind == "PUNCT" and tok.value == "(":
                self._consume_parenthesized(sub)
            else:
                sub.next()

    def _consume_parenthesized(self, sub: _Parser) -> str:
        sub.expect_punct("(")
        parts: list[str] = []
        depth = 1
        while depth > 0:
            tok = sub.peek()
            if tok is None:
                raise sub.error("unbalanced parentheses")
            sub.next()
            if tok.kind == "PUNCT" and tok.value == "(":
                depth += 1
            elif tok.kind == "PUNCT" and tok.value == ")":
                depth -= 1
                if depth == 0:
                    break
            parts.append(tok.value)
        return "(" + "".join(parts) + ")"


def _parse_column_list(sub: _Parser) -> list[str]:
    sub.expect_punct("(")
    cols = [sub.parse_ident()]
    while True:
        tok = sub.peek()
        if tok is not None and tok.kind == "PUNCT" and tok.value == ",":
            sub.next()
            cols.append(sub.parse_ident())
            continue
        sub.expect_punct(")")
        return cols


def _join_type(tokens: list[str]) -> str:
    out = ""
    for tok in tokens:
        if tok.startswith("(") or tok == "[]":
            out += tok
        else:
            out = f"{out} {tok}" if out else tok
    return out


def parse_statement(text: str) -> ParsedTable:
    """Parse a single CREATE TABLE statement."""
    tokens = tokenize(text)
    if not tokens:
        raise DdlParseError("empty statement", 0)
    parser = _Parser(tokens, text)
    table = parser.parse_create_table()
    table.ddl_text = text.strip()
    if parser.peek() is not None:
        parser.expect_punct(";")
        if parser.peek() is not None:
            raise parser.error("trailing tokens after statement")
    _check_table(table, text)
    return table


def _check_table(table: ParsedTable, text: str) -> None:
    if not table.columns:
        raise DdlParseError(f"table {table.name} has no columns", 0)
    seen: set[str] = set()
    for col in table.columns:
        if col.name in seen:
            raise DdlParseError(f"duplicate column {col.name}", 0)
        seen.add(col.name)
    for pk_col in table.primary_key:
        if pk_col not in seen:
            raise DdlParseError(f"PRIMARY KEY names unknown column {pk_col}", 0)
    for fk in table.foreign_keys:
        for col in fk.columns:
            if col not in seen:
                raise DdlParseError(f"FOREIGN KEY names unknown column {col}", 0)


@dataclass
class ScriptIssue:
    """A statement in a script that could not be parsed."""

    message: str
    offset: int
    table_name: Optional[str]  # best-effort recovery from the statement head


def split_statements(text: str) -> list[tuple[str, int]]:
    """Split a script on top-level semicolons; returns (statement, char offset)."""
    tokens = tokenize(text)
    statements: list[tuple[str, int]] = []
    start: Optional[int] = None
    for tok in tokens:
        if start is None:
            start = tok.pos
        if tok.kind == "PUNCT" and tok.value == ";":
            stmt = text[start:tok.pos + 1]
            if stmt.strip(" ;\n\t\r"):
                statements.append((stmt, start))
            start = None
    if start is not None:
        stmt = text[start:]
        if stmt.strip(" ;\n\t\r"):
            statements.append((stmt, start))
    return statements


_NAME_HINT_RE = re.compile(
    r'create\s+(?:temporary\s+|temp\s+|unlogged\s+)?table\s+(?:if\s+not\s+exists\s+)?'
    r'(?:"((?:[^"]|"")+)"|([A-Za-z_][A-Za-z0-9_$]*))'
    r'(?:\s*\.\s*(?:"((?:[^"]|"")+)"|([A-Za-z_][A-Za-z0-9_$]*)))?',
    re.IGNORECASE,
)


def recover_table_name(statement: str) -> Optional[tuple[Optional[str], str]]:
    """Best-effort (schema, table) from a statement that failed to parse."""
    m = _NAME_HINT_RE.search(statement)
    if m is None:
        return None
    first = m.group(1) if m.group(1) is not None else (m.group(2) or "").lower()
    second = m.group(3) if m.group(3) is not None else (
        m.group(4).lower() if m.group(4) else None
    )
    if second:
        return first, second
    return None, first


def parse_script(text: str) -> tuple[list[ParsedTable], list[ScriptIssue]]:
    """Parse every CREATE TABLE statement in a script.

    Statements that fail to parse become ScriptIssue records; other statement
    kinds are ignored. Per-statement failures never abort the script.
    """
    tables: list[ParsedTable] = []
    issues: list[ScriptIssue] = []
    for stmt, offset in split_statements(text):
        head = stmt.lstrip()[:6].upper()
        if not head.startswith("CREATE"):
            continue
        try:
            tables.append(parse_statement(stmt))
        except DdlParseError as exc:
            hint = recover_table_name(stmt)
            issues.append(
                ScriptIssue(
                    message=str(exc),
                    offset=_byte_offset(text, offset) + exc.offset,
                    table_name=hint[1] if hint else None,
                )
            )
    return tables, issues
