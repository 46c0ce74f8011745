"""Catalog sessions: enumerate tables, parse DDL, extract declared constraints.

Two connectors are bundled: a directory of ``*.sql`` DDL files with one
``<schema>.<table>.csv`` data file per table, and an embedded SQLite database
file. Live connection strings are recognised but require an external
connector, so they fail with a clear error.
"""

from __future__ import annotations

import csv
import sqlite3
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from . import ddl
from .errors import SourceError


class Dialect(str, Enum):
    POSTGRES = "postgres"
    SQLITE = "sqlite"
    GENERIC = "generic"


class TypeClass(str, Enum):
    DIGITS = "Digits"
    MONEY = "Money"
    CHARACTER = "Character"
    BINARY = "Binary"
    DATA = "Data"
    BOOLEAN = "Boolean"
    GEOMETRIC = "Geometric"
    NETWORK = "Network"
    UNKNOWN = "Unknown"


_POSTGRES_CLASSES = {
    TypeClass.DIGITS: {
        "integer", "int", "int2", "int4", "int8", "smallint", "bigint",
        "decimal", "numeric", "real", "double precision", "serial",
        "smallserial", "bigserial", "float", "float4", "float8",
    },
    TypeClass.MONEY: {"money"},
    TypeClass.CHARACTER: {"character varying", "varchar", "character", "char", "text"},
    TypeClass.BINARY: {"bytea"},
    TypeClass.DATA: {
        "timestamp", "date", "time", "interval", "timestamptz", "timetz",
        "timestamp with time zone", "timestamp without time zone",
        "time with time zone", "time without time zone",
    },
    TypeClass.BOOLEAN: {"boolean", "bool", "bit", "bit varying"},
    TypeClass.GEOMETRIC: {"line", "point", "lseg", "box", "path", "polygon", "circle"},
    TypeClass.NETWORK: {"cidr", "inet", "macaddr", "macaddr8"},
}

_POSTGRES_LOOKUP = {
    name: cls for cls, names in _POSTGRES_CLASSES.items() for name in names
}


def classify_type(declared_type: str, dialect: Dialect | str = Dialect.POSTGRES) -> TypeClass:
    """Map a declared column type to its coarse class; unknown types map to Unknown."""
    base = _normalize_type(declared_type)
    if not base:
        return TypeClass.UNKNOWN
    if Dialect(dialect) == Dialect.SQLITE:
        return _classify_sqlite(base)
    return _POSTGRES_LOOKUP.get(base, TypeClass.UNKNOWN)


def _normalize_type(declared_type: str) -> str:
    s = declared_type.strip().lower()
    out = []
    depth = 0
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        elif depth == 0:
            out.append(ch)
    s = "".join(out)
    if s.endswith("[]"):
        # array types never FK-match scalars; left unnormalized so lookup misses
        return s
    return " ".join(s.split())


def _classify_sqlite(base: str) -> TypeClass:
    # SQLite type affinity rules, extended with common declared names.
    if "int" in base or "serial" in base:
        return TypeClass.DIGITS
    if "char" in base or "clob" in base or "text" in base:
        return TypeClass.CHARACTER
    if "blob" in base:
        return TypeClass.BINARY
    if "real" in base or "floa" in base or "doub" in base:
        return TypeClass.DIGITS
    if "bool" in base:
        return TypeClass.BOOLEAN
    if "date" in base or "time" in base:
        return TypeClass.DATA
    if "numeric" in base or "decimal" in base:
        return TypeClass.DIGITS
    return TypeClass.UNKNOWN


# --- domain types ------------------------------------------------------------

@dataclass(frozen=True, order=True)
class TableRef:
    schema_name: str
    table_name: str

    def __str__(self) -> str:
        return f"{self.schema_name}.{self.table_name}"

    @classmethod
    def parse(cls, text: str) -> "TableRef":
        parts = text.split(".")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise SourceError(f"expected schema.table, got {text!r}")
        return cls(parts[0], parts[1])


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    declared_type: str
    type_class: TypeClass
    is_primary_key: bool
    ordinal: int
    nullable: bool


@dataclass
class TableMeta:
    ref: TableRef
    columns: list[ColumnMeta]
    primary_key: list[str]
    rows_all: int = 0
    ddl_accessible: bool = True
    ddl_text: Optional[str] = None

    @property
    def is_empty(self) -> bool:
        return self.rows_all == 0

    def column(self, name: str) -> Optional[ColumnMeta]:
        for col in self.columns:
            if col.name == name:
                return col
        return None


@dataclass(frozen=True, order=True)
class ColumnEndpoint:
    table: TableRef
    column: str

    def __str__(self) -> str:
        return f"{self.table}.{self.column}"


@dataclass(frozen=True)
class ExplicitDep:
    """A declared foreign key, one column pair; composite FKs share a group id."""

    src: ColumnEndpoint
    dst: ColumnEndpoint
    group: Optional[str] = None


@dataclass(frozen=True)
class DanglingRef:
    """A declared reference whose target could not be resolved in the catalog."""

    src: ColumnEndpoint
    target: str
    reason: str


@dataclass(frozen=True)
class WarningRecord:
    entity: str
    message: str


# --- DDL -> metadata ----------------------------------------------------------

def parse_ddl(
    ddl_text: str,
    dialect: Dialect | str = Dialect.POSTGRES,
    default_schema: str = "public",
) -> tuple[TableMeta, list[ExplicitDep]]:
    """Parse one CREATE TABLE statement into table metadata plus declared FKs.

    References without an explicit target column list get a ``dst.column`` of
    ``""``; resolution against the loaded catalog fills in the target's
    primary key (see resolve_explicit).
    """
    dialect = Dialect(dialect)
    parsed = ddl.parse_statement(ddl_text)
    ref = TableRef(parsed.schema or default_schema, parsed.name)
    columns = [
        ColumnMeta(
            name=col.name,
            declared_type=col.declared_type,
            type_class=classify_type(col.declared_type, dialect),
            is_primary_key=col.is_primary_key,
            ordinal=i,
            nullable=col.nullable,
        )
        for i, col in enumerate(parsed.columns)
    ]
    meta = TableMeta(
        ref=ref,
        columns=columns,
        primary_key=list(parsed.primary_key),
        ddl_text=parsed.ddl_text,
    )
    deps: list[ExplicitDep] = []
    for n, fk in enumerate(parsed.foreign_keys):
        target = TableRef(fk.target_schema or ref.schema_name, fk.target_table)
        group = f"{ref}#fk{n}" if len(fk.columns) > 1 else None
        for i, col in enumerate(fk.columns):
            to_col = fk.target_columns[i] if fk.target_columns else ""
            deps.append(
                ExplicitDep(
                    src=ColumnEndpoint(ref, col),
                    dst=ColumnEndpoint(target, to_col),
                    group=group,
                )
            )
    return meta, deps


def resolve_explicit(
    deps: Iterable[ExplicitDep],
    tables: dict[TableRef, TableMeta],
) -> tuple[list[ExplicitDep], list[DanglingRef]]:
    """Check every declared dependency against the loaded catalog.

    Unresolvable references (missing table or column) are reported as dangling
    rather than dropped. An empty dst column means "the target's primary key".
    """
    resolved: list[ExplicitDep] = []
    dangling: list[DanglingRef] = []
    for dep in deps:
        target_meta = tables.get(dep.dst.table)
        if target_meta is None:
            dangling.append(DanglingRef(dep.src, str(dep.dst.table), "unknown table"))
            continue
        dst = dep.dst
        if dst.column == "":
            if len(target_meta.primary_key) != 1:
                dangling.append(
                    DanglingRef(dep.src, str(dep.dst.table),
                                "reference omits columns and target has no single-column primary key")
                )
                continue
            dst = ColumnEndpoint(dst.table, target_meta.primary_key[0])
        if target_meta.column(dst.column) is None:
            dangling.append(DanglingRef(dep.src, str(dst), "unknown column"))
            continue
        src_meta = tables.get(dep.src.table)
        if src_meta is None or src_meta.column(dep.src.column) is None:
            dangling.append(DanglingRef(dep.src, str(dst), "unknown source column"))
            continue
        if dep.src == dst:
            dangling.append(DanglingRef(dep.src, str(dst), "self-referencing column"))
            continue
        resolved.append(replace(dep, dst=dst))
    return resolved, dangling


# --- value parsing -------------------------------------------------------------

_TRUE_WORDS = {"t", "true", "1", "yes", "y", "on"}
_FALSE_WORDS = {"f", "false", "0", "no", "n", "off"}


def parse_value(raw: Optional[str], type_class: TypeClass):
    """Convert a CSV cell into a comparable Python value; '' and None are null."""
    if raw is None or raw == "":
        return None
    if type_class == TypeClass.DIGITS or type_class == TypeClass.MONEY:
        text = raw.strip()
        if type_class == TypeClass.MONEY:
            text = text.lstrip("$").replace(",", "")
        try:
            return int(text)
        except ValueError:
            try:
                return float(text)
            except ValueError:
                return raw
    if type_class == TypeClass.BOOLEAN:
        low = raw.strip().lower()
        if low in _TRUE_WORDS:
            return True
        if low in _FALSE_WORDS:
            return False
        return raw
    return raw


# --- sessions -------------------------------------------------------------------

class CatalogSession:
    """Read-only access to one data source's tables, data and declared FKs."""

    dialect: Dialect

    def tables(self) -> list[TableMeta]:
        raise NotImplementedError

    def column_values(self, ref: TableRef, column: str) -> list:
        """All values of one column, in storage order, None for nulls."""
        raise NotImplementedError

    def explicit_deps(self) -> tuple[list[ExplicitDep], list[DanglingRef]]:
        raise NotImplementedError

    @property
    def warnings(self) -> list[WarningRecord]:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError

    def close(self) -> None:
        pass


class DirectorySession(CatalogSession):
    """DDL files (*.sql) plus one <schema>.<table>.csv data file per table."""

    def __init__(self, root: Path, dialect: Dialect = Dialect.POSTGRES,
                 default_schema: str = "public"):
        self.root = root
        self.dialect = dialect
        self.default_schema = default_schema
        self._warnings: list[WarningRecord] = []
        self._tables: dict[TableRef, TableMeta] = {}
        self._raw_deps: list[ExplicitDep] = []
        self._load()

    def _load(self) -> None:
        for sql_path in sorted(self.root.glob("*.sql")):
            text = sql_path.read_text(encoding="utf-8")
            parsed, issues = ddl.parse_script(text)
            for issue in issues:
                self._register_broken(sql_path, issue)
            for table in parsed:
                meta, deps = self._from_parsed(table)
                if meta.ref in self._tables:
                    self._warn(str(meta.ref), f"duplicate definition in {sql_path.name} ignored")
                    continue
                self._tables[meta.ref] = meta
                self._raw_deps.extend(deps)
        for csv_path in sorted(self.root.glob("*.csv")):
            ref = self._ref_from_filename(csv_path)
            if ref is None:
                self._warn(csv_path.name, "data file name is not <schema>.<table>.csv")
                continue
            if ref not in self._tables:
                self._tables[ref] = self._table_from_csv(ref, csv_path)
        for ref, meta in self._tables.items():
            data = self._data_path(ref)
            if data.exists():
                meta.rows_all = self._count_rows(data)
                self._check_header(ref, meta, data)
            elif meta.ddl_accessible:
                self._warn(str(ref), "no data file; table treated as empty")
        if not self._tables and not self._warnings:
            # an empty directory is a valid zero-table source
            pass

    def _from_parsed(self, table: ddl.ParsedTable) -> tuple[TableMeta, list[ExplicitDep]]:
        stmt = table.ddl_text + (";" if not table.ddl_text.endswith(";") else "")
        return parse_ddl(stmt, self.dialect, self.default_schema)

    def _register_broken(self, sql_path: Path, issue: ddl.ScriptIssue) -> None:
        name = issue.table_name
        if name is None:
            self._warn(sql_path.name, f"unparseable statement: {issue.message}")
            return
        ref = TableRef(self.default_schema, name)
        self._warn(str(ref), f"DDL not accessible: {issue.message}")
        data = self._data_path(ref)
        if data.exists():
            meta = self._table_from_csv(ref, data, warn=False)
        else:
            meta = TableMeta(ref=ref, columns=[], primary_key=[], ddl_accessible=False)
        meta.ddl_accessible = False
        self._tables.setdefault(ref, meta)

    def _table_from_csv(self, ref: TableRef, csv_path: Path, warn: bool = True) -> TableMeta:
        if warn:
            self._warn(str(ref), "no DDL found; columns derived from CSV header")
        with csv_path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, [])
        columns = [
            ColumnMeta(name=name, declared_type="", type_class=TypeClass.UNKNOWN,
                       is_primary_key=False, ordinal=i, nullable=True)
            for i, name in enumerate(header)
        ]
        return TableMeta(ref=ref, columns=columns, primary_key=[],
                         ddl_accessible=False, ddl_text=None)

    def _ref_from_filename(self, path: Path) -> Optional[TableRef]:
        parts = path.name[:-len(".csv")].split(".")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            return None
        return TableRef(parts[0], parts[1])

    def _data_path(self, ref: TableRef) -> Path:
        return self.root / f"{ref.schema_name}.{ref.table_name}.csv"

    def _count_rows(self, data: Path) -> int:
        with data.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            return sum(1 for _ in reader)

    def _check_header(self, ref: TableRef, meta: TableMeta, data: Path) -> None:
        if not meta.columns:
            return
        with data.open(newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh), [])
        declared = [c.name for c in meta.columns]
        if header != declared:
            self._warn(str(ref), "CSV header does not match declared columns")

    def _warn(self, entity: str, message: str) -> None:
        self._warnings.append(WarningRecord(entity, message))

    def tables(self) -> list[TableMeta]:
        return [self._tables[ref] for ref in sorted(self._tables)]

    def column_values(self, ref: TableRef, column: str) -> list:
        meta = self._tables.get(ref)
        if meta is None:
            raise SourceError(f"unknown table {ref}")
        col = meta.column(column)
        type_class = col.type_class if col is not None else TypeClass.UNKNOWN
        data = self._data_path(ref)
        if not data.exists():
            return []
        values = []
        with data.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, [])
            try:
                idx = header.index(column)
            except ValueError:
                raise SourceError(f"column {column} not in data file for {ref}")
            for row in reader:
                raw = row[idx] if idx < len(row) else None
                values.append(parse_value(raw, type_class))
        return values

    def explicit_deps(self) -> tuple[list[ExplicitDep], list[DanglingRef]]:
        return resolve_explicit(self._raw_deps, self._tables)

    @property
    def warnings(self) -> list[WarningRecord]:
        return list(self._warnings)

    def describe(self) -> str:
        return str(self.root)


class SqliteSession(CatalogSession):
    """Embedded single-file database; metadata comes from the catalog pragmas."""

    SCHEMA = "main"

    def __init__(self, path: Path):
        self.path = path
        self.dialect = Dialect.SQLITE
        try:
            self._conn = sqlite3.connect(f"file:{path}?mode=ro", uri=True)
        except sqlite3.Error as exc:
            raise SourceError(f"source unreachable: {path} ({exc})")
        self._warnings: list[WarningRecord] = []
        self._tables: dict[TableRef, TableMeta] = {}
        self._raw_deps: list[ExplicitDep] = []
        self._load()

    def _load(self) -> None:
        try:
            rows = self._conn.execute(
                "SELECT name, sql FROM sqlite_master WHERE type='table' "
                "AND name NOT LIKE 'sqlite_%' ORDER BY name"
            ).fetchall()
        except sqlite3.DatabaseError as exc:
            raise SourceError(f"source unreachable: {self.path} ({exc})")
        for name, sql in rows:
            ref = TableRef(self.SCHEMA, name)
            quoted = name.replace('"', '""')
            columns = []
            pk_cols: list[tuple[int, str]] = []
            for cid, col_name, col_type, notnull, _default, pk in self._conn.execute(
                f'PRAGMA table_info("{quoted}")'
            ):
                columns.append(
                    ColumnMeta(
                        name=col_name,
                        declared_type=col_type or "",
                        type_class=classify_type(col_type or "", Dialect.SQLITE),
                        is_primary_key=pk > 0,
                        ordinal=cid,
                        nullable=not notnull and pk == 0,
                    )
                )
                if pk > 0:
                    pk_cols.append((pk, col_name))
            rows_all = self._conn.execute(
                f'SELECT COUNT(*) FROM "{quoted}"'
            ).fetchone()[0]
            meta = TableMeta(
                ref=ref,
                columns=columns,
                primary_key=[c for _, c in sorted(pk_cols)],
                rows_all=rows_all,
                ddl_accessible=sql is not None,
                ddl_text=sql,
            )
            if sql is None:
                self._warn(str(ref), "DDL not accessible from sqlite_master")
            self._tables[ref] = meta
            for _id, _seq, target, from_col, to_col, *_ in self._conn.execute(
                f'PRAGMA foreign_key_list("{quoted}")'
            ):
                self._raw_deps.append(
                    ExplicitDep(
                        src=ColumnEndpoint(ref, from_col),
                        dst=ColumnEndpoint(TableRef(self.SCHEMA, target), to_col or ""),
                    )
                )

    def _warn(self, entity: str, message: str) -> None:
        self._warnings.append(WarningRecord(entity, message))

    def tables(self) -> list[TableMeta]:
        return [self._tables[ref] for ref in sorted(self._tables)]

    def column_values(self, ref: TableRef, column: str) -> list:
        if ref not in self._tables:
            raise SourceError(f"unknown table {ref}")
        col = column.replace('"', '""')
        tab = ref.table_name.replace('"', '""')
        cur = self._conn.execute(f'SELECT "{col}" FROM "{tab}"')
        return [row[0] for row in cur]

    def explicit_deps(self) -> tuple[list[ExplicitDep], list[DanglingRef]]:
        return resolve_explicit(self._raw_deps, self._tables)

    @property
    def warnings(self) -> list[WarningRecord]:
        return list(self._warnings)

    def describe(self) -> str:
        return str(self.path)

    def close(self) -> None:
        self._conn.close()


_SQLITE_SUFFIXES = {".db", ".sqlite", ".sqlite3"}


def open_source(locator: str, dialect: Dialect | str = Dialect.POSTGRES) -> CatalogSession:
    """Open a catalog session over a DDL+CSV directory or an SQLite file."""
    try:
        dialect = Dialect(dialect)
    except ValueError:
        supported = ", ".join(d.value for d in Dialect)
        raise SourceError(f"unsupported dialect {dialect!r}; expected one of: {supported}")
    if locator.startswith("sqlite:///"):
        return _open_sqlite(Path(locator[len("sqlite:///"):]))
    if "://" in locator:
        raise SourceError(
            f"live connection strings are not supported by the bundled connectors: {locator!r}; "
            "use a DDL+CSV directory or an SQLite database file"
        )
    path = Path(locator)
    if not path.exists():
        raise SourceError(f"source unreachable: {locator}")
    if path.is_dir():
        return DirectorySession(path, dialect)
    if path.suffix.lower() in _SQLITE_SUFFIXES or _looks_like_sqlite(path):
        return _open_sqlite(path)
    raise SourceError(f"malformed locator: {locator} is neither a directory nor an SQLite file")


def _open_sqlite(path: Path) -> SqliteSession:
    if not path.exists():
        raise SourceError(f"source unreachable: {path}")
    return SqliteSession(path)


def _looks_like_sqlite(path: Path) -> bool:
    with path.open("rb") as fh:
        return fh.read(16) == b"SQLite format 3\x00"


def list_entities(session: CatalogSession) -> list[TableMeta]:
    """One TableMeta per table; inaccessible DDL degrades to a warning."""
    return session.tables()
