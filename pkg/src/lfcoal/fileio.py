"""File formats: JSON-lines depth records and Newick text files.

JSON-lines files open with a format header line and then carry one
``{"T": ..., "depths": [...]}`` object per tree; integers round-trip
bit-exactly.  Newick files carry one tree per line.  All writers go
through an atomic temp-file-plus-rename so a crash never leaves a
truncated output behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from contextlib import contextmanager

from .errors import LfcoalError
from .trees import DepthSeq, depths_to_tree, parse_newick, tree_to_depths, write_newick

TREES_FORMAT = "lfcoal.trees"
FORMAT_VERSION = 1

__all__ = [
    "TREES_FORMAT",
    "FORMAT_VERSION",
    "atomic_write",
    "write_depths_jsonl",
    "read_depths_jsonl",
    "write_newick_file",
    "read_newick_file",
    "read_depths_auto",
    "sniff_format",
]


@contextmanager
def atomic_write(path):
    """Open a temp file in the target directory, rename over path on success."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    handle = os.fdopen(fd, "w", encoding="utf-8", newline="\n")
    try:
        yield handle
        handle.close()
        os.replace(tmp, path)
    except BaseException:
        handle.close()
        os.unlink(tmp)
        raise


def _header_line() -> str:
    return json.dumps({"format": TREES_FORMAT, "version": FORMAT_VERSION})


def write_depths_jsonl(path, seqs):
    """Write depth sequences as JSON lines, prefixed by the format header."""
    with atomic_write(path) as handle:
        handle.write(_header_line() + "\n")
        for seq in seqs:
            handle.write(json.dumps({"T": seq.T, "depths": list(seq.depths)}) + "\n")


def read_depths_jsonl(path) -> list[DepthSeq]:
    """Read a JSON-lines tree file; the header line is optional."""
    out = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LfcoalError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "format" in record:
                if record.get("format") != TREES_FORMAT:
                    raise LfcoalError(
                        f"{path}:{lineno}: unexpected format {record.get('format')!r}"
                    )
                continue
            if "T" not in record or "depths" not in record:
                raise LfcoalError(f"{path}:{lineno}: record needs 'T' and 'depths'")
            out.append(DepthSeq(T=record["T"], depths=tuple(record["depths"])))
    return out


def write_newick_file(path, seqs):
    """Write one Newick tree per line."""
    with atomic_write(path) as handle:
        for seq in seqs:
            handle.write(write_newick(depths_to_tree(seq)) + "\n")


def read_newick_file(path) -> list[DepthSeq]:
    """Read one Newick tree per line into depth sequences."""
    out = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            out.append(tree_to_depths(parse_newick(line)))
    return out


def sniff_format(path) -> str:
    """Guess 'jsonl' or 'newick' from the first non-blank character."""
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            stripped = line.strip()
            if stripped:
                return "jsonl" if stripped[0] == "{" else "newick"
    return "jsonl"


def read_depths_auto(path, fmt=None) -> list[DepthSeq]:
    """Read trees from either supported format; fmt overrides sniffing."""
    fmt = fmt or sniff_format(path)
    if fmt == "jsonl":
        return read_depths_jsonl(path)
    if fmt == "newick":
        return read_newick_file(path)
    raise LfcoalError(f"unknown tree format {fmt!r}")
