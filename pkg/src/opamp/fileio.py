"""Text and binary file formats for generators, graphs, permutations, operators and s-wide specs."""
import hashlib
import os
import struct

import numpy as np

from ._errors import DomainError, ParseError
from .graphs import RotationGraph, from_edges
from .groups import GeneratorMultiset, make_group

OPERATOR_MAGIC = b"OPAMPOP1"


def _lines(text):
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            yield line


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]


def _ints(line, count=None):
    try:
        vals = [int(x) for x in line.split()]
    except ValueError:
        raise ParseError(f"expected integers, got {line!r}") from None
    if count is not None and len(vals) != count:
        raise ParseError(f"expected {count} integers, got {line!r}")
    return vals


# --- generator files ------------------------------------------------------------


def parse_generators(text):
    """Header ``group <kind> <param>``; one element per line, optionally ``<element> * <count>``."""
    lines = list(_lines(text))
    if not lines:
        raise ParseError("empty generator file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "group":
        raise ParseError(f"bad header {lines[0]!r}; expected 'group <kind> <param>'")
    try:
        param = int(head[2])
    except ValueError:
        raise ParseError(f"bad group parameter in {lines[0]!r}") from None
    try:
        G = make_group(head[1], param)
    except DomainError as exc:
        raise ParseError(str(exc)) from None
    elems, counts, counted = [], [], False
    for line in lines[1:]:
        body, mult = line, 1
        if "*" in line:
            body, _, tail = line.rpartition("*")
            try:
                mult = int(tail)
            except ValueError:
                raise ParseError(f"bad multiplicity in {line!r}") from None
            if mult < 0:
                raise ParseError(f"negative multiplicity in {line!r}")
            counted = True
        try:
            el = G.parse(body.strip())
        except DomainError as exc:
            raise ParseError(str(exc)) from None
        if not np.all(G.contains(el)):
            raise ParseError(f"{body.strip()!r} is not an element of {G!r}")
        elems.append(el)
        counts.append(mult)
    if not elems:
        raise ParseError("generator file lists no elements")
    arr = np.stack([np.asarray(e, dtype=np.int64) for e in elems])
    if counted and G.enumerable():
        hist = np.zeros(G.order, dtype=object)
        for i, c in zip(G.index(arr).tolist(), counts):
            hist[i] += c
        if all(int(v) < 2**62 for v in hist):
            hist = hist.astype(np.int64)
        return GeneratorMultiset(G, counts=hist)
    if counted:
        arr = np.repeat(arr, counts, axis=0)
    return GeneratorMultiset(G, arr)


def format_generators(S):
    G = S.group
    out = [G.header()]
    if S.is_explicit:
        out += [G.format(e) for e in S.elements]
    else:
        hist = S.histogram()
        for i in np.flatnonzero(np.asarray([int(v) != 0 for v in hist])):
            out.append(f"{G.format(G.elements[i])} * {int(hist[i])}")
    return "\n".join(out) + "\n"


def read_generators(path):
    return parse_generators(_read(path))


def write_generators(path, S):
    _write(path, format_generators(S))


# --- graph files ---------------------------------------------------------------------


def parse_graph(text):
    """``rotgraph <n> <d> <directed>`` with n*d lines ``v i u j``, or ``edgelist <n> <d>`` with edges."""
    lines = list(_lines(text))
    if not lines:
        raise ParseError("empty graph file")
    head = lines[0].split()
    if head[0] == "rotgraph":
        if len(head) != 4:
            raise ParseError("rotgraph header needs n, d and the directed flag")
        n, d, directed = _ints(" ".join(head[1:]), 3)
        if directed not in (0, 1) or n < 1 or d < 1:
            raise ParseError(f"bad rotgraph header {lines[0]!r}")
        body = lines[1:]
        if len(body) != n * d:
            raise ParseError(f"expected {n * d} rotation lines, got {len(body)}")
        nbr = np.full((n, d), -1, dtype=np.int64)
        port = np.full((n, d), -1, dtype=np.int64)
        for line in body:
            v, i, u, j = _ints(line, 4)
            if not (0 <= v < n and 0 <= i < d):
                raise ParseError(f"port ({v}, {i}) out of range")
            if nbr[v, i] != -1:
                raise ParseError(f"port ({v}, {i}) listed twice")
            nbr[v, i], port[v, i] = u, j
        try:
            return RotationGraph(nbr, None if directed else port, directed=bool(directed))
        except DomainError as exc:
            raise ParseError(str(exc)) from None
    if head[0] == "edgelist":
        if len(head) != 3:
            raise ParseError("edgelist header needs n and d")
        n, d = _ints(" ".join(head[1:]), 2)
        edges = [tuple(_ints(line, 2)) for line in lines[1:]]
        try:
            return from_edges(n, d, edges)
        except DomainError as exc:
            raise ParseError(str(exc)) from None
    raise ParseError(f"unknown graph header {lines[0]!r}")


def format_graph(g):
    out = [f"rotgraph {g.n} {g.d} {int(g.directed)}"]
    nbr = g.nbr
    port = None if g.directed else g.port
    for v in range(g.n):
        for i in range(g.d):
            j = -1 if port is None else int(port[v, i])
            out.append(f"{v} {i} {int(nbr[v, i])} {j}")
    return "\n".join(out) + "\n"


def read_graph(path):
    return parse_graph(_read(path))


def write_graph(path, g):
    _write(path, format_graph(g))


# --- permutation and monotone-map files ---------------------------------------------


def parse_perms(text):
    from .permutations import PermutationList

    lines = list(_lines(text))
    if not lines:
        raise ParseError("empty permutation file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "perms":
        raise ParseError(f"bad header {lines[0]!r}; expected 'perms <n> <count>'")
    n, count = _ints(" ".join(head[1:]), 2)
    if len(lines) - 1 != count:
        raise ParseError(f"expected {count} permutations, got {len(lines) - 1}")
    perms = np.array([[x - 1 for x in _ints(line, n)] for line in lines[1:]], dtype=np.int64)
    try:
        return PermutationList(perms.reshape(count, n))
    except DomainError as exc:
        raise ParseError(str(exc)) from None


def format_perms(P):
    out = [f"perms {P.n} {P.count}"]
    out += [" ".join(str(int(v) + 1) for v in row) for row in P.perms]
    return "\n".join(out) + "\n"


def parse_monotone(text):
    from .permutations import PartialMonotoneMap

    lines = list(_lines(text))
    if not lines:
        raise ParseError("empty monotone-map file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "monotone":
        raise ParseError(f"bad header {lines[0]!r}; expected 'monotone <n> <count>'")
    n, count = _ints(" ".join(head[1:]), 2)
    if len(lines) - 1 != count:
        raise ParseError(f"expected {count} maps, got {len(lines) - 1}")
    maps = []
    for line in lines[1:]:
        if "->" not in line:
            raise ParseError(f"expected 'dom... -> img...', got {line!r}")
        left, right = line.split("->", 1)
        dom = [x - 1 for x in _ints(left)] if left.strip() else []
        img = [x - 1 for x in _ints(right)] if right.strip() else []
        try:
            maps.append(PartialMonotoneMap(n, tuple(dom), tuple(img)))
        except DomainError as exc:
            raise ParseError(str(exc)) from None
    return maps


def format_monotone(maps, n=None):
    n = maps[0].n if n is None else n
    out = [f"monotone {n} {len(maps)}"]
    for f in maps:
        dom = " ".join(str(v + 1) for v in f.domain)
        img = " ".join(str(v + 1) for v in f.images)
        out.append(f"{dom} -> {img}".strip())
    return "\n".join(out) + "\n"


# --- operator functions ----------------------------------------------------------------


def write_operator(path, f):
    mats = np.ascontiguousarray(f.mats, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(OPERATOR_MAGIC)
        fh.write(struct.pack("<QQ", f.n, f.ell))
        fh.write(mats.tobytes())


def read_operator(path):
    from .operators import OperatorFunction

    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    if data[:8] != OPERATOR_MAGIC:
        raise ParseError("not an operator file (bad magic)")
    if len(data) < 24:
        raise ParseError("truncated operator header")
    n, ell = struct.unpack("<QQ", data[8:24])
    need = 24 + 16 * n * ell * ell
    if len(data) != need:
        raise ParseError(f"operator file holds {len(data)} bytes, expected {need}")
    mats = np.frombuffer(data[24:], dtype="<c16").reshape(n, ell, ell)
    try:
        return OperatorFunction(mats)
    except DomainError as exc:
        raise ParseError(str(exc)) from None


# --- s-wide spec files -----------------------------------------------------------------


def parse_swide_spec(text, base_dir="."):
    """Lines ``x <graph file>``, ``y <generator file>``, ``s <int>``, ``t <int>``; paths are relative to the spec."""
    fields = {}
    for line in _lines(text):
        key, _, val = line.partition(" ")
        if key not in ("x", "y", "s", "t"):
            raise ParseError(f"unknown s-wide spec key {key!r}")
        fields[key] = val.strip()
    missing = {"x", "y", "s", "t"} - set(fields)
    if missing:
        raise ParseError(f"s-wide spec is missing {sorted(missing)}")
    try:
        s, t = int(fields["s"]), int(fields["t"])
    except ValueError:
        raise ParseError("s and t must be integers") from None
    return {
        "x": os.path.join(base_dir, fields["x"]),
        "y": os.path.join(base_dir, fields["y"]),
        "s": s,
        "t": t,
    }


def read_swide_spec(path):
    return parse_swide_spec(_read(path), os.path.dirname(os.path.abspath(path)))


def format_swide_spec(x_path, y_path, s, t):
    return f"x {x_path}\ny {y_path}\ns {int(s)}\nt {int(t)}\n"


def format_report(rows):
    """``key = value # anchor`` lines; rows are (key, value) or (key, value, anchor)."""
    out = []
    for row in rows:
        key, value = row[0], row[1]
        anchor = row[2] if len(row) > 2 else ""
        if isinstance(value, float):
            value = repr(round(value, 12))
        line = f"{key} = {value}"
        if anchor:
            line += f" # {anchor}"
        out.append(line)
    return "\n".join(out) + "\n"
