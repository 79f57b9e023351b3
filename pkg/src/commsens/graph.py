"""Sparse adjacency storage, file ingestion, and operator wrappers.

Graphs are held in CSR form with strictly positive edge weights, no self
loops and no duplicate entries; undirected graphs store both orientations
of every edge with identical weights. Node indices are 0-based internally.
Files may be 1-based (the default) or 0-based; the base used at parse time
is remembered so output and serialization stay in the caller's convention.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels


class GraphFormatError(ValueError):
    """Malformed graph input. Carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Direction:
    """An off-diagonal perturbation direction for edge weight (i, j).

    ``symmetric`` means the perturbation acts on both orientations at once,
    i.e. the direction matrix has unit entries at (i, j) and (j, i). That is
    the natural choice for undirected graphs, where a single orientation
    cannot be changed without breaking symmetry.
    """

    i: int
    j: int
    symmetric: bool = False

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("perturbation direction must be off-diagonal (i != j)")
        if self.i < 0 or self.j < 0:
            raise ValueError("node indices must be non-negative")

    def pair(self):
        return (self.i, self.j)


class AdjacencyMatrix:
    """Weighted adjacency matrix of a directed or undirected graph.

    Parameters
    ----------
    n : int
        Number of nodes.
    rows, cols : array_like of int
        Stored entries, 0-based. For undirected graphs both orientations of
        every edge must be present with equal weights.
    weights : array_like of float
        Strictly positive, finite edge weights.
    directed : bool
        Whether the entries represent an asymmetric relation.
    node_labels : list of str, optional
        Display names, one per node.
    index_base : int
        The external indexing convention (0 or 1) used when the graph was
        read; kept for round-tripping and report formatting.
    """

    def __init__(self, n, rows, cols, weights, directed=True, node_labels=None,
                 index_base=1):
        n = int(n)
        if n <= 0:
            raise ValueError("graph must have at least one node")
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        if not (rows.shape == cols.shape == weights.shape) or rows.ndim != 1:
            raise ValueError("rows, cols and weights must be 1-d arrays of equal length")
        if rows.size:
            if rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n:
                raise ValueError("node index out of range")
            if (rows == cols).any():
                k = int(np.argmax(rows == cols))
                raise ValueError(f"self-loop at node {rows[k] + index_base} not allowed")
            if not np.isfinite(weights).all() or (weights <= 0).any():
                raise ValueError("edge weights must be finite and strictly positive")
        if node_labels is not None and len(node_labels) != n:
            raise ValueError("node_labels length must equal n")
        if index_base not in (0, 1):
            raise ValueError("index_base must be 0 or 1")

        order = np.lexsort((cols, rows))
        rows, cols, weights = rows[order], cols[order], weights[order]
        if rows.size > 1:
            dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if dup.any():
                k = int(np.argmax(dup))
                raise ValueError(
                    f"duplicate edge ({rows[k] + index_base}, {cols[k] + index_base})"
                )
        if not directed and rows.size:
            tord = np.lexsort((rows, cols))
            if (not np.array_equal(cols[tord], rows)
                    or not np.array_equal(rows[tord], cols)
                    or not np.array_equal(weights[tord], weights)):
                raise ValueError(
                    "undirected graph requires symmetric entries with equal weights"
                )

        self.n = n
        self.directed = bool(directed)
        self.node_labels = list(node_labels) if node_labels is not None else None
        self.index_base = index_base
        self._indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=self._indptr[1:])
        self._indices = cols
        self._data = weights
        self._row_expand = None   # built lazily for the numpy kernel
        self._t = None            # lazily built CSR of the transpose

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_edges(cls, n, edges, directed=True, node_labels=None, index_base=1):
        """Build from logical edges; undirected edges are listed once."""
        rows, cols, weights = [], [], []
        for i, j, w in edges:
            rows.append(i)
            cols.append(j)
            weights.append(w)
            if not directed:
                rows.append(j)
                cols.append(i)
                weights.append(w)
        return cls(n, rows, cols, weights, directed=directed,
                   node_labels=node_labels, index_base=index_base)

    @classmethod
    def from_dense(cls, arr, directed=None, index_base=1):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("adjacency matrix must be square")
        if directed is None:
            directed = not np.array_equal(arr, arr.T)
        rows, cols = np.nonzero(arr)
        return cls(arr.shape[0], rows, cols, arr[rows, cols], directed=directed,
                   index_base=index_base)

    # -- basic queries ---------------------------------------------------------

    @property
    def nnz(self):
        return int(self._data.size)

    @property
    def symmetric(self):
        return not self.directed

    def entry_arrays(self):
        """(rows, cols, weights) of all stored entries in CSR order."""
        rows = _kernels.expand_rows(self._indptr)
        return rows, self._indices.copy(), self._data.copy()

    def entries(self):
        rows = _kernels.expand_rows(self._indptr)
        for i, j, w in zip(rows, self._indices, self._data):
            yield int(i), int(j), float(w)

    def weight(self, i, j):
        lo, hi = self._indptr[i], self._indptr[i + 1]
        k = lo + np.searchsorted(self._indices[lo:hi], j)
        if k < hi and self._indices[k] == j:
            return float(self._data[k])
        return 0.0

    def has_edge(self, i, j):
        return self.weight(i, j) != 0.0

    def to_dense(self):
        out = np.zeros((self.n, self.n))
        rows = _kernels.expand_rows(self._indptr)
        out[rows, self._indices] = self._data
        return out

    def __eq__(self, other):
        if not isinstance(other, AdjacencyMatrix):
            return NotImplemented
        return (self.n == other.n
                and self.directed == other.directed
                and self.index_base == other.index_base
                and self.node_labels == other.node_labels
                and np.array_equal(self._indptr, other._indptr)
                and np.array_equal(self._indices, other._indices)
                and np.array_equal(self._data, other._data))

    __hash__ = None

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"<AdjacencyMatrix n={self.n} nnz={self.nnz} {kind}>"

    # -- operator interface ----------------------------------------------------

    def matvec(self, v):
        v = np.asarray(v, dtype=np.float64)
        if self._row_expand is None and _kernels.BACKEND == "numpy":
            self._row_expand = _kernels.expand_rows(self._indptr)
        return _kernels.csr_matvec(self._indptr, self._indices, self._data, v,
                                   self._row_expand)

    def rmatvec(self, v):
        if not self.directed:
            return self.matvec(v)
        t = self._transpose()
        return t.matvec(v)

    def _transpose(self):
        if self._t is None:
            rows = _kernels.expand_rows(self._indptr)
            self._t = AdjacencyMatrix(self.n, self._indices, rows, self._data,
                                      directed=True, index_base=self.index_base)
        return self._t

    # -- single-edge what-if ----------------------------------------------------

    def with_edge_change(self, d, amount):
        """New graph with w(d) increased by ``amount``.

        A change that brings a weight exactly to zero removes the edge; one
        that would make it negative is an error. Undirected graphs accept
        only symmetric directions.
        """
        if not isinstance(d, Direction):
            raise TypeError("d must be a Direction")
        if d.i >= self.n or d.j >= self.n:
            raise ValueError("direction out of range")
        if not self.directed and not d.symmetric:
            raise ValueError("undirected graphs require symmetric directions")
        targets = [(d.i, d.j)]
        if d.symmetric:
            targets.append((d.j, d.i))
        rows, cols, weights = self.entry_arrays()
        entries = {(int(i), int(j)): float(w) for i, j, w in zip(rows, cols, weights)}
        for i, j in targets:
            w = entries.get((i, j), 0.0) + amount
            if w < 0:
                raise ValueError(f"change would make weight of ({i}, {j}) negative")
            if w == 0.0:
                entries.pop((i, j), None)
            else:
                entries[(i, j)] = w
        items = sorted(entries.items())
        return AdjacencyMatrix(
            self.n,
            [ij[0] for ij, _ in items],
            [ij[1] for ij, _ in items],
            [w for _, w in items],
            directed=self.directed,
            node_labels=self.node_labels,
            index_base=self.index_base,
        )


class PerturbedOperator:
    """Implicit uniform regularization: base matrix plus delta on every entry.

    Represents A + delta * ones without ever materializing the dense rank-one
    coupling; applying it costs one sparse matvec plus a vector sum.
    """

    def __init__(self, base, delta):
        if delta < 0:
            raise ValueError("delta must be non-negative")
        self.base = base
        self.delta = float(delta)

    @property
    def n(self):
        return self.base.n

    @property
    def symmetric(self):
        return self.base.symmetric

    def matvec(self, v):
        v = np.asarray(v, dtype=np.float64)
        return self.base.matvec(v) + self.delta * v.sum()

    def rmatvec(self, v):
        v = np.asarray(v, dtype=np.float64)
        return self.base.rmatvec(v) + self.delta * v.sum()

    def to_dense(self):
        return self.base.to_dense() + self.delta

    def __repr__(self):
        return f"<PerturbedOperator delta={self.delta:g} base={self.base!r}>"


class EdgeUpdateOperator:
    """base + amount * E_d, applied implicitly (rank one, or two if symmetric)."""

    def __init__(self, base, d, amount):
        self.base = base
        self.d = d
        self.amount = float(amount)

    @property
    def n(self):
        return self.base.n

    @property
    def symmetric(self):
        return self.base.symmetric and self.d.symmetric

    def matvec(self, v):
        v = np.asarray(v, dtype=np.float64)
        out = self.base.matvec(v)
        out[self.d.i] += self.amount * v[self.d.j]
        if self.d.symmetric:
            out[self.d.j] += self.amount * v[self.d.i]
        return out

    def rmatvec(self, v):
        v = np.asarray(v, dtype=np.float64)
        out = self.base.rmatvec(v)
        out[self.d.j] += self.amount * v[self.d.i]
        if self.d.symmetric:
            out[self.d.i] += self.amount * v[self.d.j]
        return out


class DenseOperator:
    """Adapter giving a plain ndarray the operator interface."""

    def __init__(self, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("operator matrix must be square")
        self.arr = arr

    @property
    def n(self):
        return self.arr.shape[0]

    @property
    def symmetric(self):
        return np.array_equal(self.arr, self.arr.T)

    def matvec(self, v):
        return self.arr @ np.asarray(v, dtype=np.float64)

    def rmatvec(self, v):
        return self.arr.T @ np.asarray(v, dtype=np.float64)

    def to_dense(self):
        return self.arr.copy()


# -- parsing -------------------------------------------------------------------


def parse_edge_list(text, directed=True, index_base=1):
    """Parse a whitespace-separated edge list.

    Each non-comment line is ``i j`` or ``i j w`` (weight defaults to 1).
    Lines whose first non-blank character is ``#`` are comments. Node ids
    follow ``index_base``. Self-loops, non-positive weights and duplicate
    edges are rejected with the offending line number. In undirected mode an
    edge may be listed once, or in both orientations with bit-equal weights;
    conflicting orientation weights are rejected rather than averaged.
    """
    if index_base not in (0, 1):
        raise ValueError("index_base must be 0 or 1")
    seen = {}     # ordered (i, j) -> line of first occurrence
    logical = {}  # canonical key -> (i, j, w, line)
    max_node = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(
                f"expected 'i j' or 'i j w', got {len(parts)} fields", line=lineno)
        try:
            i_ext, j_ext = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(
                f"node ids must be integers, got {parts[0]!r} {parts[1]!r}",
                line=lineno) from None
        if len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphFormatError(
                    f"weight must be a number, got {parts[2]!r}", line=lineno) from None
        else:
            w = 1.0
        i, j = i_ext - index_base, j_ext - index_base
        if i < 0 or j < 0:
            raise GraphFormatError(
                f"node id below index base {index_base}", line=lineno)
        if i == j:
            raise GraphFormatError(f"self-loop at node {i_ext}", line=lineno)
        if not np.isfinite(w) or w <= 0:
            raise GraphFormatError(
                f"edge weight must be finite and positive, got {parts[2]}",
                line=lineno)
        if (i, j) in seen:
            raise GraphFormatError(
                f"duplicate edge ({i_ext}, {j_ext}), first seen on line "
                f"{seen[(i, j)]}", line=lineno)
        seen[(i, j)] = lineno
        if directed:
            logical[(i, j)] = (i, j, w, lineno)
        else:
            key = (min(i, j), max(i, j))
            if key in logical:
                w0, line0 = logical[key][2], logical[key][3]
                if w != w0:
                    raise GraphFormatError(
                        f"conflicting weights for undirected edge "
                        f"({i_ext}, {j_ext}): {w} here vs {w0} on line {line0}",
                        line=lineno)
                # mirror of an edge we already have; same undirected edge
            else:
                logical[key] = (i, j, w, lineno)
        max_node = max(max_node, i, j)
    if max_node < 0:
        raise GraphFormatError("no edges found")
    n = max_node + 1
    edges = [(i, j, w) for i, j, w, _ in logical.values()]
    return AdjacencyMatrix.from_edges(n, edges, directed=directed,
                                      index_base=index_base)


def parse_matrix_market(text, directed=None):
    """Parse a MatrixMarket coordinate file into an adjacency matrix.

    Accepts real, integer and pattern fields (pattern entries get weight 1)
    with general or symmetric symmetry; complex fields, skew symmetry and
    dense array format are rejected. Symmetric storage is expanded to both
    orientations; diagonal entries are rejected as self-loops. When
    ``directed`` is None the symmetry header decides: symmetric files load
    as undirected graphs, general files as directed ones.
    """
    lines = text.splitlines()
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        raise GraphFormatError("missing MatrixMarket header", line=1)
    header = lines[0].split()
    if len(header) != 5:
        raise GraphFormatError("malformed MatrixMarket header", line=1)
    _, obj, fmt, field, symmetry = (tok.lower() for tok in header)
    if obj != "matrix":
        raise GraphFormatError(f"unsupported object {obj!r}", line=1)
    if fmt != "coordinate":
        raise GraphFormatError(f"unsupported format {fmt!r} (need coordinate)", line=1)
    if field not in ("real", "integer", "pattern"):
        raise GraphFormatError(f"unsupported field {field!r}", line=1)
    if symmetry not in ("general", "symmetric"):
        raise GraphFormatError(f"unsupported symmetry {symmetry!r}", line=1)

    k = 1
    while k < len(lines) and (not lines[k].strip() or lines[k].lstrip().startswith("%")):
        k += 1
    if k >= len(lines):
        raise GraphFormatError("missing size line")
    size = lines[k].split()
    if len(size) != 3:
        raise GraphFormatError("size line must be 'rows cols nnz'", line=k + 1)
    try:
        nrows, ncols, nnz = (int(tok) for tok in size)
    except ValueError:
        raise GraphFormatError("size line must contain integers", line=k + 1) from None
    if nrows != ncols:
        raise GraphFormatError(f"adjacency matrix must be square, got "
                               f"{nrows}x{ncols}", line=k + 1)

    want_vals = field != "pattern"
    rows, cols, weights = [], [], []
    count = 0
    for lineno in range(k + 1, len(lines)):
        line = lines[lineno].strip()
        if not line or line.startswith("%"):
            continue
        parts = line.split()
        if len(parts) != (3 if want_vals else 2):
            raise GraphFormatError(
                f"expected {'i j v' if want_vals else 'i j'}", line=lineno + 1)
        try:
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
            w = float(parts[2]) if want_vals else 1.0
        except ValueError:
            raise GraphFormatError("malformed entry", line=lineno + 1) from None
        if i < 0 or j < 0 or i >= nrows or j >= nrows:
            raise GraphFormatError("entry index out of range", line=lineno + 1)
        if i == j:
            raise GraphFormatError(f"self-loop at node {i + 1}", line=lineno + 1)
        if not np.isfinite(w) or w <= 0:
            raise GraphFormatError("edge weight must be finite and positive",
                                   line=lineno + 1)
        rows.append(i)
        cols.append(j)
        weights.append(w)
        if symmetry == "symmetric":
            rows.append(j)
            cols.append(i)
            weights.append(w)
        count += 1
    if count != nnz:
        raise GraphFormatError(f"size line promised {nnz} entries, found {count}")
    if directed is None:
        directed = symmetry == "general"
    try:
        return AdjacencyMatrix(nrows, rows, cols, weights, directed=directed,
                               index_base=1)
    except ValueError as exc:
        raise GraphFormatError(str(exc)) from None


def to_edge_list_text(a):
    """Canonical edge-list serialization: entries sorted by (i, j).

    Undirected graphs emit each edge once with i <= j. Weights are written
    in shortest round-trip form, so parse -> serialize -> parse is exact.
    """
    base = a.index_base
    out = []
    for i, j, w in a.entries():
        if not a.directed and i > j:
            continue
        out.append(f"{i + base} {j + base} {w!r}")
    return "\n".join(out) + "\n"


def is_strongly_connected(a):
    """Every node reachable from node 0 along edges and along reversed edges."""
    if a.n == 1:
        return True
    if not a.directed:
        return _covers_all(a._indptr, a._indices, a.n)
    return (_covers_all(a._indptr, a._indices, a.n)
            and _covers_all(a._transpose()._indptr, a._transpose()._indices, a.n))


def _covers_all(indptr, indices, n):
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = np.array([0], dtype=np.int64)
    while frontier.size:
        chunks = [indices[indptr[u]:indptr[u + 1]] for u in frontier]
        nxt = np.unique(np.concatenate(chunks)) if chunks else np.empty(0, np.int64)
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    return bool(seen.all())


BUNDLED_GRAPHS = ("demo4", "flow8", "hub7", "path8")


def bundled_graph(name):
    """Load one of the small directed graphs shipped with the package.

    Available names: demo4 (weighted 4-node), flow8 (8-node with a source
    node, not strongly connected), hub7 (7-node with a sink node, not
    strongly connected), path8 (directed path).
    """
    if name not in BUNDLED_GRAPHS:
        raise ValueError(f"unknown bundled graph {name!r}; available: "
                         f"{', '.join(BUNDLED_GRAPHS)}")
    from importlib import resources

    text = resources.files(__package__).joinpath(
        f"fixtures/{name}.edges").read_text(encoding="utf-8")
    return parse_edge_list(text, directed=True)


def direction_candidates(a, which="existing"):
    """Enumerate perturbation directions of a graph.

    ``which`` is ``existing`` (stored edges), ``absent`` (off-diagonal zero
    entries; quadratic in n, intended for small graphs) or ``all``. On
    undirected graphs each unordered pair appears once, as a symmetric
    direction with i < j.
    """
    if which not in ("existing", "absent", "all"):
        raise ValueError("which must be 'existing', 'absent' or 'all'")
    sym = not a.directed
    out = []
    if which in ("existing", "all"):
        for i, j, _ in a.entries():
            if sym and i > j:
                continue
            out.append(Direction(i, j, symmetric=sym))
    if which in ("absent", "all"):
        dense = a.to_dense()
        for i in range(a.n):
            start = i + 1 if sym else 0
            for j in range(start, a.n):
                if i != j and dense[i, j] == 0.0:
                    out.append(Direction(i, j, symmetric=sym))
    out.sort(key=lambda d: (d.i, d.j))
    return out
