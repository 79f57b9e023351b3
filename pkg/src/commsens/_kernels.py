"""CSR matrix-vector kernels.

The matvec inside Krylov and Perron iterations is the only hot loop in the
package, so it lives here in two interchangeable implementations: a
numba-compiled one and a pure-numpy one (segmented sum via ``np.bincount``).
``COMMSENS_KERNELS`` selects the backend: ``auto`` (default, numba when
importable), ``numba``, or ``numpy``.
"""

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    numba = None
    HAS_NUMBA = False


def _select_backend():
    choice = os.environ.get("COMMSENS_KERNELS", "auto").lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            "COMMSENS_KERNELS must be 'auto', 'numba' or 'numpy', got %r" % choice
        )
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    if choice == "numba" and not HAS_NUMBA:
        raise ImportError("COMMSENS_KERNELS=numba but numba is not importable")
    return choice


BACKEND = _select_backend()


def csr_matvec_numpy(indptr, indices, data, x, row_of_entry):
    """out[i] = sum_k data[k] * x[indices[k]] over row i's entries.

    ``row_of_entry`` maps each stored entry to its row (precomputed once per
    matrix); the reduction is a single bincount over the entry products.
    """
    prods = data * x[indices]
    return np.bincount(row_of_entry, weights=prods, minlength=indptr.shape[0] - 1)


if HAS_NUMBA:

    @numba.njit(cache=True)
    def _csr_matvec_jit(indptr, indices, data, x):  # pragma: no cover - compiled
        n = indptr.shape[0] - 1
        out = np.zeros(n, dtype=np.float64)
        for i in range(n):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * x[indices[k]]
            out[i] = acc
        return out

    def csr_matvec_numba(indptr, indices, data, x, row_of_entry=None):
        return _csr_matvec_jit(indptr, indices, data, x)

else:
    csr_matvec_numba = None


def csr_matvec(indptr, indices, data, x, row_of_entry):
    """Sparse matvec through the selected backend."""
    if BACKEND == "numba":
        return _csr_matvec_jit(indptr, indices, data, x)
    return csr_matvec_numpy(indptr, indices, data, x, row_of_entry)


def expand_rows(indptr):
    """Row index of every stored entry; companion to the numpy kernel."""
    n = indptr.shape[0] - 1
    return np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
