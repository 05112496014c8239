# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot-resolution kernel; behaviour matches ``_slot_py.resolve``."""

from cpython.mem cimport PyMem_Malloc, PyMem_Free


def resolve(const int[:] chans, const int[:] tx, int num_channels,
            const unsigned char[:] reach, bint per_receiver):
    cdef Py_ssize_t n = chans.shape[0] - 1
    cdef Py_ssize_t width = n + 1
    cdef Py_ssize_t i, j, c, got, hits, s
    cdef int *count = <int *> PyMem_Malloc((num_channels + 1) * sizeof(int))
    cdef int *first = <int *> PyMem_Malloc((num_channels + 1) * sizeof(int))
    cdef int *nxt = <int *> PyMem_Malloc(width * sizeof(int))
    if count == NULL or first == NULL or nxt == NULL:
        PyMem_Free(count)
        PyMem_Free(first)
        PyMem_Free(nxt)
        raise MemoryError()
    air = [0] * (num_channels + 1)
    heard = [0] * width
    try:
        for c in range(num_channels + 1):
            count[c] = 0
            first[c] = 0
        # per-channel transmitter lists threaded through nxt, newest first
        for i in range(1, width):
            if tx[i]:
                c = chans[i]
                count[c] += 1
                nxt[i] = first[c]
                first[c] = <int> i
        for c in range(1, num_channels + 1):
            if count[c] == 1:
                air[c] = first[c]
        for i in range(1, width):
            if tx[i]:
                continue
            c = chans[i]
            if per_receiver:
                got = 0
                hits = 0
                j = first[c]
                while j:
                    if reach[j * width + i]:
                        hits += 1
                        got = j
                    j = nxt[j]
                if hits == 1:
                    heard[i] = got
            elif count[c] == 1:
                s = first[c]
                if reach[s * width + i]:
                    heard[i] = s
    finally:
        PyMem_Free(count)
        PyMem_Free(first)
        PyMem_Free(nxt)
    return air, heard



def step_cached(tuple nodes, int parity, dict table, emit_miss, deliver_miss,
                int num_channels, const unsigned char[:] reach, bint per_receiver, list silences):
    """Compiled twin of ``_slot_py.step_cached``; keys are the same ``id`` values."""
    cdef Py_ssize_t n = len(nodes)
    cdef Py_ssize_t width = n + 1
    cdef Py_ssize_t i, j, c, got, hits, src
    cdef object s, key, new, m, found
    cdef list entry
    cdef dict trans
    cdef list entries = [None] * width
    cdef list out = [None] * n
    cdef int *chans = <int *> PyMem_Malloc(width * sizeof(int))
    cdef int *tx = <int *> PyMem_Malloc(width * sizeof(int))
    cdef int *count = <int *> PyMem_Malloc((num_channels + 1) * sizeof(int))
    cdef int *first = <int *> PyMem_Malloc((num_channels + 1) * sizeof(int))
    cdef int *nxt = <int *> PyMem_Malloc(width * sizeof(int))
    cdef int *heard = <int *> PyMem_Malloc(width * sizeof(int))
    if not (chans and tx and count and first and nxt and heard):
        PyMem_Free(chans); PyMem_Free(tx); PyMem_Free(count)
        PyMem_Free(first); PyMem_Free(nxt); PyMem_Free(heard)
        raise MemoryError()
    try:
        for c in range(num_channels + 1):
            count[c] = 0
            first[c] = 0
        for i in range(1, width):
            s = nodes[i - 1]
            key = <Py_ssize_t> <void *> s * 2 + parity
            found = table.get(key)
            if found is None:
                entry = list(emit_miss(s, parity))
                entry.append({})
                table[key] = entry
            else:
                entry = <list> found
            entries[i] = entry
            chans[i] = entry[1]
            tx[i] = entry[2]
            heard[i] = 0
            if tx[i]:
                c = chans[i]
                count[c] += 1
                nxt[i] = first[c]
                first[c] = <int> i
        for i in range(1, width):
            if tx[i]:
                continue
            c = chans[i]
            if per_receiver:
                got = 0
                hits = 0
                j = first[c]
                while j:
                    if reach[j * width + i]:
                        hits += 1
                        got = j
                    j = nxt[j]
                if hits == 1:
                    heard[i] = got
            elif count[c] == 1:
                j = first[c]
                if reach[j * width + i]:
                    heard[i] = j
        for i in range(1, width):
            src = heard[i]
            if src:
                m = (<list> entries[src])[0]
            else:
                m = silences[chans[i]]
            trans = <dict> (<list> entries[i])[3]
            key = <Py_ssize_t> <void *> m
            new = trans.get(key)
            if new is None:
                new, cacheable = deliver_miss(nodes[i - 1], m, parity)
                if cacheable:
                    trans[key] = new
            out[i - 1] = new
    finally:
        PyMem_Free(chans); PyMem_Free(tx); PyMem_Free(count)
        PyMem_Free(first); PyMem_Free(nxt); PyMem_Free(heard)
    return out
