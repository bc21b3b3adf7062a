# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled A* kernel over word-packed STRIPS states.

Same expansion order and tie-breaking as ``_pysearch.astar`` so both
backends return identical plans and counters.
"""
from libc.stdint cimport int32_t, int64_t, uint64_t
from libc.stdlib cimport free, malloc, realloc
from libc.string cimport memcmp, memcpy, memset

import time

cdef enum:
    SOLVED = 0
    UNSOLVABLE = 1
    BUDGET = 2
    TIMEOUT = 3


cdef struct Item:
    int64_t f
    int64_t h
    int64_t seq
    int32_t node


cdef inline bint item_less(Item* a, Item* b) nogil:
    if a.f != b.f:
        return a.f < b.f
    if a.h != b.h:
        return a.h < b.h
    return a.seq < b.seq


cdef class _Heap:
    cdef Item* data
    cdef Py_ssize_t size, cap

    def __cinit__(self):
        self.cap = 1024
        self.size = 0
        self.data = <Item*> malloc(self.cap * sizeof(Item))
        if self.data == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.data)

    cdef int push(self, Item it) except -1:
        cdef Py_ssize_t i, p
        cdef Item* nd
        if self.size == self.cap:
            nd = <Item*> realloc(self.data, 2 * self.cap * sizeof(Item))
            if nd == NULL:
                raise MemoryError()
            self.data = nd
            self.cap *= 2
        i = self.size
        self.size += 1
        while i > 0:
            p = (i - 1) >> 1
            if item_less(&it, &self.data[p]):
                self.data[i] = self.data[p]
                i = p
            else:
                break
        self.data[i] = it
        return 0

    cdef Item pop(self):
        cdef Item top = self.data[0]
        cdef Item last
        cdef Py_ssize_t i = 0, c
        self.size -= 1
        if self.size > 0:
            last = self.data[self.size]
            while True:
                c = 2 * i + 1
                if c >= self.size:
                    break
                if c + 1 < self.size and item_less(&self.data[c + 1], &self.data[c]):
                    c += 1
                if item_less(&self.data[c], &last):
                    self.data[i] = self.data[c]
                    i = c
                else:
                    break
            self.data[i] = last
        return top


cdef class _Pool:
    """Node storage plus an open-addressing table from state to best node."""
    cdef int W
    cdef uint64_t* states
    cdef int64_t* g
    cdef int32_t* parent
    cdef int32_t* via
    cdef Py_ssize_t n, cap
    cdef int32_t* table
    cdef Py_ssize_t tsize, tcount

    def __cinit__(self, int W):
        self.W = W
        self.cap = 1024
        self.n = 0
        self.states = <uint64_t*> malloc(self.cap * W * sizeof(uint64_t))
        self.g = <int64_t*> malloc(self.cap * sizeof(int64_t))
        self.parent = <int32_t*> malloc(self.cap * sizeof(int32_t))
        self.via = <int32_t*> malloc(self.cap * sizeof(int32_t))
        self.tsize = 4096
        self.tcount = 0
        self.table = <int32_t*> malloc(self.tsize * sizeof(int32_t))
        if not (self.states and self.g and self.parent and self.via and self.table):
            raise MemoryError()
        memset(self.table, 0xFF, self.tsize * sizeof(int32_t))

    def __dealloc__(self):
        free(self.states)
        free(self.g)
        free(self.parent)
        free(self.via)
        free(self.table)

    cdef inline uint64_t hash(self, uint64_t* s) nogil:
        cdef uint64_t h = 1469598103934665603ULL
        cdef int i
        for i in range(self.W):
            h ^= s[i]
            h *= 1099511628211ULL
            h ^= h >> 29
        return h

    cdef int grow_nodes(self) except -1:
        cdef Py_ssize_t nc = self.cap * 2
        cdef void* p
        p = realloc(self.states, nc * self.W * sizeof(uint64_t))
        if p == NULL:
            raise MemoryError()
        self.states = <uint64_t*> p
        p = realloc(self.g, nc * sizeof(int64_t))
        if p == NULL:
            raise MemoryError()
        self.g = <int64_t*> p
        p = realloc(self.parent, nc * sizeof(int32_t))
        if p == NULL:
            raise MemoryError()
        self.parent = <int32_t*> p
        p = realloc(self.via, nc * sizeof(int32_t))
        if p == NULL:
            raise MemoryError()
        self.via = <int32_t*> p
        self.cap = nc
        return 0

    cdef int rehash(self) except -1:
        cdef Py_ssize_t ns = self.tsize * 2, i, j
        cdef int32_t* nt = <int32_t*> malloc(ns * sizeof(int32_t))
        cdef int32_t node
        if nt == NULL:
            raise MemoryError()
        memset(nt, 0xFF, ns * sizeof(int32_t))
        for i in range(self.tsize):
            node = self.table[i]
            if node >= 0:
                j = <Py_ssize_t> (self.hash(&self.states[node * self.W]) & <uint64_t> (ns - 1))
                while nt[j] >= 0:
                    j = (j + 1) & (ns - 1)
                nt[j] = node
        free(self.table)
        self.table = nt
        self.tsize = ns
        return 0

    cdef Py_ssize_t slot(self, uint64_t* s) nogil:
        """Table slot holding ``s`` or the empty slot where it belongs."""
        cdef Py_ssize_t j = <Py_ssize_t> (self.hash(s) & <uint64_t> (self.tsize - 1))
        cdef int32_t node
        while True:
            node = self.table[j]
            if node < 0:
                return j
            if memcmp(&self.states[node * self.W], s, self.W * sizeof(uint64_t)) == 0:
                return j
            j = (j + 1) & (self.tsize - 1)

    cdef int32_t add(self, uint64_t* s, int64_t g, int32_t parent, int32_t via) except -1:
        if self.n == self.cap:
            self.grow_nodes()
        cdef int32_t nid = <int32_t> self.n
        memcpy(&self.states[nid * self.W], s, self.W * sizeof(uint64_t))
        self.g[nid] = g
        self.parent[nid] = parent
        self.via[nid] = via
        self.n += 1
        return nid


def astar(ct, long node_budget, double time_budget):
    cdef int n_facts = ct.n_facts
    cdef int W = (n_facts + 63) // 64 if n_facts > 0 else 1
    cdef const int32_t[::1] pre_ptr = ct.np_pre_ptr
    cdef const int32_t[::1] pre_idx = ct.np_pre_idx
    cdef const int32_t[::1] add_ptr = ct.np_add_ptr
    cdef const int32_t[::1] add_idx = ct.np_add_idx
    cdef const int32_t[::1] del_ptr = ct.np_del_ptr
    cdef const int32_t[::1] del_idx = ct.np_del_idx
    cdef const int64_t[::1] cost = ct.np_cost
    cdef const int32_t[::1] bucket_ptr = ct.np_bucket_ptr
    cdef const int32_t[::1] bucket_idx = ct.np_bucket_idx
    cdef const int32_t[::1] always = ct.np_always
    cdef const int32_t[::1] init_idx = ct.np_init
    cdef const int32_t[::1] goal_idx = ct.np_goal
    cdef const int32_t[::1] at_slot = ct.np_at_slot
    cdef const int32_t[::1] gfacts = ct.np_goal_facts
    cdef const int32_t[::1] relief = ct.np_relief
    cdef const int32_t[::1] bound = ct.np_bound
    cdef int ncells = ct.n_cells
    cdef int ng = gfacts.shape[0]
    cdef int n_actions = cost.shape[0]

    cdef _Pool pool = _Pool(W)
    cdef _Heap heap = _Heap()
    cdef uint64_t* goal = <uint64_t*> malloc(W * sizeof(uint64_t))
    cdef uint64_t* cur = <uint64_t*> malloc(W * sizeof(uint64_t))
    cdef uint64_t* nxt = <uint64_t*> malloc(W * sizeof(uint64_t))
    cdef int32_t* cand = <int32_t*> malloc((n_actions + 1) * sizeof(int32_t))
    if not (goal and cur and nxt and cand):
        raise MemoryError()

    cdef int i, j, k, a, f, w, ncand, tmp
    cdef int64_t g, g2, hv, fv
    cdef long expanded = 0
    cdef int64_t seq = 0
    cdef Py_ssize_t sl
    cdef int32_t node, nid, old
    cdef Item it
    cdef bint ok
    cdef uint64_t word
    deadline = time.monotonic() + time_budget
    try:
        memset(goal, 0, W * sizeof(uint64_t))
        for i in range(goal_idx.shape[0]):
            f = goal_idx[i]
            goal[f >> 6] |= (<uint64_t> 1) << (f & 63)
        memset(cur, 0, W * sizeof(uint64_t))
        for i in range(init_idx.shape[0]):
            f = init_idx[i]
            cur[f >> 6] |= (<uint64_t> 1) << (f & 63)

        hv = _h(cur, W, goal, at_slot, gfacts, relief, bound, ncells, ng)
        nid = pool.add(cur, 0, -1, -1)
        sl = pool.slot(cur)
        pool.table[sl] = nid
        pool.tcount += 1
        it.f = hv
        it.h = hv
        it.seq = seq
        it.node = nid
        seq += 1
        heap.push(it)

        while heap.size > 0:
            it = heap.pop()
            node = it.node
            memcpy(cur, &pool.states[node * W], W * sizeof(uint64_t))
            sl = pool.slot(cur)
            if pool.table[sl] != node:
                continue
            ok = True
            for w in range(W):
                if (cur[w] & goal[w]) != goal[w]:
                    ok = False
                    break
            if ok:
                path = []
                total = pool.g[node]
                while pool.via[node] >= 0:
                    path.append(pool.via[node])
                    node = pool.parent[node]
                path.reverse()
                return SOLVED, path, total, expanded, seq, it.f
            if expanded >= node_budget:
                return BUDGET, [], -1, expanded, seq, it.f
            expanded += 1
            if (expanded & 1023) == 0 and time.monotonic() > deadline:
                return TIMEOUT, [], -1, expanded, seq, it.f

            ncand = 0
            for i in range(always.shape[0]):
                cand[ncand] = always[i]
                ncand += 1
            for w in range(W):
                word = cur[w]
                while word:
                    f = (w << 6) + _ctz(word)
                    word &= word - 1
                    if f < n_facts:
                        for j in range(bucket_ptr[f], bucket_ptr[f + 1]):
                            cand[ncand] = bucket_idx[j]
                            ncand += 1
            # insertion sort: candidate lists are short
            for i in range(1, ncand):
                tmp = cand[i]
                j = i - 1
                while j >= 0 and cand[j] > tmp:
                    cand[j + 1] = cand[j]
                    j -= 1
                cand[j + 1] = tmp

            g = pool.g[node]
            for i in range(ncand):
                a = cand[i]
                ok = True
                for j in range(pre_ptr[a], pre_ptr[a + 1]):
                    f = pre_idx[j]
                    if not ((cur[f >> 6] >> (f & 63)) & 1):
                        ok = False
                        break
                if not ok:
                    continue
                memcpy(nxt, cur, W * sizeof(uint64_t))
                for j in range(del_ptr[a], del_ptr[a + 1]):
                    f = del_idx[j]
                    nxt[f >> 6] &= ~((<uint64_t> 1) << (f & 63))
                for j in range(add_ptr[a], add_ptr[a + 1]):
                    f = add_idx[j]
                    nxt[f >> 6] |= (<uint64_t> 1) << (f & 63)
                g2 = g + cost[a]
                sl = pool.slot(nxt)
                old = pool.table[sl]
                if old >= 0 and pool.g[old] <= g2:
                    continue
                nid = pool.add(nxt, g2, node, a)
                pool.table[sl] = nid
                if old < 0:
                    pool.tcount += 1
                    if pool.tcount * 2 > pool.tsize:
                        pool.rehash()
                hv = _h(nxt, W, goal, at_slot, gfacts, relief, bound, ncells, ng)
                it.f = g2 + hv
                it.h = hv
                it.seq = seq
                it.node = nid
                seq += 1
                heap.push(it)
        return UNSOLVABLE, [], -1, expanded, seq, -1
    finally:
        free(goal)
        free(cur)
        free(nxt)
        free(cand)


cdef inline int _ctz(uint64_t x) nogil:
    return __builtin_ctzll(x)


cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil


cdef int64_t _h(uint64_t* s, int W, uint64_t* goal, const int32_t[::1] at_slot,
                const int32_t[::1] gfacts, const int32_t[::1] relief, const int32_t[::1] bound,
                int ncells, int ng) noexcept nogil:
    cdef int w, f, k, r, cell = -1
    cdef uint64_t word
    cdef int64_t best = 0, v
    cdef bint sat = True
    for w in range(W):
        if (s[w] & goal[w]) != goal[w]:
            sat = False
            break
    if sat:
        return 0
    for w in range(W):
        word = s[w]
        while word:
            f = (w << 6) + _ctz(word)
            word &= word - 1
            if f < at_slot.shape[0] and at_slot[f] >= 0:
                cell = at_slot[f]
                break
        if cell >= 0:
            break
    if cell < 0:
        return 0
    for k in range(ng):
        f = gfacts[k]
        if (s[f >> 6] >> (f & 63)) & 1:
            continue
        r = relief[k]
        if r >= 0 and (s[r >> 6] >> (r & 63)) & 1:
            continue
        v = bound[k * ncells + cell]
        if v > best:
            best = v
    return best
