"""VM kernels shared by the numba and pure-Python backends.

Everything here is written in the numba-compatible subset (numpy arrays,
scalar ints, no Python containers) so the same source compiles under
``@njit`` and also runs unmodified as plain Python.  Keep the two import
sites (`_vm_numba`, `_vm_pure`) in sync with the function list.

The RNG is a Park-Miller / minstd Lehmer generator: all intermediates fit in
int64, so the stream is bit-identical across backends.
"""

import numpy as np

# terminators (mirror bytecode.py)
T_HALT, T_JMP, T_BRANCH, T_CALL, T_RETPOP = 0, 1, 2, 3, 4
# ops
OP_LOADI, OP_COPY, OP_ADD, OP_SUB, OP_LOADIN, OP_LOADCUR, OP_SETCUR = 0, 1, 2, 3, 4, 5, 6
# slot tags
TAG_CONST, TAG_BYTE, TAG_OPAQUE = 0, 1, 2
# constraint kinds
CONS_BYTE_LIT, CONS_BYTE_BYTE, CONS_OPAQUE = 0, 1, 2
# termination flags
TERM_NORMAL, TERM_STEPS, TERM_LOOP = 0, 1, 2

LCG_MOD = 2147483647  # 2**31 - 1
LCG_MULT = 48271


def rng_seed_state(seed):
    return (seed % (LCG_MOD - 1)) + 1


def rng_next(state):
    return (state * LCG_MULT) % LCG_MOD


def run_trace(vkind, vops_lo, vops_hi, ops, tkind, targs, vframe,
              start, input_len, total_slots, max_depth,
              inp, step_budget,
              trace_out, cons_out):
    """Concrete run recording the vertex sequence and branch constraints.

    Returns (trace length, constraint count, termination flag).
    Constraint rows: (branch vertex, kind, a, b, relop, taken, step index).
    """
    nv = vkind.shape[0]
    slots = np.zeros(total_slots, dtype=np.int64)
    tagk = np.zeros(total_slots, dtype=np.int8)
    taga = np.zeros(total_slots, dtype=np.int64)
    cs_ret = np.zeros(max_depth + 1, dtype=np.int64)
    cs_base = np.zeros(max_depth + 1, dtype=np.int64)
    cs_dst = np.zeros(max_depth + 1, dtype=np.int64)
    visits = np.zeros(nv, dtype=np.int64)

    v = start
    base = 0
    sp = 0
    cur = 0
    steps = 0
    nt = 0
    nc = 0
    term = TERM_NORMAL
    while True:
        trace_out[nt] = v
        nt += 1
        steps += 1
        if steps > step_budget:
            term = TERM_STEPS
            break
        for i in range(vops_lo[v], vops_hi[v]):
            code = ops[i, 0]
            a = base + ops[i, 1]
            if code == OP_LOADI:
                slots[a] = ops[i, 2]
                tagk[a] = TAG_CONST
            elif code == OP_COPY:
                b = base + ops[i, 2]
                slots[a] = slots[b]
                tagk[a] = tagk[b]
                taga[a] = taga[b]
            elif code == OP_ADD:
                slots[a] = slots[base + ops[i, 2]] + slots[base + ops[i, 3]]
                tagk[a] = TAG_OPAQUE
            elif code == OP_SUB:
                slots[a] = slots[base + ops[i, 2]] - slots[base + ops[i, 3]]
                tagk[a] = TAG_OPAQUE
            elif code == OP_LOADIN:
                idx = ops[i, 2]
                if ops[i, 3] == 1:
                    idx = idx + cur
                if 0 <= idx < input_len:
                    slots[a] = inp[idx]
                    tagk[a] = TAG_BYTE
                    taga[a] = idx
                else:
                    slots[a] = 0
                    tagk[a] = TAG_OPAQUE
            elif code == OP_LOADCUR:
                slots[a] = cur
                tagk[a] = TAG_OPAQUE
            else:  # OP_SETCUR
                cur = slots[a]
        tk = tkind[v]
        if tk == T_HALT:
            break
        elif tk == T_JMP:
            v = targs[v, 0]
        elif tk == T_BRANCH:
            bound = targs[v, 5]
            if bound >= 0:
                visits[v] += 1
                if visits[v] > bound + 1:
                    term = TERM_LOOP
                    break
            ls = base + targs[v, 1]
            rs = base + targs[v, 2]
            lv = slots[ls]
            rv = slots[rs]
            relop = targs[v, 0]
            if relop == 0:
                taken = lv == rv
            elif relop == 1:
                taken = lv != rv
            elif relop == 2:
                taken = lv < rv
            elif relop == 3:
                taken = lv <= rv
            elif relop == 4:
                taken = lv > rv
            else:
                taken = lv >= rv
            ltk = tagk[ls]
            rtk = tagk[rs]
            if ltk == TAG_BYTE and rtk == TAG_CONST:
                cons_out[nc, 0] = v
                cons_out[nc, 1] = CONS_BYTE_LIT
                cons_out[nc, 2] = taga[ls]
                cons_out[nc, 3] = rv
                cons_out[nc, 4] = relop
            elif ltk == TAG_CONST and rtk == TAG_BYTE:
                # mirror so the byte is on the left
                if relop == 2:
                    mrel = 4
                elif relop == 4:
                    mrel = 2
                elif relop == 3:
                    mrel = 5
                elif relop == 5:
                    mrel = 3
                else:
                    mrel = relop
                cons_out[nc, 0] = v
                cons_out[nc, 1] = CONS_BYTE_LIT
                cons_out[nc, 2] = taga[rs]
                cons_out[nc, 3] = lv
                cons_out[nc, 4] = mrel
            elif ltk == TAG_BYTE and rtk == TAG_BYTE:
                cons_out[nc, 0] = v
                cons_out[nc, 1] = CONS_BYTE_BYTE
                cons_out[nc, 2] = taga[ls]
                cons_out[nc, 3] = taga[rs]
                cons_out[nc, 4] = relop
            else:
                cons_out[nc, 0] = v
                cons_out[nc, 1] = CONS_OPAQUE
                cons_out[nc, 2] = 0
                cons_out[nc, 3] = 0
                cons_out[nc, 4] = relop
            cons_out[nc, 5] = 1 if taken else 0
            cons_out[nc, 6] = nt - 1
            nc += 1
            if taken:
                v = targs[v, 3]
            else:
                v = targs[v, 4]
        elif tk == T_CALL:
            newbase = base + vframe[v]
            fsize = targs[v, 3]
            for i in range(fsize):
                slots[newbase + i] = 0
                tagk[newbase + i] = TAG_CONST
                taga[newbase + i] = 0
            na = targs[v, 4]
            ast = targs[v, 5]
            for i in range(na):
                slots[newbase + 1 + i] = slots[base + ast + i]
                tagk[newbase + 1 + i] = tagk[base + ast + i]
                taga[newbase + 1 + i] = taga[base + ast + i]
            cs_ret[sp] = targs[v, 1]
            cs_base[sp] = base
            cs_dst[sp] = targs[v, 2]
            sp += 1
            base = newbase
            v = targs[v, 0]
        else:  # T_RETPOP
            if sp == 0:
                v = targs[v, 0]
            else:
                sp -= 1
                dst = cs_dst[sp]
                oldbase = cs_base[sp]
                if dst >= 0:
                    slots[oldbase + dst] = slots[base]
                    tagk[oldbase + dst] = tagk[base]
                    taga[oldbase + dst] = taga[base]
                base = oldbase
                v = cs_ret[sp]
    return nt, nc, term


def run_cov(vkind, vops_lo, vops_hi, ops, tkind, targs, vframe,
            start, input_len, total_slots, max_depth,
            jump_edge, br_t_edge, br_f_edge, call_edge, ret_edge, fb_edge,
            inp, step_budget, hits,
            slots, cs_ret, cs_base, cs_dst):
    """Coverage-only run: bump edge hit counts, return (new edges, term)."""
    v = start
    base = 0
    sp = 0
    cur = 0
    steps = 0
    new_edges = 0
    term = TERM_NORMAL
    # the scratch slot array is reused across runs: re-zero the entry frame
    for i in range(vframe[targs[start, 0]]):
        slots[i] = 0
    while True:
        steps += 1
        if steps > step_budget:
            term = TERM_STEPS
            break
        for i in range(vops_lo[v], vops_hi[v]):
            code = ops[i, 0]
            a = base + ops[i, 1]
            if code == OP_LOADI:
                slots[a] = ops[i, 2]
            elif code == OP_COPY:
                slots[a] = slots[base + ops[i, 2]]
            elif code == OP_ADD:
                slots[a] = slots[base + ops[i, 2]] + slots[base + ops[i, 3]]
            elif code == OP_SUB:
                slots[a] = slots[base + ops[i, 2]] - slots[base + ops[i, 3]]
            elif code == OP_LOADIN:
                idx = ops[i, 2]
                if ops[i, 3] == 1:
                    idx = idx + cur
                if 0 <= idx < input_len:
                    slots[a] = inp[idx]
                else:
                    slots[a] = 0
            elif code == OP_LOADCUR:
                slots[a] = cur
            else:
                cur = slots[a]
        tk = tkind[v]
        edge = -1
        if tk == T_HALT:
            break
        elif tk == T_JMP:
            edge = jump_edge[v]
            v = targs[v, 0]
        elif tk == T_BRANCH:
            lv = slots[base + targs[v, 1]]
            rv = slots[base + targs[v, 2]]
            relop = targs[v, 0]
            if relop == 0:
                taken = lv == rv
            elif relop == 1:
                taken = lv != rv
            elif relop == 2:
                taken = lv < rv
            elif relop == 3:
                taken = lv <= rv
            elif relop == 4:
                taken = lv > rv
            else:
                taken = lv >= rv
            if taken:
                edge = br_t_edge[v]
                v = targs[v, 3]
            else:
                edge = br_f_edge[v]
                v = targs[v, 4]
        elif tk == T_CALL:
            newbase = base + vframe[v]
            fsize = targs[v, 3]
            for i in range(fsize):
                slots[newbase + i] = 0
            na = targs[v, 4]
            ast = targs[v, 5]
            for i in range(na):
                slots[newbase + 1 + i] = slots[base + ast + i]
            cs_ret[sp] = targs[v, 1]
            cs_base[sp] = base
            cs_dst[sp] = targs[v, 2]
            sp += 1
            base = newbase
            edge = call_edge[v]
            v = targs[v, 0]
        else:  # T_RETPOP
            if sp == 0:
                edge = fb_edge[v]
                v = targs[v, 0]
            else:
                sp -= 1
                dst = cs_dst[sp]
                oldbase = cs_base[sp]
                if dst >= 0:
                    slots[oldbase + dst] = slots[base]
                base = oldbase
                v = cs_ret[sp]
                edge = ret_edge[v]
        if edge >= 0:
            if hits[edge] == 0:
                new_edges += 1
            hits[edge] += 1
    return new_edges, term


def fuzz_campaign(vkind, vops_lo, vops_hi, ops, tkind, targs, vframe,
                  start, input_len, total_slots, max_depth,
                  jump_edge, br_t_edge, br_f_edge, call_edge, ret_edge, fb_edge,
                  n_edges, seeds, seed_lens, budget, rng_seed, sample_every,
                  target_edges, step_budget, domain):
    """One deterministic coverage-guided mutation campaign.

    Round-robin corpus scheduling; mutation operators: byte flip, byte
    replace, insert, delete, splice.  A mutant joins the corpus iff its
    execution covered a new edge.  Returns
    (executions, covered, hits, series_x, series_y, n_series, corpus size,
    time-to-cover per target edge).
    """
    L = input_len
    n_seeds = seeds.shape[0]
    cap = n_seeds + budget + 1
    corpus = np.zeros((cap, L), dtype=np.uint8)
    clens = np.zeros(cap, dtype=np.int64)
    hits = np.zeros(n_edges, dtype=np.int64)
    n_targets = target_edges.shape[0]
    ttc = np.full(n_targets, -1, dtype=np.int64)
    n_series_cap = budget // sample_every + 3
    series_x = np.zeros(n_series_cap, dtype=np.int64)
    series_y = np.zeros(n_series_cap, dtype=np.int64)
    n_series = 0

    slots = np.zeros(total_slots, dtype=np.int64)
    cs_ret = np.zeros(max_depth + 1, dtype=np.int64)
    cs_base = np.zeros(max_depth + 1, dtype=np.int64)
    cs_dst = np.zeros(max_depth + 1, dtype=np.int64)
    execbuf = np.zeros(L, dtype=np.uint8)
    work = np.zeros(L, dtype=np.uint8)

    state = rng_seed_state(rng_seed)
    corpus_n = 0
    covered = 0
    execs = 0

    # initial seeds: enter the corpus and execute once each
    for s in range(n_seeds):
        sl = seed_lens[s]
        for i in range(sl):
            corpus[corpus_n, i] = seeds[s, i]
        clens[corpus_n] = sl
        corpus_n += 1
    for s in range(corpus_n):
        if execs >= budget:
            break
        for i in range(L):
            execbuf[i] = corpus[s, i] if i < clens[s] else 0
        new, _term = run_cov(
            vkind, vops_lo, vops_hi, ops, tkind, targs, vframe,
            start, input_len, total_slots, max_depth,
            jump_edge, br_t_edge, br_f_edge, call_edge, ret_edge, fb_edge,
            execbuf, step_budget, hits, slots, cs_ret, cs_base, cs_dst)
        covered += new
        execs += 1
        for t in range(n_targets):
            if ttc[t] < 0 and hits[target_edges[t]] > 0:
                ttc[t] = execs
        if execs % sample_every == 0:
            series_x[n_series] = execs
            series_y[n_series] = covered
            n_series += 1

    pick = 0
    while execs < budget:
        bi = pick % corpus_n
        pick += 1
        bl = clens[bi]
        wl = bl
        for i in range(bl):
            work[i] = corpus[bi, i]
        state = rng_next(state)
        mop = state % 5
        if mop == 0:  # byte flip
            if wl > 0:
                state = rng_next(state)
                pos = state % wl
                work[pos] = work[pos] ^ (domain - 1)
        elif mop == 1:  # byte replace
            if wl > 0:
                state = rng_next(state)
                pos = state % wl
                state = rng_next(state)
                work[pos] = state % domain
        elif mop == 2:  # insert
            if wl < L:
                state = rng_next(state)
                pos = state % (wl + 1)
                state = rng_next(state)
                val = state % domain
                i = wl
                while i > pos:
                    work[i] = work[i - 1]
                    i -= 1
                work[pos] = val
                wl += 1
        elif mop == 3:  # delete
            if wl > 0:
                state = rng_next(state)
                pos = state % wl
                for i in range(pos, wl - 1):
                    work[i] = work[i + 1]
                wl -= 1
        else:  # splice with another corpus entry
            state = rng_next(state)
            oi = state % corpus_n
            ol = clens[oi]
            state = rng_next(state)
            cut1 = state % (wl + 1)
            state = rng_next(state)
            cut2 = state % (ol + 1)
            nl = cut1 + (ol - cut2)
            if nl > L:
                nl = L
            j = cut1
            k = cut2
            while j < nl:
                work[j] = corpus[oi, k]
                j += 1
                k += 1
            wl = nl
        for i in range(L):
            execbuf[i] = work[i] if i < wl else 0
        new, _term = run_cov(
            vkind, vops_lo, vops_hi, ops, tkind, targs, vframe,
            start, input_len, total_slots, max_depth,
            jump_edge, br_t_edge, br_f_edge, call_edge, ret_edge, fb_edge,
            execbuf, step_budget, hits, slots, cs_ret, cs_base, cs_dst)
        execs += 1
        covered += new
        if new > 0 and corpus_n < cap:
            for i in range(wl):
                corpus[corpus_n, i] = work[i]
            clens[corpus_n] = wl
            corpus_n += 1
        for t in range(n_targets):
            if ttc[t] < 0 and hits[target_edges[t]] > 0:
                ttc[t] = execs
        if execs % sample_every == 0:
            series_x[n_series] = execs
            series_y[n_series] = covered
            n_series += 1

    if n_series == 0 or series_x[n_series - 1] != execs:
        series_x[n_series] = execs
        series_y[n_series] = covered
        n_series += 1
    return execs, covered, hits, series_x, series_y, n_series, corpus_n, ttc
