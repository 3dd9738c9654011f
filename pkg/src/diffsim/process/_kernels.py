"""Compiled event loops.

Two single-process kernels share the transition rules: ``advance_graph``
works on any graph through an incrementally maintained set of active edges
(infected endpoint on one side, attemptable endpoint on the other);
``advance_star`` exploits leaf exchangeability on stars so that center
flips cost O(1) instead of O(leaves).

Waiting times are drawn from the aggregate rate after every event. Within
an event the category is picked in the fixed order HEAL, DEIMMUNIZE,
INFECT; the same uniform, rescaled, picks the subject within the category.
"""

import numpy as np
from numba import njit

S, I, R = 0, 1, 2
SIS, SIRS, CSIRS, LABELED = 0, 1, 2, 3

EV_INFECT, EV_HEAL, EV_DEIMMUNIZE, EV_FAILED, EV_EXTINCTION, EV_CENSOR = 0, 1, 2, 3, 4, 5

RUNNING, EXTINCT, CENSORED = 0, 1, 2

# scal layout
T_NOW, N_EVENTS, MAX_I, MAX_R = 0, 1, 2, 3


@njit(cache=True, inline="always")
def attemptable(kind, lab):
    return lab == S or (kind == LABELED and lab == R)


@njit(cache=True, inline="always")
def uniform_index(rng, k):
    j = int(rng.random() * k)
    return j if j < k else k - 1


@njit(cache=True, inline="always")
def scaled_index(x, unit, k):
    # x uniform on [0, unit * k) -> uniform index in 0..k-1
    j = int(x / unit)
    return j if j < k else k - 1


@njit(cache=True, inline="always")
def exp_wait(rng, rate):
    return -np.log(1.0 - rng.random()) / rate


@njit(cache=True)
def heal_label(kind):
    if kind == SIRS or kind == LABELED:
        return R
    return S


@njit(cache=True)
def csirs_resistance(alpha, t, last_heal):
    if np.isnan(last_heal):
        return 0.0
    return np.exp(-alpha * (t - last_heal))


@njit(cache=True)
def labeled_prob(alpha, last_heal, last_attempt):
    # 1 - exp(-alpha (t_h - t_i)); t_h - t_i is the gap between the heal
    # and the latest attempt since it
    if np.isnan(last_attempt) or last_attempt < last_heal:
        return 0.0
    return -np.expm1(-alpha * (last_attempt - last_heal))


@njit(cache=True)
def attempt_outcome(kind, alpha, t, label, last_heal, last_attempt, v, rng):
    """Decide an infection attempt at non-infected ``v`` at time ``t``."""
    lab = label[v]
    if kind == SIS or kind == SIRS:
        return True
    if kind == CSIRS:
        r = csirs_resistance(alpha, t, last_heal[v])
        if r == 0.0:
            return True
        return rng.random() >= r
    # LABELED
    if lab == S:
        return True
    p = labeled_prob(alpha, last_heal[v], last_attempt[v])
    last_attempt[v] = t
    if p == 0.0:
        return False
    return rng.random() < p


@njit(cache=True, inline="always")
def set_move(members, sizes, pos, v, old, new):
    i = pos[v]
    last = members[old, sizes[old] - 1]
    members[old, i] = last
    pos[last] = i
    sizes[old] -= 1
    members[new, sizes[new]] = v
    pos[v] = sizes[new]
    sizes[new] += 1


@njit(cache=True, inline="always")
def edge_wanted(kind, label, a, b):
    la = label[a]
    lb = label[b]
    if la == I:
        return lb != I and attemptable(kind, lb)
    if lb == I:
        return attemptable(kind, la)
    return False


@njit(cache=True)
def refresh_edges(kind, label, v, indptr, indices, adj_edge, act, apos, nact):
    for k in range(indptr[v], indptr[v + 1]):
        e = adj_edge[k]
        want = edge_wanted(kind, label, v, indices[k])
        if want:
            if apos[e] < 0:
                act[nact] = e
                apos[e] = nact
                nact += 1
        elif apos[e] >= 0:
            i = apos[e]
            last = act[nact - 1]
            act[i] = last
            apos[last] = i
            apos[e] = -1
            nact -= 1
    return nact


@njit(cache=True, inline="always")
def log_event(log_t, log_kind, log_subj, log_src, k, t, kind, subj, src):
    if k < log_t.shape[0]:
        log_t[k] = t
        log_kind[k] = kind
        log_subj[k] = subj
        log_src[k] = src


@njit(cache=True, nogil=True)
def advance_graph(kind, lam, rho, indptr, indices, adj_edge, edges,
                  label, last_heal, last_attempt, members, sizes, pos,
                  act, apos, nact_box, scal, rng, t_max, max_events,
                  log_t, log_kind, log_subj, log_src):
    t = scal[T_NOW]
    nact = nact_box[0]
    has_r = kind == SIRS or kind == LABELED
    steps = 0
    status = RUNNING
    while True:
        ni = sizes[I]
        if ni == 0:
            status = EXTINCT
            break
        if steps >= max_events:
            break
        heal = float(ni)
        deim = rho * sizes[R] if has_r else 0.0
        att = lam * nact
        total = heal + deim + att
        w = exp_wait(rng, total)
        if t + w > t_max:
            t = t_max
            status = CENSORED
            break
        t += w
        x = rng.random() * total
        if x < heal:
            v = members[I, scaled_index(x, 1.0, ni)]
            new = heal_label(kind)
            set_move(members, sizes, pos, v, I, new)
            label[v] = new
            last_heal[v] = t
            last_attempt[v] = np.nan
            nact = refresh_edges(kind, label, v, indptr, indices, adj_edge, act, apos, nact)
            log_event(log_t, log_kind, log_subj, log_src, steps, t, EV_HEAL, v, -1)
        elif x < heal + deim:
            v = members[R, scaled_index(x - heal, rho, sizes[R])]
            set_move(members, sizes, pos, v, R, S)
            label[v] = S
            nact = refresh_edges(kind, label, v, indptr, indices, adj_edge, act, apos, nact)
            log_event(log_t, log_kind, log_subj, log_src, steps, t, EV_DEIMMUNIZE, v, -1)
        else:
            e = act[scaled_index(x - heal - deim, lam, nact)]
            a = edges[e, 0]
            b = edges[e, 1]
            if label[a] == I:
                src, tgt = a, b
            else:
                src, tgt = b, a
            if attempt_outcome(kind, rho, t, label, last_heal, last_attempt, tgt, rng):
                set_move(members, sizes, pos, tgt, label[tgt], I)
                label[tgt] = I
                nact = refresh_edges(kind, label, tgt, indptr, indices, adj_edge, act, apos, nact)
                log_event(log_t, log_kind, log_subj, log_src, steps, t, EV_INFECT, tgt, src)
            else:
                log_event(log_t, log_kind, log_subj, log_src, steps, t, EV_FAILED, tgt, src)
        steps += 1
        if sizes[I] > scal[MAX_I]:
            scal[MAX_I] = sizes[I]
        if sizes[R] > scal[MAX_R]:
            scal[MAX_R] = sizes[R]
    scal[T_NOW] = t
    scal[N_EVENTS] += steps
    nact_box[0] = nact
    return status, steps


@njit(cache=True, nogil=True)
def advance_star(kind, lam, rho,
                 label, last_heal, last_attempt, members, sizes, pos,
                 scal, rng, t_max, max_events,
                 log_t, log_kind, log_subj, log_src):
    # members/sizes/pos index leaves only; the center is vertex 0
    t = scal[T_NOW]
    has_r = kind == SIRS or kind == LABELED
    steps = 0
    status = RUNNING
    while True:
        c = label[0]
        ci = 1 if c == I else 0
        ni = sizes[I] + ci
        if ni == 0:
            status = EXTINCT
            break
        if steps >= max_events:
            break
        heal = float(ni)
        nr = sizes[R] + (1 if c == R else 0)
        deim = rho * nr if has_r else 0.0
        n_targets = sizes[S]
        if kind == LABELED:
            n_targets += sizes[R]
        if ci:
            att = lam * n_targets
        elif attemptable(kind, c):
            att = lam * sizes[I]
        else:
            att = 0.0
        total = heal + deim + att
        w = exp_wait(rng, total)
        if t + w > t_max:
            t = t_max
            status = CENSORED
            break
        t += w
        x = rng.random() * total
        if x < heal:
            k = scaled_index(x, 1.0, ni)
            new = heal_label(kind)
            if ci and k == 0:
                v = 0
            else:
                v = members[I, k - ci]
                set_move(members, sizes, pos, v, I, new)
            label[v] = new
            last_heal[v] = t
            last_attempt[v] = np.nan
            log_event(log_t, log_kind, log_subj, log_src, steps, t, EV_HEAL, v, -1)
        elif x < heal + deim:
            k = scaled_index(x - heal, rho, nr)
            if c == R and k == 0:
                v = 0
            else:
                v = members[R, k - (1 if c == R else 0)]
                set_move(members, sizes, pos, v, R, S)
            label[v] = S
            log_event(log_t, log_kind, log_subj, log_src, steps, t, EV_DEIMMUNIZE, v, -1)
        else:
            y = x - heal - deim
            if ci:
                src = 0
                k = scaled_index(y, lam, n_targets)
                if k < sizes[S]:
                    tgt = members[S, k]
                else:
                    tgt = members[R, k - sizes[S]]
            else:
                src = members[I, scaled_index(y, lam, sizes[I])]
                tgt = 0
            if attempt_outcome(kind, rho, t, label, last_heal, last_attempt, tgt, rng):
                if tgt != 0:
                    set_move(members, sizes, pos, tgt, label[tgt], I)
                label[tgt] = I
                log_event(log_t, log_kind, log_subj, log_src, steps, t, EV_INFECT, tgt, src)
            else:
                log_event(log_t, log_kind, log_subj, log_src, steps, t, EV_FAILED, tgt, src)
        steps += 1
        ci = 1 if label[0] == I else 0
        if sizes[I] + ci > scal[MAX_I]:
            scal[MAX_I] = sizes[I] + ci
        nr = sizes[R] + (1 if label[0] == R else 0)
        if nr > scal[MAX_R]:
            scal[MAX_R] = nr
    scal[T_NOW] = t
    scal[N_EVENTS] += steps
    return status, steps
