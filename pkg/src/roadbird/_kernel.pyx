# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernel.

Twin of ``_kernel_py.py``; every floating point expression is written in the
same order so both backends agree bit for bit.
"""

from libc.math cimport sqrt, exp, pow, INFINITY

import numpy as np

cdef double INF = INFINITY

cdef enum:
    CF_NEWTONIAN = 0
    CF_GIPPS = 1
    CF_HYBRID = 2
    LC_STRAIGHT = 0
    LC_GIPPS = 1
    LC_GHR = 2
    KIND_FREE = 0
    KIND_VEHICLE = 1
    KIND_PED = 2


cdef inline double _gipps(double v, double vd, double a, double b, double bhat,
                          double tau, double dx, double vl, int *ok) nogil:
    cdef double ratio = v / vd
    cdef double va = v + 2.5 * a * tau * (1.0 - ratio) * sqrt(0.025 + ratio)
    cdef double disc = b * b * tau * tau - b * (2.0 * dx - v * tau - vl * vl / bhat)
    cdef double vb, s
    if disc < 0.0:
        ok[0] = 0
        return 0.0
    vb = b * tau + sqrt(disc)
    s = va if va < vb else vb
    if s < 0.0:
        s = 0.0
    if s > vd:
        s = vd
    ok[0] = 1
    return s


cdef inline double _newtonian(double v, double vd, double a, double tau, double dx) nogil:
    cdef double vacc = v + a * tau
    cdef double s
    if vacc > vd:
        vacc = vd
    if vacc * tau <= dx:
        s = vacc
    else:
        s = dx / tau
    if s < 0.0:
        s = 0.0
    if s > vd:
        s = vd
    return s


cdef inline double _hybrid(double v, double vd, double a, double b, double bhat,
                           double tau, double dx, double vl, int *ok) nogil:
    cdef double s = _gipps(v, vd, a, b, bhat, tau, dx, vl, ok)
    if s * tau > dx:
        s = dx / tau
        if s < 0.0:
            s = 0.0
    return s


cdef inline double _gap_time(double g, double v) nogil:
    if v > 0.0:
        return g / v
    if g > 0.0:
        return INF
    return 0.0


cdef inline double _gap_probability(double t, double lam, double tcrit) nogil:
    if t > tcrit:
        return 1.0 - exp(-lam * (t - tcrit))
    return 0.0


cdef inline double _ghr(double v, double dv, double dx, double c, double m, double l) nogil:
    if dx == INF or (v <= 0.0 and m < 0.0):
        return 0.0
    return c * pow(v, m) * dv / pow(dx, l)


def gipps_speed(double v, double vd, double a, double b, double bhat, double tau, double dx, double vl):
    cdef int ok = 1
    cdef double s = _gipps(v, vd, a, b, bhat, tau, dx, vl, &ok)
    return s, ok


def newtonian_speed(double v, double vd, double a, double tau, double dx):
    return _newtonian(v, vd, a, tau, dx)


def hybrid_speed(double v, double vd, double a, double b, double bhat, double tau, double dx, double vl):
    cdef int ok = 1
    cdef double s = _hybrid(v, vd, a, b, bhat, tau, dx, vl, &ok)
    return s, ok


def gap_time(double g, double v):
    return _gap_time(g, v)


def gap_probability(double t, double lam, double tcrit):
    return _gap_probability(t, lam, tcrit)


def ghr_accel(double v, double dv, double dx, double c, double m, double l):
    return _ghr(v, dv, dx, c, m, l)


cdef class Kernel:
    """Per-step vehicle update over struct-of-arrays state."""

    cdef public int n_links, H, kmax, n_order
    cdef public long neg_disc, ghr_singular
    cdef public double tau, lam, tcrit, ghr_c, ghr_m, ghr_l, prox, eps, margin, maxlen
    cdef public int cf, lc

    cdef signed char[:] kind
    cdef int[:] link
    cdef double[:] pos
    cdef double[:] pos_prev
    cdef double[:] length
    cdef int[:] lo
    cdef int[:] hi
    cdef double[:] speed
    cdef double[:] accel
    cdef double[:] vd
    cdef double[:] amax
    cdef double[:] bdes
    cdef double[:] bhat
    cdef int[:] next_link
    cdef signed char[:] last_shift
    cdef double[:] wait
    cdef double[:] newspeed
    cdef double[:] hist_dv
    cdef double[:] hist_dx
    cdef int[:] hist_n
    cdef int[:] order
    cdef int[:] xfer_out
    cdef int[:] shift_out
    cdef signed char[:] shift_dir

    cdef double[:] link_len
    cdef int[:] link_ns
    cdef long long[:] mid_count
    cdef int[:] seg_start
    cdef int[:] seg_end
    cdef double[:] down_clear
    cdef double[:] down_speed
    cdef signed char[:] down_ok

    # scratch for per-strip scans
    cdef double[:] _rear
    cdef double[:] _spd
    cdef signed char[:] _blocked

    backend = "cython"

    def __init__(self, int n_links, int hist_depth):
        self.n_links = n_links
        self.H = hist_depth
        self.neg_disc = 0
        self.ghr_singular = 0
        self.n_order = 0

    def bind(self, a):
        self.kind = a["kind"]
        self.link = a["link"]
        self.pos = a["pos"]
        self.pos_prev = a["pos_prev"]
        self.length = a["length"]
        self.lo = a["lo"]
        self.hi = a["hi"]
        self.speed = a["speed"]
        self.accel = a["accel"]
        self.vd = a["vd"]
        self.amax = a["amax"]
        self.bdes = a["bdes"]
        self.bhat = a["bhat"]
        self.next_link = a["next_link"]
        self.last_shift = a["last_shift"]
        self.wait = a["wait"]
        self.newspeed = a["newspeed"]
        self.hist_dv = a["hist_dv"]
        self.hist_dx = a["hist_dx"]
        self.hist_n = a["hist_n"]
        self.order = a["order"]
        self.xfer_out = a["xfer_out"]
        self.shift_out = a["shift_out"]
        self.shift_dir = a["shift_dir"]

    def bind_links(self, link_len, link_ns, mid_count, seg_start, seg_end,
                   down_clear, down_speed, down_ok, int kmax):
        self.link_len = link_len
        self.link_ns = link_ns
        self.mid_count = mid_count
        self.seg_start = seg_start
        self.seg_end = seg_end
        self.down_clear = down_clear
        self.down_speed = down_speed
        self.down_ok = down_ok
        self.kmax = kmax
        cdef int most = 1
        cdef Py_ssize_t l
        for l in range(link_ns.shape[0]):
            if link_ns[l] > most:
                most = link_ns[l]
        self._rear = np.empty(most, dtype=np.float64)
        self._spd = np.empty(most, dtype=np.float64)
        self._blocked = np.empty(most, dtype=np.int8)

    def set_params(self, double tau, int cf, int lc, double lam, double tcrit, double ghr_c,
                   double ghr_m, double ghr_l, double prox, double eps, double margin, double maxlen):
        self.tau = tau
        self.cf = cf
        self.lc = lc
        self.lam = lam
        self.tcrit = tcrit
        self.ghr_c = ghr_c
        self.ghr_m = ghr_m
        self.ghr_l = ghr_l
        self.prox = prox
        self.eps = eps
        self.margin = margin
        self.maxlen = maxlen

    # -- ordering ---------------------------------------------------------

    cdef inline bint _before(self, int p, int q) nogil:
        cdef int lp = self.link[p]
        cdef int lq = self.link[q]
        if lp != lq:
            return lp < lq
        cdef double xp = self.pos[p]
        cdef double xq = self.pos[q]
        if xp != xq:
            return xp > xq
        if self.kind[p] != self.kind[q]:
            return self.kind[p] > self.kind[q]
        return p < q

    def sort(self, int n):
        cdef int i, j, s, m = 0, l
        for i in range(n):
            s = self.order[i]
            if self.kind[s] != KIND_FREE:
                self.order[m] = s
                m += 1
        for i in range(1, m):
            s = self.order[i]
            j = i - 1
            while j >= 0 and self._before(s, self.order[j]):
                self.order[j + 1] = self.order[j]
                j -= 1
            self.order[j + 1] = s
        for l in range(self.n_links):
            self.seg_start[l] = 0
            self.seg_end[l] = 0
        i = 0
        while i < m:
            l = self.link[self.order[i]]
            j = i
            while j < m and self.link[self.order[j]] == l:
                j += 1
            self.seg_start[l] = i
            self.seg_end[l] = j
            i = j
        self.n_order = m
        return m

    # -- neighbour queries ------------------------------------------------

    cdef double _leader(self, int i, int idx, int lo, int hi, double *bspeed, int *bslot) nogil:
        cdef double pos_i = self.pos[i]
        cdef double best = INF, pj, g
        cdef int start = self.seg_start[self.link[i]]
        cdef int j = idx - 1, s
        bspeed[0] = 0.0
        bslot[0] = -1
        while j >= start:
            s = self.order[j]
            pj = self.pos[s]
            if pj - self.maxlen - pos_i > best:
                break
            if self.lo[s] <= hi and self.hi[s] >= lo and s != i:
                g = pj - self.length[s] - pos_i
                if g < best:
                    best = g
                    bspeed[0] = self.speed[s]
                    bslot[0] = s
            j -= 1
        return best

    cdef double _follower(self, int i, int idx, int lo, int hi, int *bslot) nogil:
        cdef double rear_i = self.pos[i] - self.length[i]
        cdef double best = INF, pj, g
        cdef int end = self.seg_end[self.link[i]]
        cdef int j = idx + 1, s
        bslot[0] = -1
        while j < end:
            s = self.order[j]
            pj = self.pos[s]
            if rear_i - pj > best:
                break
            if self.kind[s] == KIND_VEHICLE and self.lo[s] <= hi and self.hi[s] >= lo:
                g = rear_i - pj
                if g < best:
                    best = g
                    bslot[0] = s
            j += 1
        return best

    cdef double _downstream(self, int nl, int k, double *bspeed_out) nogil:
        cdef int key = nl * (self.kmax + 1) + k
        if self.down_ok[key]:
            bspeed_out[0] = self.down_speed[key]
            return self.down_clear[key]
        cdef int ns = self.link_ns[nl]
        cdef double best = -INF, bspeed = 0.0, r, mm, ms
        cdef int q, j, s, c
        if k <= ns:
            for q in range(ns):
                self._rear[q] = INF
                self._spd[q] = 0.0
            for j in range(self.seg_start[nl], self.seg_end[nl]):
                s = self.order[j]
                r = self.pos[s] - self.length[s]
                for q in range(self.lo[s], self.hi[s] + 1):
                    if r < self._rear[q]:
                        self._rear[q] = r
                        self._spd[q] = self.speed[s]
            for c in range(0, ns - k + 1):
                mm = INF
                ms = 0.0
                for q in range(c, c + k):
                    if self._rear[q] < mm:
                        mm = self._rear[q]
                        ms = self._spd[q]
                if mm > best:
                    best = mm
                    bspeed = ms
        if best < 0.0:
            best = 0.0
        self.down_clear[key] = best
        self.down_speed[key] = bspeed
        self.down_ok[key] = 1
        bspeed_out[0] = bspeed
        return best

    cdef double _gap_ahead(self, int i, int idx, int lo, int hi, double *vl, int *ls) nogil:
        cdef double g = self._leader(i, idx, lo, hi, vl, ls)
        if ls[0] >= 0:
            return g
        cdef int nl = self.next_link[i]
        if nl < 0:
            vl[0] = 0.0
            return INF
        cdef double dc = self._downstream(nl, hi - lo + 1, vl)
        if dc == INF:
            vl[0] = 0.0
            return INF
        return self.link_len[self.link[i]] - self.pos[i] + dc

    cdef double _follow(self, int i, double dx, double vl, bint count) nogil:
        cdef double v = self.speed[i]
        cdef double vd = self.vd[i]
        cdef int ok = 1
        cdef double s
        if self.cf == CF_NEWTONIAN:
            return _newtonian(v, vd, self.amax[i], self.tau, dx)
        if self.cf == CF_GIPPS:
            s = _gipps(v, vd, self.amax[i], self.bdes[i], self.bhat[i], self.tau, dx, vl, &ok)
        else:
            s = _hybrid(v, vd, self.amax[i], self.bdes[i], self.bhat[i], self.tau, dx, vl, &ok)
        if count and not ok:
            self.neg_disc += 1
        return s

    cdef bint _strip_free(self, int i, int idx, int q) nogil:
        cdef double front = self.pos[i] + self.margin
        cdef double rear = self.pos[i] - self.length[i] - self.margin
        cdef int start = self.seg_start[self.link[i]]
        cdef int end = self.seg_end[self.link[i]]
        cdef int j, s
        cdef double pj
        j = idx - 1
        while j >= start:
            s = self.order[j]
            pj = self.pos[s]
            if pj - self.maxlen >= front:
                break
            if self.lo[s] <= q and self.hi[s] >= q:
                if pj - self.length[s] < front and rear < pj:
                    return False
            j -= 1
        j = idx + 1
        while j < end:
            s = self.order[j]
            pj = self.pos[s]
            if pj <= rear:
                break
            if self.lo[s] <= q and self.hi[s] >= q:
                if pj - self.length[s] < front and rear < pj:
                    return False
            j += 1
        return True

    cdef bint _accept(self, int i, int idx, int nlo, int nhi, double u) nogil:
        cdef double tau = self.tau
        cdef double v = self.speed[i]
        cdef double vl, vf, vf_new, v_new, g_lag, p
        cdef int ls, f, ok = 1
        cdef double g_lead = self._gap_ahead(i, idx, nlo, nhi, &vl, &ls)
        v_new = _gipps(v, self.vd[i], self.amax[i], self.bdes[i], self.bhat[i], tau, g_lead, vl, &ok)
        if not (v - v_new < -self.bdes[i] * tau):
            return False
        g_lag = self._follower(i, idx, nlo, nhi, &f)
        if f >= 0:
            vf = self.speed[f]
            vf_new = _gipps(vf, self.vd[f], self.amax[f], self.bdes[f], self.bhat[f], tau, g_lag, v, &ok)
            if not (vf - vf_new < -self.bdes[f] * tau):
                return False
        p = 1.0
        if ls >= 0:
            p = p * _gap_probability(_gap_time(g_lead, v), self.lam, self.tcrit)
        if f >= 0:
            p = p * _gap_probability(_gap_time(g_lag, v), self.lam, self.tcrit)
        return u < p

    cdef bint _ghr_desire(self, int i) nogil:
        cdef int H = self.H
        cdef int n = self.hist_n[i]
        if n < H:
            return False
        cdef int k = i * H + n % H
        cdef double dx = self.hist_dx[k]
        if dx <= 0.0:
            self.ghr_singular += 1
            return False
        cdef double a = _ghr(self.speed[i], self.hist_dv[k], dx, self.ghr_c, self.ghr_m, self.ghr_l)
        return a < 0.0

    # -- the step ---------------------------------------------------------

    def step(self, double[:] u):
        cdef int m = self.n_order
        cdef double tau = self.tau
        cdef int nsh = 0, nx = 0
        cdef int idx, i, lo, hi, ls, ns, d, q, dd, k, H = self.H
        cdef double v, g, vl, v0, v1, p0, p1, L, half
        cdef bint desire
        cdef Py_ssize_t kk
        for kk in range(self.down_ok.shape[0]):
            self.down_ok[kk] = 0

        with nogil:
            for idx in range(m):
                i = self.order[idx]
                if self.kind[i] != KIND_VEHICLE:
                    continue
                lo = self.lo[i]
                hi = self.hi[i]
                v = self.speed[i]
                if self.lc == LC_GHR:
                    desire = self._ghr_desire(i)
                else:
                    g = self._gap_ahead(i, idx, lo, hi, &vl, &ls)
                    desire = False
                    if ls >= 0:
                        if self._follow(i, g, vl, False) < self.eps:
                            desire = True
                        elif vl < v and g < self.prox * v * tau:
                            desire = True
                if not desire:
                    self.last_shift[i] = 0
                    continue
                ns = self.link_ns[self.link[i]]
                for dd in range(2):
                    d = -1 if dd == 0 else 1
                    if self.last_shift[i] == -d:
                        continue
                    if d < 0:
                        if lo == 0:
                            continue
                        q = lo - 1
                    else:
                        if hi == ns - 1:
                            continue
                        q = hi + 1
                    if not self._strip_free(i, idx, q):
                        continue
                    if self.lc != LC_STRAIGHT:
                        if not self._accept(i, idx, lo + d, hi + d, u[2 * idx + (0 if d < 0 else 1)]):
                            continue
                    self.lo[i] = lo + d
                    self.hi[i] = hi + d
                    self.last_shift[i] = d
                    self.shift_out[nsh] = i
                    self.shift_dir[i] = d
                    nsh += 1
                    break

            for idx in range(m):
                i = self.order[idx]
                if self.kind[i] != KIND_VEHICLE:
                    continue
                g = self._gap_ahead(i, idx, self.lo[i], self.hi[i], &vl, &ls)
                self.newspeed[i] = self._follow(i, g, vl, True)
                if self.lc == LC_GHR:
                    k = i * H + self.hist_n[i] % H
                    if ls >= 0:
                        self.hist_dv[k] = vl - self.speed[i]
                        self.hist_dx[k] = g
                    else:
                        self.hist_dv[k] = 0.0
                        self.hist_dx[k] = INF
                    self.hist_n[i] += 1

            for idx in range(m):
                i = self.order[idx]
                if self.kind[i] != KIND_VEHICLE:
                    continue
                v0 = self.speed[i]
                v1 = self.newspeed[i]
                p0 = self.pos[i]
                p1 = p0 + v1 * tau
                self.pos_prev[i] = p0
                self.pos[i] = p1
                if v1 > v0:
                    self.accel[i] = self.amax[i]
                else:
                    self.accel[i] = (v1 - v0) / tau
                self.speed[i] = v1
                if v1 < self.eps:
                    self.wait[i] += tau
                L = self.link_len[self.link[i]]
                half = 0.5 * L
                if p0 < half and half <= p1:
                    self.mid_count[self.link[i]] += 1
                if p1 >= L:
                    self.xfer_out[nx] = i
                    nx += 1
        return nx, nsh

    # -- entry and audit --------------------------------------------------

    def find_entry(self, int link, double front, double length, int k, int prefer):
        cdef int ns = self.link_ns[link]
        if k > ns:
            return -1
        cdef double rear = front - length
        cdef double pj
        cdef Py_ssize_t s
        cdef int q, best = -1, bdist = 0, run = 0, c, dist
        for q in range(ns):
            self._blocked[q] = 0
        for s in range(self.kind.shape[0]):
            if self.kind[s] == KIND_FREE or self.link[s] != link:
                continue
            pj = self.pos[s]
            if pj - self.length[s] < front and rear < pj:
                for q in range(self.lo[s], self.hi[s] + 1):
                    self._blocked[q] = 1
        for q in range(ns):
            if self._blocked[q]:
                run = 0
            else:
                run += 1
            if run >= k:
                c = q - k + 1
                dist = c - prefer if c >= prefer else prefer - c
                if best < 0 or dist < bdist:
                    best = c
                    bdist = dist
        return best

    def audit(self):
        out = []
        cdef int m = self.n_order
        cdef int idx, i, j, s, end
        cdef double rear_i, pj
        for idx in range(m):
            i = self.order[idx]
            if self.kind[i] != KIND_VEHICLE:
                continue
            rear_i = self.pos[i] - self.length[i]
            end = self.seg_end[self.link[i]]
            j = idx + 1
            while j < end:
                s = self.order[j]
                pj = self.pos[s]
                if pj <= rear_i:
                    break
                if self.kind[s] == KIND_VEHICLE and self.lo[s] <= self.hi[i] and self.hi[s] >= self.lo[i]:
                    out.append((self.link[i], i, s))
                j += 1
        return out
