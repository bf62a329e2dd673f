"""Pure-Python simulation kernel.

Line-for-line twin of ``_kernel.pyx``. Both must produce bit-identical
results: keep the order of floating point operations the same in both files.
"""

import math

INF = math.inf

CF_NEWTONIAN, CF_GIPPS, CF_HYBRID = 0, 1, 2
LC_STRAIGHT, LC_GIPPS, LC_GHR = 0, 1, 2
KIND_FREE, KIND_VEHICLE, KIND_PED = 0, 1, 2


def gipps_speed(v, vd, a, b, bhat, tau, dx, vl):
    """Return ``(speed, ok)``; ``ok`` is 0 when the braking radicand was negative."""
    ratio = v / vd
    va = v + 2.5 * a * tau * (1.0 - ratio) * math.sqrt(0.025 + ratio)
    disc = b * b * tau * tau - b * (2.0 * dx - v * tau - vl * vl / bhat)
    if disc < 0.0:
        return 0.0, 0
    vb = b * tau + math.sqrt(disc)
    s = va if va < vb else vb
    if s < 0.0:
        s = 0.0
    if s > vd:
        s = vd
    return s, 1


def newtonian_speed(v, vd, a, tau, dx):
    vacc = v + a * tau
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


def hybrid_speed(v, vd, a, b, bhat, tau, dx, vl):
    s, ok = gipps_speed(v, vd, a, b, bhat, tau, dx, vl)
    if s * tau > dx:
        s = dx / tau
        if s < 0.0:
            s = 0.0
    return s, ok


def gap_time(g, v):
    if v > 0.0:
        return g / v
    if g > 0.0:
        return INF
    return 0.0


def gap_probability(t, lam, tcrit):
    if t > tcrit:
        return 1.0 - math.exp(-lam * (t - tcrit))
    return 0.0


def ghr_accel(v, dv, dx, c, m, l):
    if dx == INF or (v <= 0.0 and m < 0.0):
        return 0.0
    return c * v ** m * dv / dx ** l


class Kernel:
    """Per-step vehicle update over struct-of-arrays state.

    Buffers are bound with :meth:`bind` / :meth:`bind_links` and scalar
    knobs with :meth:`set_params`; see ``roadbird.engine`` for the layout.
    """

    backend = "python"

    def __init__(self, n_links, hist_depth):
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

    def bind_links(self, link_len, link_ns, mid_count, seg_start, seg_end, down_clear, down_speed, down_ok, kmax):
        self.link_len = link_len
        self.link_ns = link_ns
        self.mid_count = mid_count
        self.seg_start = seg_start
        self.seg_end = seg_end
        self.down_clear = down_clear
        self.down_speed = down_speed
        self.down_ok = down_ok
        self.kmax = kmax

    def set_params(self, tau, cf, lc, lam, tcrit, ghr_c, ghr_m, ghr_l, prox, eps, margin, maxlen):
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

    def _before(self, p, q):
        # (link asc, pos desc, kind desc, slot asc)
        lp, lq = self.link[p], self.link[q]
        if lp != lq:
            return lp < lq
        xp, xq = self.pos[p], self.pos[q]
        if xp != xq:
            return xp > xq
        kp, kq = self.kind[p], self.kind[q]
        if kp != kq:
            return kp > kq
        return p < q

    def sort(self, n):
        """Drop freed slots from ``order[:n]``, sort it and rebuild link segments."""
        order = self.order
        kind = self.kind
        m = 0
        for i in range(n):
            s = order[i]
            if kind[s] != KIND_FREE:
                order[m] = s
                m += 1
        for i in range(1, m):
            s = order[i]
            j = i - 1
            while j >= 0 and self._before(s, order[j]):
                order[j + 1] = order[j]
                j -= 1
            order[j + 1] = s
        for l in range(self.n_links):
            self.seg_start[l] = 0
            self.seg_end[l] = 0
        i = 0
        while i < m:
            l = self.link[order[i]]
            j = i
            while j < m and self.link[order[j]] == l:
                j += 1
            self.seg_start[l] = i
            self.seg_end[l] = j
            i = j
        self.n_order = m
        return m

    # -- neighbour queries ------------------------------------------------

    def _leader(self, i, idx, lo, hi):
        """Nearest object ahead of order position ``idx`` overlapping strips lo..hi.

        Returns ``(gap, leader_speed, slot)``; slot is -1 when there is none.
        """
        order = self.order
        pos_i = float(self.pos[i])
        best = INF
        bspeed = 0.0
        bslot = -1
        start = self.seg_start[self.link[i]]
        j = idx - 1
        while j >= start:
            s = order[j]
            pj = float(self.pos[s])
            if pj - self.maxlen - pos_i > best:
                break
            if self.lo[s] <= hi and self.hi[s] >= lo and s != i:
                g = pj - float(self.length[s]) - pos_i
                if g < best:
                    best = g
                    bspeed = float(self.speed[s])
                    bslot = s
            j -= 1
        return best, bspeed, bslot

    def _follower(self, i, idx, lo, hi):
        """Nearest vehicle behind order position ``idx`` overlapping lo..hi."""
        order = self.order
        rear_i = float(self.pos[i]) - float(self.length[i])
        best = INF
        bslot = -1
        end = self.seg_end[self.link[i]]
        j = idx + 1
        while j < end:
            s = order[j]
            pj = float(self.pos[s])
            if rear_i - pj > best:
                break
            if self.kind[s] == KIND_VEHICLE and self.lo[s] <= hi and self.hi[s] >= lo:
                g = rear_i - pj
                if g < best:
                    best = g
                    bslot = s
            j += 1
        return best, bslot

    def _downstream(self, nl, k):
        """Clear distance past the start of link ``nl`` for a span of k strips."""
        key = nl * (self.kmax + 1) + k
        if self.down_ok[key]:
            return float(self.down_clear[key]), float(self.down_speed[key])
        ns = self.link_ns[nl]
        best = -INF
        bspeed = 0.0
        if k <= ns:
            # per-strip minimum rear over objects currently on nl
            rear = [INF] * ns
            spd = [0.0] * ns
            order = self.order
            for j in range(self.seg_start[nl], self.seg_end[nl]):
                s = order[j]
                r = float(self.pos[s]) - float(self.length[s])
                for q in range(self.lo[s], self.hi[s] + 1):
                    if r < rear[q]:
                        rear[q] = r
                        spd[q] = float(self.speed[s])
            for c in range(0, ns - k + 1):
                m = INF
                ms = 0.0
                for q in range(c, c + k):
                    if rear[q] < m:
                        m = rear[q]
                        ms = spd[q]
                if m > best:
                    best = m
                    bspeed = ms
        if best < 0.0:
            best = 0.0
        self.down_clear[key] = best
        self.down_speed[key] = bspeed
        self.down_ok[key] = 1
        return best, bspeed

    def _gap_ahead(self, i, idx, lo, hi):
        """Gap and leader speed used for car following; third item is the leader slot
        on this link (-1 when the gap comes from the link end)."""
        g, vl, s = self._leader(i, idx, lo, hi)
        if s >= 0:
            return g, vl, s
        nl = self.next_link[i]
        if nl < 0:
            return INF, 0.0, -1
        dc, ds = self._downstream(nl, hi - lo + 1)
        if dc == INF:
            return INF, 0.0, -1
        return float(self.link_len[self.link[i]]) - float(self.pos[i]) + dc, ds, -1

    def _follow(self, i, dx, vl, count):
        v = float(self.speed[i])
        vd = float(self.vd[i])
        cf = self.cf
        if cf == CF_NEWTONIAN:
            return newtonian_speed(v, vd, float(self.amax[i]), self.tau, dx)
        if cf == CF_GIPPS:
            s, ok = gipps_speed(v, vd, float(self.amax[i]), float(self.bdes[i]), float(self.bhat[i]),
                                self.tau, dx, vl)
        else:
            s, ok = hybrid_speed(v, vd, float(self.amax[i]), float(self.bdes[i]), float(self.bhat[i]),
                                 self.tau, dx, vl)
        if count and not ok:
            self.neg_disc += 1
        return s

    def _gipps_only(self, i, dx, vl):
        s, ok = gipps_speed(float(self.speed[i]), float(self.vd[i]), float(self.amax[i]),
                            float(self.bdes[i]), float(self.bhat[i]), self.tau, dx, vl)
        return s

    def _strip_free(self, i, idx, q):
        """True when strip q holds nothing overlapping vehicle i's extent (plus margin)."""
        order = self.order
        front = float(self.pos[i]) + self.margin
        rear = float(self.pos[i]) - float(self.length[i]) - self.margin
        start = self.seg_start[self.link[i]]
        end = self.seg_end[self.link[i]]
        # ahead of i in the ordering
        j = idx - 1
        while j >= start:
            s = order[j]
            pj = float(self.pos[s])
            if pj - self.maxlen >= front:
                break
            if self.lo[s] <= q and self.hi[s] >= q:
                if pj - float(self.length[s]) < front and rear < pj:
                    return False
            j -= 1
        j = idx + 1
        while j < end:
            s = order[j]
            pj = float(self.pos[s])
            if pj <= rear:
                break
            if self.lo[s] <= q and self.hi[s] >= q:
                if pj - float(self.length[s]) < front and rear < pj:
                    return False
            j += 1
        return True

    def _accept(self, i, idx, nlo, nhi, u):
        """Gipps feasibility gate plus gap-acceptance draw for a move to nlo..nhi."""
        tau = self.tau
        v = float(self.speed[i])
        g_lead, vl, ls = self._gap_ahead(i, idx, nlo, nhi)
        v_new = self._gipps_only(i, g_lead, vl)
        if not (v - v_new < -float(self.bdes[i]) * tau):
            return False
        g_lag, f = self._follower(i, idx, nlo, nhi)
        if f >= 0:
            vf = float(self.speed[f])
            vf_new, ok = gipps_speed(vf, float(self.vd[f]), float(self.amax[f]), float(self.bdes[f]),
                                     float(self.bhat[f]), tau, g_lag, v)
            if not (vf - vf_new < -float(self.bdes[f]) * tau):
                return False
        p = 1.0
        if ls >= 0:
            p = p * gap_probability(gap_time(g_lead, v), self.lam, self.tcrit)
        if f >= 0:
            p = p * gap_probability(gap_time(g_lag, v), self.lam, self.tcrit)
        return u < p

    def _ghr_desire(self, i):
        H = self.H
        n = self.hist_n[i]
        if n < H:
            return False
        k = i * H + n % H
        dx = float(self.hist_dx[k])
        if dx <= 0.0:
            self.ghr_singular += 1
            return False
        a = ghr_accel(float(self.speed[i]), float(self.hist_dv[k]), dx, self.ghr_c, self.ghr_m, self.ghr_l)
        return a < 0.0

    # -- the step ---------------------------------------------------------

    def step(self, u):
        """Lane changes, car following and advance for every vehicle.

        ``u`` holds two uniforms per entry of the ordering (left and right
        acceptance draws); it is ignored by the straightforward model.
        Returns ``(n_transfer, n_shift)``: the first entries of ``xfer_out``
        are vehicles whose front reached their link end, the first entries
        of ``shift_out`` vehicles that moved laterally (direction in
        ``shift_dir``).
        """
        order = self.order
        m = self.n_order
        tau = self.tau
        nsh = 0
        for k in range(len(self.down_ok)):
            self.down_ok[k] = 0

        # lateral decisions, sequential in processing order
        for idx in range(m):
            i = order[idx]
            if self.kind[i] != KIND_VEHICLE:
                continue
            lo = self.lo[i]
            hi = self.hi[i]
            v = float(self.speed[i])
            if self.lc == LC_GHR:
                desire = self._ghr_desire(i)
            else:
                g, vl, ls = self._gap_ahead(i, idx, lo, hi)
                desire = False
                if ls >= 0:
                    if self._follow(i, g, vl, 0) < self.eps:
                        desire = True
                    elif vl < v and g < self.prox * v * tau:
                        desire = True
            if not desire:
                self.last_shift[i] = 0
                continue
            ns = self.link_ns[self.link[i]]
            for d in (-1, 1):
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
                    if not self._accept(i, idx, lo + d, hi + d, float(u[2 * idx + (0 if d < 0 else 1)])):
                        continue
                self.lo[i] = lo + d
                self.hi[i] = hi + d
                self.last_shift[i] = d
                self.shift_out[nsh] = i
                self.shift_dir[i] = d
                nsh += 1
                break

        # longitudinal speeds against start-of-step positions
        H = self.H
        for idx in range(m):
            i = order[idx]
            if self.kind[i] != KIND_VEHICLE:
                continue
            g, vl, ls = self._gap_ahead(i, idx, self.lo[i], self.hi[i])
            self.newspeed[i] = self._follow(i, g, vl, 1)
            if self.lc == LC_GHR:
                k = i * H + self.hist_n[i] % H
                if ls >= 0:
                    self.hist_dv[k] = vl - float(self.speed[i])
                    self.hist_dx[k] = g
                else:
                    self.hist_dv[k] = 0.0
                    self.hist_dx[k] = INF
                self.hist_n[i] += 1

        # advance
        nx = 0
        for idx in range(m):
            i = order[idx]
            if self.kind[i] != KIND_VEHICLE:
                continue
            v0 = float(self.speed[i])
            v1 = float(self.newspeed[i])
            p0 = float(self.pos[i])
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
            L = float(self.link_len[self.link[i]])
            half = 0.5 * L
            if p0 < half and half <= p1:
                self.mid_count[self.link[i]] += 1
            if p1 >= L:
                self.xfer_out[nx] = i
                nx += 1
        return nx, nsh

    # -- entry and audit --------------------------------------------------

    def find_entry(self, link, front, length, k, prefer):
        """Lowest-index-distance free span of k strips for a vehicle entering
        ``link`` with its front at ``front``; -1 when every span is blocked.

        Scans every live slot, so vehicles placed earlier in the same step are seen.
        """
        ns = self.link_ns[link]
        if k > ns:
            return -1
        rear = front - length
        blocked = [False] * ns
        kind = self.kind
        for s in range(len(kind)):
            if kind[s] == KIND_FREE or self.link[s] != link:
                continue
            pj = float(self.pos[s])
            if pj - float(self.length[s]) < front and rear < pj:
                for q in range(self.lo[s], self.hi[s] + 1):
                    blocked[q] = True
        best = -1
        bdist = 0
        run = 0
        for q in range(ns):
            if blocked[q]:
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
        """Pairs of vehicles sharing a strip with overlapping intervals.

        Requires a fresh :meth:`sort`.
        """
        out = []
        order = self.order
        m = self.n_order
        for idx in range(m):
            i = order[idx]
            if self.kind[i] != KIND_VEHICLE:
                continue
            rear_i = float(self.pos[i]) - float(self.length[i])
            end = self.seg_end[self.link[i]]
            j = idx + 1
            while j < end:
                s = order[j]
                pj = float(self.pos[s])
                if pj <= rear_i:
                    break
                if self.kind[s] == KIND_VEHICLE and self.lo[s] <= self.hi[i] and self.hi[s] >= self.lo[i]:
                    out.append((int(self.link[i]), int(i), int(s)))
                j += 1
        return out
