# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels.

Same entry points and the same floating-point expression order as
``_pykernels``; the two backends agree bit for bit.
"""

from libc.math cimport sqrt, fabs, floor, tanh, isfinite
from libc.stdint cimport int64_t

import numpy as np

cdef Py_ssize_t[4] _OPP = [2, 3, 0, 1]


cdef inline Py_ssize_t _locate(const double[::1] kx, double x) noexcept nogil:
    cdef Py_ssize_t n = kx.shape[0]
    cdef Py_ssize_t lo = 0, hi = n - 1, mid
    if x <= kx[0]:
        return 0
    if x >= kx[n - 1]:
        return n - 2
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if kx[mid] <= x:
            lo = mid
        else:
            hi = mid
    return lo


cdef inline double _clip01(double x) noexcept nogil:
    if x > 1.0:
        return 1.0
    if x < 0.0:
        return 0.0
    return x


cdef struct Consts:
    double gravity
    double mu_s
    double mu_d
    double rho
    double area_lo
    double area_hi
    double rest_area
    double v_scale
    double dt
    int n_sub
    int constraint_iters
    int contact


cdef Consts _consts(c):
    cdef Consts out
    out.gravity = c.gravity
    out.mu_s = c.mu_s
    out.mu_d = c.mu_d
    out.rho = c.rho
    out.area_lo = c.area_lo
    out.area_hi = c.area_hi
    out.rest_area = c.rest_area
    out.v_scale = c.v_scale
    out.dt = c.dt
    out.n_sub = c.n_sub
    out.constraint_iters = c.constraint_iters
    out.contact = 1 if c.contact else 0
    return out


cdef class _Body:
    cdef double[:, ::1] pos
    cdef double[:, ::1] vel
    cdef double[::1] rest
    cdef unsigned char[::1] contact
    cdef double[:, ::1] force
    cdef const double[::1] mass
    cdef const double[::1] inv_mass
    cdef const Py_ssize_t[::1] si
    cdef const Py_ssize_t[::1] sj
    cdef const double[::1] sk
    cdef const double[::1] sc
    cdef const double[::1] rest0
    cdef const Py_ssize_t[::1] sv
    cdef const Py_ssize_t[::1] li
    cdef const Py_ssize_t[::1] lj
    cdef const double[::1] llo
    cdef const double[::1] lhi
    cdef const Py_ssize_t[:, ::1] vn
    cdef const double[::1] kx
    cdef const double[::1] ky

    def __init__(self, state, topo, terrain):
        self.pos = state.pos
        self.vel = state.vel
        self.rest = state.rest
        self.contact = state.contact
        self.force = topo.force
        self.mass = topo.mass
        self.inv_mass = topo.inv_mass
        self.si = topo.spring_i
        self.sj = topo.spring_j
        self.sk = topo.spring_k
        self.sc = topo.spring_c
        self.rest0 = topo.spring_rest0
        self.sv = topo.spring_voxel
        self.li = topo.limit_i
        self.lj = topo.limit_j
        self.llo = topo.limit_lo
        self.lhi = topo.limit_hi
        self.vn = topo.voxel_nodes
        if terrain is not None:
            self.kx = terrain.knots_x
            self.ky = terrain.knots_y


cdef bint _limit_pass(_Body b) noexcept nogil:
    cdef bint violated = False
    cdef Py_ssize_t e, i, j
    cdef double dx, dy, length, lo, hi, target, ux, uy, wi, wj, corr, vr
    for e in range(b.li.shape[0]):
        i = b.li[e]
        j = b.lj[e]
        dx = b.pos[j, 0] - b.pos[i, 0]
        dy = b.pos[j, 1] - b.pos[i, 1]
        length = sqrt(dx * dx + dy * dy)
        lo = b.llo[e]
        hi = b.lhi[e]
        if length < lo:
            target = lo
        elif length > hi:
            target = hi
        else:
            continue
        violated = True
        if length < 1e-12:
            continue
        ux = dx / length
        uy = dy / length
        wi = b.inv_mass[i] / (b.inv_mass[i] + b.inv_mass[j])
        wj = 1.0 - wi
        corr = length - target
        b.pos[i, 0] += wi * corr * ux
        b.pos[i, 1] += wi * corr * uy
        b.pos[j, 0] -= wj * corr * ux
        b.pos[j, 1] -= wj * corr * uy
        vr = (b.vel[j, 0] - b.vel[i, 0]) * ux + (b.vel[j, 1] - b.vel[i, 1]) * uy
        if (length > hi and vr > 0.0) or (length < lo and vr < 0.0):
            b.vel[i, 0] += wi * vr * ux
            b.vel[i, 1] += wi * vr * uy
            b.vel[j, 0] -= wj * vr * ux
            b.vel[j, 1] -= wj * vr * uy
    return violated


cdef bint _ground_pass(_Body b, double mu_s, double mu_d) noexcept nogil:
    cdef Py_ssize_t n, seg, i0, i1, s
    cdef bint moved = False
    cdef double x, y, h, best, cx, cy, ax, ay, ex, ey, t, qx, qy, dist
    cdef double nx, ny, el, vn, vx, vy, tx, ty, vt, dvn
    for n in range(b.pos.shape[0]):
        x = b.pos[n, 0]
        y = b.pos[n, 1]
        seg = _locate(b.kx, x)
        h = b.ky[seg] + (b.ky[seg + 1] - b.ky[seg]) * (x - b.kx[seg]) / (b.kx[seg + 1] - b.kx[seg])
        if y >= h:
            continue
        best = h - y
        cx = x
        cy = h
        i0 = _locate(b.kx, x - best)
        i1 = _locate(b.kx, x + best)
        for s in range(i0, i1 + 1):
            ax = b.kx[s]
            ay = b.ky[s]
            ex = b.kx[s + 1] - ax
            ey = b.ky[s + 1] - ay
            t = ((x - ax) * ex + (y - ay) * ey) / (ex * ex + ey * ey)
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            qx = ax + t * ex
            qy = ay + t * ey
            dist = sqrt((qx - x) * (qx - x) + (qy - y) * (qy - y))
            if dist < best:
                best = dist
                cx = qx
                cy = qy
        if best > 1e-12:
            nx = (cx - x) / best
            ny = (cy - y) / best
        else:
            ex = b.kx[seg + 1] - b.kx[seg]
            ey = b.ky[seg + 1] - b.ky[seg]
            el = sqrt(ex * ex + ey * ey)
            nx = -ey / el
            ny = ex / el
        b.pos[n, 0] = cx
        b.pos[n, 1] = cy
        vn = b.vel[n, 0] * nx + b.vel[n, 1] * ny
        if vn < 0.0:
            vx = b.vel[n, 0] - vn * nx
            vy = b.vel[n, 1] - vn * ny
            tx = -ny
            ty = nx
            vt = vx * tx + vy * ty
            dvn = -vn
            if fabs(vt) <= mu_s * dvn:
                vx -= vt * tx
                vy -= vt * ty
            elif vt > 0.0:
                vx -= mu_d * dvn * tx
                vy -= mu_d * dvn * ty
            else:
                vx += mu_d * dvn * tx
                vy += mu_d * dvn * ty
            b.vel[n, 0] = vx
            b.vel[n, 1] = vy
        b.contact[n] = 1
        moved = True
    return moved


cdef void _substep(_Body b, Consts* c, double dt) noexcept nogil:
    cdef Py_ssize_t n, s, i, j, it
    cdef Py_ssize_t n_nodes = b.pos.shape[0]
    cdef double dx, dy, length, ux, uy, dv, f
    cdef bint violated, moved
    for n in range(n_nodes):
        b.force[n, 0] = 0.0
        b.force[n, 1] = -c.gravity * b.mass[n]
    for s in range(b.si.shape[0]):
        i = b.si[s]
        j = b.sj[s]
        dx = b.pos[j, 0] - b.pos[i, 0]
        dy = b.pos[j, 1] - b.pos[i, 1]
        length = sqrt(dx * dx + dy * dy)
        if length < 1e-12:
            continue
        ux = dx / length
        uy = dy / length
        dv = (b.vel[j, 0] - b.vel[i, 0]) * ux + (b.vel[j, 1] - b.vel[i, 1]) * uy
        f = b.sk[s] * (length - b.rest[s]) + b.sc[s] * dv
        b.force[i, 0] += f * ux
        b.force[i, 1] += f * uy
        b.force[j, 0] -= f * ux
        b.force[j, 1] -= f * uy
    for n in range(n_nodes):
        b.vel[n, 0] += dt * b.force[n, 0] * b.inv_mass[n]
        b.vel[n, 1] += dt * b.force[n, 1] * b.inv_mass[n]
        b.pos[n, 0] += dt * b.vel[n, 0]
        b.pos[n, 1] += dt * b.vel[n, 1]
    for it in range(c.constraint_iters):
        violated = _limit_pass(b)
        moved = c.contact and _ground_pass(b, c.mu_s, c.mu_d)
        if not (violated or moved):
            break


cdef void _apply_controls(_Body b, double rho, const double[::1] controls) noexcept nogil:
    cdef Py_ssize_t s, v
    for s in range(b.rest.shape[0]):
        v = b.sv[s]
        if v >= 0:
            b.rest[s] = b.rest0[s] * (1.0 - rho * controls[v])
        else:
            b.rest[s] = b.rest0[s]


cdef Py_ssize_t _first_nonfinite(_Body b) noexcept nogil:
    cdef Py_ssize_t n
    for n in range(b.pos.shape[0]):
        if not (isfinite(b.pos[n, 0]) and isfinite(b.pos[n, 1])
                and isfinite(b.vel[n, 0]) and isfinite(b.vel[n, 1])):
            return n
    return -1


cdef Py_ssize_t _step_physics(_Body b, Consts* c, const double[::1] controls,
                              double dt, int n_sub) noexcept nogil:
    cdef Py_ssize_t n
    cdef int it
    _apply_controls(b, c.rho, controls)
    for n in range(b.contact.shape[0]):
        b.contact[n] = 0
    for it in range(n_sub):
        _substep(b, c, dt)
    return _first_nonfinite(b)


cdef void _read_sensors(_Body b, Consts* c, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t v, q, a, bb
    cdef double area, vx, vy, touch, ratio
    cdef double span = c.area_hi - c.area_lo
    for v in range(b.vn.shape[0]):
        area = 0.0
        vx = 0.0
        vy = 0.0
        touch = 0.0
        for q in range(4):
            a = b.vn[v, q]
            bb = b.vn[v, (q + 1) % 4]
            area += b.pos[a, 0] * b.pos[bb, 1] - b.pos[bb, 0] * b.pos[a, 1]
            vx += b.vel[a, 0]
            vy += b.vel[a, 1]
            if b.contact[a]:
                touch = 1.0
        ratio = fabs(0.5 * area) / c.rest_area
        out[v, 0] = _clip01((ratio - c.area_lo) / span)
        out[v, 1] = touch
        out[v, 2] = _clip01(0.5 + 0.25 * vx / (2.0 * c.v_scale))
        out[v, 3] = _clip01(0.5 + 0.25 * vy / (2.0 * c.v_scale))


cdef void _area_ratios(_Body b, double rest_area, double[::1] out) noexcept nogil:
    cdef Py_ssize_t v, q, a, bb
    cdef double area
    for v in range(b.vn.shape[0]):
        area = 0.0
        for q in range(4):
            a = b.vn[v, q]
            bb = b.vn[v, (q + 1) % 4]
            area += b.pos[a, 0] * b.pos[bb, 1] - b.pos[bb, 0] * b.pos[a, 1]
        out[v] = fabs(0.5 * area) / rest_area


cdef void _com(_Body b, double* cx, double* cy) noexcept nogil:
    cdef Py_ssize_t n
    cdef double sx = 0.0, sy = 0.0, sm = 0.0
    for n in range(b.pos.shape[0]):
        sx += b.mass[n] * b.pos[n, 0]
        sy += b.mass[n] * b.pos[n, 1]
        sm += b.mass[n]
    cx[0] = sx / sm
    cy[0] = sy / sm


cdef class _Ctrl:
    cdef int kind
    cdef Py_ssize_t n_vox, n_c, n_in, n_h, n_out, spc
    cdef bint directional, homeostasis
    cdef const Py_ssize_t[:, ::1] nbrs
    cdef const double[:, :, ::1] w1
    cdef const double[:, :, ::1] w2
    # MLP
    cdef const double[:, ::1] b1
    cdef const double[:, ::1] b2
    cdef double[:, :, ::1] msg_prev
    cdef double[:, :, ::1] msg_next
    cdef double[::1] x
    cdef double[::1] hid
    cdef double[::1] y
    # SNN
    cdef const double[:, ::1] wsum1
    cdef const double[:, ::1] wsum2
    cdef double[:, ::1] v1
    cdef double[:, ::1] th1
    cdef double[:, ::1] psi1
    cdef unsigned char[:, ::1] sl1
    cdef double[:, ::1] v2
    cdef double[:, ::1] th2
    cdef double[:, ::1] psi2
    cdef unsigned char[:, ::1] sl2
    cdef int64_t[:, ::1] enc
    cdef int64_t[:, :, ::1] counts
    cdef int64_t[::1] dec_pos
    cdef unsigned char[:, :, ::1] tprev
    cdef unsigned char[:, :, ::1] tnext
    cdef unsigned char[::1] s_in
    cdef unsigned char[::1] s_hid
    cdef unsigned char[::1] s_out
    cdef double f_min, f_max, f_h, f_k, v_rest, lam_v, dt_h, psi_inc, lam_psi

    def __init__(self, ctrl):
        self.kind = ctrl.kind
        self.n_vox = ctrl.n_vox
        self.n_c = ctrl.n_c
        self.n_in = ctrl.n_in
        self.n_h = ctrl.n_h
        self.n_out = ctrl.n_out
        self.directional = ctrl.directional
        self.nbrs = ctrl.neighbors
        self.w1 = ctrl.w1
        self.w2 = ctrl.w2
        if self.kind == 0:
            self.b1 = ctrl.b1
            self.b2 = ctrl.b2
            self.msg_prev = ctrl.msg_prev
            self.msg_next = ctrl.msg_next
            self.x = ctrl.x
            self.hid = ctrl.hidden
            self.y = ctrl.y
        else:
            self.spc = ctrl.steps_per_control
            self.homeostasis = ctrl.homeostasis
            self.wsum1 = ctrl.wsum1
            self.wsum2 = ctrl.wsum2
            self.v1 = ctrl.v1
            self.th1 = ctrl.th1
            self.psi1 = ctrl.psi1
            self.sl1 = ctrl.sl1
            self.v2 = ctrl.v2
            self.th2 = ctrl.th2
            self.psi2 = ctrl.psi2
            self.sl2 = ctrl.sl2
            self.enc = ctrl.enc_last
            self.counts = ctrl.dec_counts
            self.dec_pos = ctrl.dec_pos
            self.tprev = ctrl.trains_prev
            self.tnext = ctrl.trains_next
            self.s_in = ctrl.s_in
            self.s_hid = ctrl.s_hid
            self.s_out = ctrl.s_out
            self.f_min = ctrl.f_min
            self.f_max = ctrl.f_max
            self.f_h = ctrl.f_h
            self.f_k = ctrl.f_k
            self.v_rest = ctrl.v_rest
            self.lam_v = ctrl.lam_v
            self.dt_h = ctrl.dt_h
            self.psi_inc = ctrl.psi_inc
            self.lam_psi = ctrl.lam_psi


cdef void _mlp_step(_Ctrl m, const double[:, ::1] sensors, double[::1] out) noexcept nogil:
    cdef Py_ssize_t v, q, d, nb, ch, j, i, o
    cdef Py_ssize_t n_c = m.n_c
    cdef double acc
    for v in range(m.n_vox):
        for q in range(4):
            m.x[q] = _clip01(sensors[v, q])
        for d in range(4):
            nb = m.nbrs[v, d]
            for ch in range(n_c):
                m.x[4 + d * n_c + ch] = m.msg_prev[nb, _OPP[d], ch] if nb >= 0 else 0.0
        for j in range(m.n_h):
            acc = 0.0
            for i in range(m.n_in):
                acc += m.w1[v, j, i] * m.x[i]
            m.hid[j] = tanh(acc + m.b1[v, j])
        for o in range(m.n_out):
            acc = 0.0
            for j in range(m.n_h):
                acc += m.w2[v, o, j] * m.hid[j]
            m.y[o] = tanh(acc + m.b2[v, o])
        out[v] = m.y[0]
        for d in range(4):
            for ch in range(n_c):
                m.msg_next[v, d, ch] = m.y[1 + d * n_c + ch] if m.directional else m.y[1 + ch]
    m.msg_prev[...] = m.msg_next


cdef void _lif_layer(const unsigned char[::1] s_in, Py_ssize_t n_pre,
                     const double[:, ::1] w, const double[::1] wsum,
                     double[::1] vv, double[::1] th, double[::1] psi,
                     unsigned char[::1] sl, unsigned char[::1] s_out, Py_ssize_t n_post,
                     double v_rest, double lam_v, double dt_h, bint homeo,
                     double psi_inc, double lam_psi) noexcept nogil:
    cdef Py_ssize_t j, i
    cdef double syn, v
    for j in range(n_post):
        syn = 0.0
        for i in range(n_pre):
            if s_in[i]:
                syn += w[j, i]
        v = vv[j]
        v = v + syn - dt_h * lam_v * v
        if homeo:
            if sl[j]:
                psi[j] = psi[j] + psi_inc
            else:
                psi[j] = psi[j] - psi[j] * lam_psi * dt_h
            th[j] = (th[j] if th[j] < wsum[j] else wsum[j]) + psi[j]
        if v > th[j]:
            s_out[j] = 1
            v = v_rest
        else:
            s_out[j] = 0
        vv[j] = v
        sl[j] = s_out[j]


cdef void _snn_step(_Ctrl m, const double[:, ::1] sensors, int64_t k, double[::1] out) noexcept nogil:
    cdef Py_ssize_t v, q, o, t, d, nb, base, ch, w
    cdef Py_ssize_t n_c = m.n_c
    cdef Py_ssize_t pos = m.dec_pos[0]
    cdef Py_ssize_t n_w = m.counts.shape[2]
    cdef int64_t h, gap, total
    cdef int64_t[4] periods
    cdef double r, f, a
    for v in range(m.n_vox):
        for q in range(4):
            r = _clip01(sensors[v, q])
            f = r * (m.f_max - m.f_min) + m.f_min
            periods[q] = <int64_t>floor(m.f_h / f)
        for o in range(m.n_out):
            m.counts[v, o, pos] = 0
        for t in range(m.spc):
            h = k * m.spc + t
            for q in range(4):
                gap = h - m.enc[v, q]
                if gap > 0 and gap % periods[q] == 0:
                    m.s_in[q] = 1
                    m.enc[v, q] = h
                else:
                    m.s_in[q] = 0
            for d in range(4):
                nb = m.nbrs[v, d]
                base = 1 + _OPP[d] * n_c if m.directional else 1
                for ch in range(n_c):
                    m.s_in[4 + d * n_c + ch] = m.tprev[nb, base + ch, t] if nb >= 0 else 0
            _lif_layer(m.s_in, m.n_in, m.w1[v], m.wsum1[v], m.v1[v], m.th1[v], m.psi1[v],
                       m.sl1[v], m.s_hid, m.n_h, m.v_rest, m.lam_v, m.dt_h, m.homeostasis,
                       m.psi_inc, m.lam_psi)
            _lif_layer(m.s_hid, m.n_h, m.w2[v], m.wsum2[v], m.v2[v], m.th2[v], m.psi2[v],
                       m.sl2[v], m.s_out, m.n_out, m.v_rest, m.lam_v, m.dt_h, m.homeostasis,
                       m.psi_inc, m.lam_psi)
            for o in range(m.n_out):
                m.tnext[v, o, t] = m.s_out[o]
                m.counts[v, o, pos] += m.s_out[o]
        total = 0
        for w in range(n_w):
            total += m.counts[v, 0, w]
        a = 2.0 * (total * m.f_k / n_w) / m.f_max - 1.0
        if a > 1.0:
            a = 1.0
        elif a < -1.0:
            a = -1.0
        out[v] = a
    m.dec_pos[0] = (pos + 1) % n_w
    m.tprev[...] = m.tnext


cdef inline void _controller_step(_Ctrl m, const double[:, ::1] sensors, int64_t k,
                                  double[::1] out) noexcept nogil:
    if m.kind == 0:
        _mlp_step(m, sensors, out)
    else:
        _snn_step(m, sensors, k, out)


# ---------------------------------------------------------------- python API

def apply_controls(state, topo, c, controls):
    cdef _Body b = _Body(state, topo, None)
    _apply_controls(b, c.rho, np.ascontiguousarray(controls, dtype=np.float64))


def step_physics(state, topo, terrain, c, controls, double dt, int n_sub):
    cdef _Body b = _Body(state, topo, terrain)
    cdef Consts cc = _consts(c)
    cdef const double[::1] ctl = np.ascontiguousarray(controls, dtype=np.float64)
    cdef Py_ssize_t bad
    with nogil:
        bad = _step_physics(b, &cc, ctl, dt, n_sub)
    return bad


def read_sensors(state, topo, c, out):
    cdef _Body b = _Body(state, topo, None)
    cdef Consts cc = _consts(c)
    _read_sensors(b, &cc, out)


def area_ratios(state, topo, c, out):
    cdef _Body b = _Body(state, topo, None)
    _area_ratios(b, c.rest_area, out)


def center_of_mass(state, topo):
    cdef _Body b = _Body(state, topo, None)
    cdef double cx, cy
    _com(b, &cx, &cy)
    return cx, cy


def mlp_step(ctrl, sensors, out):
    _mlp_step(_Ctrl(ctrl), sensors, out)


def snn_step(ctrl, sensors, k, out):
    _snn_step(_Ctrl(ctrl), sensors, k, out)


def controller_step(ctrl, sensors, k, out):
    _controller_step(_Ctrl(ctrl), sensors, k, out)


def run_episode(state, topo, terrain, c, ctrl, Py_ssize_t k0, Py_ssize_t n_steps,
                double[:, ::1] com_out, double[:, ::1] act_out,
                area_out=None, nodes_out=None):
    cdef _Body b = _Body(state, topo, terrain)
    cdef _Ctrl m = _Ctrl(ctrl)
    cdef Consts cc = _consts(c)
    cdef Py_ssize_t n_vox = b.vn.shape[0]
    cdef double[:, ::1] sensors = np.zeros((n_vox, 4))
    cdef double[:, ::1] area_mv
    cdef double[:, :, ::1] nodes_mv
    cdef bint rec_area = area_out is not None
    cdef bint rec_nodes = nodes_out is not None
    cdef Py_ssize_t k, bad = -1, fail_k = -1, n
    cdef double cx, cy
    if rec_area:
        area_mv = area_out
    if rec_nodes:
        nodes_mv = nodes_out
    with nogil:
        _com(b, &cx, &cy)
        com_out[0, 0] = cx
        com_out[0, 1] = cy
        if rec_area:
            _area_ratios(b, cc.rest_area, area_mv[0])
        if rec_nodes:
            nodes_mv[0, :, :] = b.pos
        for k in range(n_steps):
            _read_sensors(b, &cc, sensors)
            _controller_step(m, sensors, k0 + k, act_out[k])
            bad = _step_physics(b, &cc, act_out[k], cc.dt, cc.n_sub)
            if bad >= 0:
                fail_k = k
                break
            _com(b, &cx, &cy)
            com_out[k + 1, 0] = cx
            com_out[k + 1, 1] = cy
            if rec_area:
                _area_ratios(b, cc.rest_area, area_mv[k + 1])
            if rec_nodes:
                nodes_mv[k + 1, :, :] = b.pos
    if fail_k >= 0:
        return fail_k, bad
    return -1, -1
