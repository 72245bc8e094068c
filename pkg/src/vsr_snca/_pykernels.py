"""Pure-Python reference implementation of the simulation kernels.

Mirrors ``_kernels.pyx`` operation by operation (same loop order, same
floating-point expression shapes) so both backends produce bit-identical
results. Slow; used when the compiled extension is unavailable.
"""

import math

import numpy as np

# Opposite direction for (up, left, down, right).
_OPP = (2, 3, 0, 1)


def _locate(kx, x):
    """Segment index i with kx[i] <= x < kx[i+1], clipped to valid segments."""
    n = kx.shape[0]
    lo, hi = 0, n - 1
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


def _height(kx, ky, x):
    i = _locate(kx, x)
    return ky[i] + (ky[i + 1] - ky[i]) * (x - kx[i]) / (kx[i + 1] - kx[i])


def _limit_pass(pos, vel, inv_mass, li, lj, lo_arr, hi_arr):
    violated = False
    for e in range(li.shape[0]):
        i = li[e]
        j = lj[e]
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        length = math.sqrt(dx * dx + dy * dy)
        lo = lo_arr[e]
        hi = hi_arr[e]
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
        wi = inv_mass[i] / (inv_mass[i] + inv_mass[j])
        wj = 1.0 - wi
        corr = length - target
        pos[i, 0] += wi * corr * ux
        pos[i, 1] += wi * corr * uy
        pos[j, 0] -= wj * corr * ux
        pos[j, 1] -= wj * corr * uy
        vr = (vel[j, 0] - vel[i, 0]) * ux + (vel[j, 1] - vel[i, 1]) * uy
        if (length > hi and vr > 0.0) or (length < lo and vr < 0.0):
            vel[i, 0] += wi * vr * ux
            vel[i, 1] += wi * vr * uy
            vel[j, 0] -= wj * vr * ux
            vel[j, 1] -= wj * vr * uy
    return violated


def _ground_pass(pos, vel, contact, kx, ky, mu_s, mu_d):
    moved = False
    for n in range(pos.shape[0]):
        x = pos[n, 0]
        y = pos[n, 1]
        seg = _locate(kx, x)
        h = ky[seg] + (ky[seg + 1] - ky[seg]) * (x - kx[seg]) / (kx[seg + 1] - kx[seg])
        if y >= h:
            continue
        best = h - y
        cx = x
        cy = h
        i0 = _locate(kx, x - best)
        i1 = _locate(kx, x + best)
        for s in range(i0, i1 + 1):
            ax = kx[s]
            ay = ky[s]
            ex = kx[s + 1] - ax
            ey = ky[s + 1] - ay
            t = ((x - ax) * ex + (y - ay) * ey) / (ex * ex + ey * ey)
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            qx = ax + t * ex
            qy = ay + t * ey
            dist = math.sqrt((qx - x) * (qx - x) + (qy - y) * (qy - y))
            if dist < best:
                best = dist
                cx = qx
                cy = qy
        if best > 1e-12:
            nx = (cx - x) / best
            ny = (cy - y) / best
        else:
            ex = kx[seg + 1] - kx[seg]
            ey = ky[seg + 1] - ky[seg]
            el = math.sqrt(ex * ex + ey * ey)
            nx = -ey / el
            ny = ex / el
        pos[n, 0] = cx
        pos[n, 1] = cy
        vn = vel[n, 0] * nx + vel[n, 1] * ny
        if vn < 0.0:
            vx = vel[n, 0] - vn * nx
            vy = vel[n, 1] - vn * ny
            tx = -ny
            ty = nx
            vt = vx * tx + vy * ty
            dvn = -vn
            if math.fabs(vt) <= mu_s * dvn:
                vx -= vt * tx
                vy -= vt * ty
            elif vt > 0.0:
                vx -= mu_d * dvn * tx
                vy -= mu_d * dvn * ty
            else:
                vx += mu_d * dvn * tx
                vy += mu_d * dvn * ty
            vel[n, 0] = vx
            vel[n, 1] = vy
        contact[n] = 1
        moved = True
    return moved


def _substep(state, topo, kx, ky, c, dt):
    pos = state.pos
    vel = state.vel
    rest = state.rest
    force = topo.force
    mass = topo.mass
    inv_mass = topo.inv_mass
    si = topo.spring_i
    sj = topo.spring_j
    sk = topo.spring_k
    sc = topo.spring_c
    g = c.gravity
    n_nodes = pos.shape[0]
    for n in range(n_nodes):
        force[n, 0] = 0.0
        force[n, 1] = -g * mass[n]
    for s in range(si.shape[0]):
        i = si[s]
        j = sj[s]
        dx = pos[j, 0] - pos[i, 0]
        dy = pos[j, 1] - pos[i, 1]
        length = math.sqrt(dx * dx + dy * dy)
        if length < 1e-12:
            continue
        ux = dx / length
        uy = dy / length
        dv = (vel[j, 0] - vel[i, 0]) * ux + (vel[j, 1] - vel[i, 1]) * uy
        f = sk[s] * (length - rest[s]) + sc[s] * dv
        force[i, 0] += f * ux
        force[i, 1] += f * uy
        force[j, 0] -= f * ux
        force[j, 1] -= f * uy
    for n in range(n_nodes):
        vel[n, 0] += dt * force[n, 0] * inv_mass[n]
        vel[n, 1] += dt * force[n, 1] * inv_mass[n]
        pos[n, 0] += dt * vel[n, 0]
        pos[n, 1] += dt * vel[n, 1]
    # Alternate length clamping and ground projection; ground goes last so
    # no node is left below the terrain.
    for _ in range(c.constraint_iters):
        violated = _limit_pass(pos, vel, inv_mass, topo.limit_i, topo.limit_j,
                               topo.limit_lo, topo.limit_hi)
        moved = c.contact and _ground_pass(pos, vel, state.contact, kx, ky, c.mu_s, c.mu_d)
        if not (violated or moved):
            break


def apply_controls(state, topo, c, controls):
    rho = c.rho
    rest = state.rest
    rest0 = topo.spring_rest0
    sv = topo.spring_voxel
    for s in range(rest.shape[0]):
        v = sv[s]
        if v >= 0:
            rest[s] = rest0[s] * (1.0 - rho * controls[v])
        else:
            rest[s] = rest0[s]


def _first_nonfinite(pos, vel):
    for n in range(pos.shape[0]):
        if not (math.isfinite(pos[n, 0]) and math.isfinite(pos[n, 1])
                and math.isfinite(vel[n, 0]) and math.isfinite(vel[n, 1])):
            return n
    return -1


def step_physics(state, topo, terrain, c, controls, dt, n_sub):
    """Advance ``n_sub`` substeps of length ``dt`` in place; returns bad node or -1."""
    apply_controls(state, topo, c, controls)
    contact = state.contact
    for n in range(contact.shape[0]):
        contact[n] = 0
    kx = terrain.knots_x
    ky = terrain.knots_y
    for _ in range(n_sub):
        _substep(state, topo, kx, ky, c, dt)
    return _first_nonfinite(state.pos, state.vel)


def read_sensors(state, topo, c, out):
    pos = state.pos
    vel = state.vel
    vn = topo.voxel_nodes
    contact = state.contact
    span = c.area_hi - c.area_lo
    for v in range(vn.shape[0]):
        area = 0.0
        vx = 0.0
        vy = 0.0
        touch = 0.0
        for q in range(4):
            a = vn[v, q]
            b = vn[v, (q + 1) % 4]
            area += pos[a, 0] * pos[b, 1] - pos[b, 0] * pos[a, 1]
            vx += vel[a, 0]
            vy += vel[a, 1]
            if contact[a]:
                touch = 1.0
        ratio = math.fabs(0.5 * area) / c.rest_area
        out[v, 0] = min(1.0, max(0.0, (ratio - c.area_lo) / span))
        out[v, 1] = touch
        out[v, 2] = min(1.0, max(0.0, 0.5 + 0.25 * vx / (2.0 * c.v_scale)))
        out[v, 3] = min(1.0, max(0.0, 0.5 + 0.25 * vy / (2.0 * c.v_scale)))


def area_ratios(state, topo, c, out):
    pos = state.pos
    vn = topo.voxel_nodes
    for v in range(vn.shape[0]):
        area = 0.0
        for q in range(4):
            a = vn[v, q]
            b = vn[v, (q + 1) % 4]
            area += pos[a, 0] * pos[b, 1] - pos[b, 0] * pos[a, 1]
        out[v] = math.fabs(0.5 * area) / c.rest_area


def center_of_mass(state, topo):
    pos = state.pos
    mass = topo.mass
    sx = 0.0
    sy = 0.0
    sm = 0.0
    for n in range(pos.shape[0]):
        sx += mass[n] * pos[n, 0]
        sy += mass[n] * pos[n, 1]
        sm += mass[n]
    return sx / sm, sy / sm


def mlp_step(ctrl, sensors, out):
    n_vox = ctrl.n_vox
    n_c = ctrl.n_c
    n_in = ctrl.n_in
    n_h = ctrl.n_h
    n_out = ctrl.n_out
    nbrs = ctrl.neighbors
    w1 = ctrl.w1
    b1 = ctrl.b1
    w2 = ctrl.w2
    b2 = ctrl.b2
    prev = ctrl.msg_prev
    nxt = ctrl.msg_next
    x = ctrl.x
    hid = ctrl.hidden
    y = ctrl.y
    for v in range(n_vox):
        for q in range(4):
            x[q] = min(1.0, max(0.0, sensors[v, q]))
        for d in range(4):
            nb = nbrs[v, d]
            for ch in range(n_c):
                x[4 + d * n_c + ch] = prev[nb, _OPP[d], ch] if nb >= 0 else 0.0
        for j in range(n_h):
            acc = 0.0
            for i in range(n_in):
                acc += w1[v, j, i] * x[i]
            hid[j] = math.tanh(acc + b1[v, j])
        for o in range(n_out):
            acc = 0.0
            for j in range(n_h):
                acc += w2[v, o, j] * hid[j]
            y[o] = math.tanh(acc + b2[v, o])
        out[v] = y[0]
        for d in range(4):
            for ch in range(n_c):
                nxt[v, d, ch] = y[1 + d * n_c + ch] if ctrl.directional else y[1 + ch]
    prev[...] = nxt


def _lif_layer(s_in, n_pre, w, wsum, vv, th, psi, sl, s_out, n_post, v_rest, lam_v, dt_h,
               homeo, psi_inc, lam_psi):
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
            th[j] = min(th[j], wsum[j]) + psi[j]
        if v > th[j]:
            s_out[j] = 1
            v = v_rest
        else:
            s_out[j] = 0
        vv[j] = v
        sl[j] = s_out[j]


def snn_step(ctrl, sensors, k, out):
    n_vox = ctrl.n_vox
    n_c = ctrl.n_c
    n_in = ctrl.n_in
    n_h = ctrl.n_h
    n_out = ctrl.n_out
    spc = ctrl.steps_per_control
    nbrs = ctrl.neighbors
    prev = ctrl.trains_prev
    nxt = ctrl.trains_next
    s_in = ctrl.s_in
    s_hid = ctrl.s_hid
    s_out = ctrl.s_out
    enc = ctrl.enc_last
    counts = ctrl.dec_counts
    pos = ctrl.dec_pos[0]
    n_w = counts.shape[2]
    f_min = ctrl.f_min
    f_max = ctrl.f_max
    f_h = ctrl.f_h
    f_k = ctrl.f_k
    homeo = ctrl.homeostasis
    periods = [0, 0, 0, 0]
    for v in range(n_vox):
        for q in range(4):
            r = min(1.0, max(0.0, sensors[v, q]))
            f = r * (f_max - f_min) + f_min
            periods[q] = int(math.floor(f_h / f))
        for o in range(n_out):
            counts[v, o, pos] = 0
        for t in range(spc):
            h = k * spc + t
            for q in range(4):
                gap = h - enc[v, q]
                if gap > 0 and gap % periods[q] == 0:
                    s_in[q] = 1
                    enc[v, q] = h
                else:
                    s_in[q] = 0
            for d in range(4):
                nb = nbrs[v, d]
                base = 1 + _OPP[d] * n_c if ctrl.directional else 1
                for ch in range(n_c):
                    s_in[4 + d * n_c + ch] = prev[nb, base + ch, t] if nb >= 0 else 0
            _lif_layer(s_in, n_in, ctrl.w1[v], ctrl.wsum1[v], ctrl.v1[v], ctrl.th1[v],
                       ctrl.psi1[v], ctrl.sl1[v], s_hid, n_h, ctrl.v_rest, ctrl.lam_v,
                       ctrl.dt_h, homeo, ctrl.psi_inc, ctrl.lam_psi)
            _lif_layer(s_hid, n_h, ctrl.w2[v], ctrl.wsum2[v], ctrl.v2[v], ctrl.th2[v],
                       ctrl.psi2[v], ctrl.sl2[v], s_out, n_out, ctrl.v_rest, ctrl.lam_v,
                       ctrl.dt_h, homeo, ctrl.psi_inc, ctrl.lam_psi)
            for o in range(n_out):
                nxt[v, o, t] = s_out[o]
                counts[v, o, pos] += s_out[o]
        total = 0
        for w in range(n_w):
            total += counts[v, 0, w]
        a = 2.0 * (total * f_k / n_w) / f_max - 1.0
        out[v] = min(1.0, max(-1.0, a))
    ctrl.dec_pos[0] = (pos + 1) % n_w
    prev[...] = nxt


def controller_step(ctrl, sensors, k, out):
    if ctrl.kind == 0:
        mlp_step(ctrl, sensors, out)
    else:
        snn_step(ctrl, sensors, k, out)


def run_episode(state, topo, terrain, c, ctrl, k0, n_steps, com_out, act_out,
                area_out=None, nodes_out=None):
    """Closed-loop rollout of ``n_steps`` control steps starting at step ``k0``.

    Row 0 of ``com_out`` (and of the optional recorders) holds the initial
    state; row ``k+1`` the state after control step ``k``. Returns the
    offending ``(step, node)`` on divergence, else ``(-1, -1)``.
    """
    n_vox = topo.voxel_nodes.shape[0]
    sensors = np.zeros((n_vox, 4))
    act = np.zeros(n_vox)
    com_out[0, 0], com_out[0, 1] = center_of_mass(state, topo)
    if area_out is not None:
        area_ratios(state, topo, c, area_out[0])
    if nodes_out is not None:
        nodes_out[0] = state.pos
    for k in range(n_steps):
        read_sensors(state, topo, c, sensors)
        controller_step(ctrl, sensors, k0 + k, act)
        bad = step_physics(state, topo, terrain, c, act, c.dt, c.n_sub)
        act_out[k] = act
        if bad >= 0:
            return k, bad
        com_out[k + 1, 0], com_out[k + 1, 1] = center_of_mass(state, topo)
        if area_out is not None:
            area_ratios(state, topo, c, area_out[k + 1])
        if nodes_out is not None:
            nodes_out[k + 1] = state.pos
    return -1, -1
