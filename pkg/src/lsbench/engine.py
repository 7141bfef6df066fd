"""Modified nodal analysis, Newton DC solves, and fixed-step implicit transient.

Unknown vector layout: x = [node voltages (n), source branch currents (ns)].
KCL rows hold the sum of currents leaving each node (a gmin conductance from
every node to ground is included); each voltage source adds one branch-current
unknown and one constraint row (v+ - v-) - V(t) = 0.  Branch currents are
positive into the + terminal.

DC operating points run damped Newton (per-iteration node updates clamped to
+/-0.5 V), converged when both max|dv| < vntol and the worst KCL residual is
below abstol.  On failure the solver falls back to gmin stepping (1e-3 S down
to the 1e-12 S floor in decade steps) and then to source stepping (all source
values scaled 0 -> 1 in 20 increments), each stage warm-starting the next.

Transient uses trapezoidal companions by default (one backward-Euler startup
step) or backward Euler throughout.  Steps that fail to converge are retried
with halved substeps, up to 8 halvings deep; substeps always land back on the
uniform output grid, so every emitted sample is a converged solver state.
All capacitances here are constant, so companions reduce to a fixed matrix
alpha*C plus a history current.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .devmodel import VT, _core_eval, mosfet_caps, source_value
from .netlist import Circuit

GMIN_DEFAULT = 1e-12


class SolverError(RuntimeError):
    pass


@dataclass
class SolveOptions:
    abstol: float = 1e-9   # A, KCL residual bound
    reltol: float = 1e-3   # relative tolerance for downstream comparisons
    vntol: float = 1e-6    # V, Newton update bound
    max_iter: int = 200
    vclamp: float = 0.5    # V, per-node per-iteration damping clamp


@dataclass
class SysState:
    v: np.ndarray         # node voltages
    i_branch: np.ndarray  # source branch currents

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.v, self.i_branch])


@dataclass
class OpPoint:
    state: SysState
    residual_max: float
    iterations: int
    homotopy_used: str  # "none" | "gmin" | "source"


@dataclass
class Waveforms:
    t: np.ndarray
    node_v: dict          # name -> ndarray over the grid
    supply_i: dict        # source name -> branch current (into + terminal)
    source_nodes: dict    # source name -> (plus node name, minus node name), "0" = ground
    tstep: float = 0.0
    resid_max: np.ndarray | None = None  # accepted KCL residual per grid point
    gmin: float = GMIN_DEFAULT           # shunt used in the run; power corrections need it


class _System:
    """Compiled stamping plan for one circuit."""

    def __init__(self, circuit: Circuit):
        self.circuit = circuit
        n = circuit.n_nodes
        ns = len(circuit.sources)
        N = n + ns
        self.n, self.ns, self.N = n, ns, N

        G = np.zeros((N, N))
        for r in circuit.resistors:
            g = 1.0 / r.value
            if r.a >= 0:
                G[r.a, r.a] += g
            if r.b >= 0:
                G[r.b, r.b] += g
            if r.a >= 0 and r.b >= 0:
                G[r.a, r.b] -= g
                G[r.b, r.a] -= g
        for k, s in enumerate(circuit.sources):
            row = n + k
            if s.p >= 0:
                G[s.p, row] += 1.0
                G[row, s.p] += 1.0
            if s.m >= 0:
                G[s.m, row] -= 1.0
                G[row, s.m] -= 1.0
        self.G = G
        self.src_rows = np.arange(n, N)
        self.waves = [s.wave for s in circuit.sources]

        C = np.zeros((n, n))

        def stamp_c(a, b, c):
            if a >= 0:
                C[a, a] += c
            if b >= 0:
                C[b, b] += c
            if a >= 0 and b >= 0:
                C[a, b] -= c
                C[b, a] -= c

        for cap in circuit.caps:
            stamp_c(cap.a, cap.b, cap.value)
        for m in circuit.mosfets:
            mc = mosfet_caps(m.params, m.w, m.l)
            stamp_c(m.g, m.s, mc.cgs)
            stamp_c(m.g, m.d, mc.cgd)
            stamp_c(m.d, m.b, mc.cdb)
            stamp_c(m.s, m.b, mc.csb)
        self.C = C
        self.Cext = np.zeros((N, N))
        self.Cext[:n, :n] = C

        # MOSFET evaluation arrays; ground is mapped to the spare slot n of a
        # voltage gather buffer whose last entry stays 0.
        mos = circuit.mosfets
        M = len(mos)
        self.M = M
        gidx = lambda i: i if i >= 0 else n
        self.g_idx4 = np.array(
            [[gidx(m.d), gidx(m.g), gidx(m.s), gidx(m.b)] for m in mos],
            dtype=np.intp,
        ).reshape(M, 4).T.copy()
        self.m_sgn = np.array([1.0 if m.params.polarity == "nmos" else -1.0 for m in mos])
        getp = lambda f: np.array([getattr(m.params, f) for m in mos])
        self.p_vth0 = getp("vth0")
        self.p_n = getp("n_slope")
        self.p_kp = getp("kp")
        self.p_lam = getp("lam")
        self.p_eta = getp("eta_dibl")
        self.p_gamma = getp("gamma_body")
        self.p_phi = getp("phi_s")
        self.m_w = np.array([m.w for m in mos])
        self.m_l = np.array([m.l for m in mos])
        self.c_a = 1.0 / (2.0 * self.p_n * VT)
        self.c_ispec = 2.0 * self.p_n * self.p_kp * (self.m_w / self.m_l) * VT * VT
        self._vbuf = np.zeros(n + 1)
        self._gbuf = np.zeros((4, M))
        self._src_cache = (None, None, None)

        # current (f) stamp plan: +i at drain row, -i at source row
        fi, fd, fs = [], [], []
        for k, m in enumerate(mos):
            if m.d >= 0:
                fi.append(m.d); fd.append(k); fs.append(1.0)
            if m.s >= 0:
                fi.append(m.s); fd.append(k); fs.append(-1.0)
        self.f_idx = np.array(fi, dtype=np.intp)
        self.f_dev = np.array(fd, dtype=np.intp)
        self.f_sgn = np.array(fs)

        # Jacobian stamp plan: rows (d,+1),(s,-1) x cols (d,g,s,b) -> comps 0..3
        ji, jd, jc, js = [], [], [], []
        for k, m in enumerate(mos):
            cols = ((m.d, 0), (m.g, 1), (m.s, 2), (m.b, 3))
            for row, rs in ((m.d, 1.0), (m.s, -1.0)):
                if row < 0:
                    continue
                for col, comp in cols:
                    if col < 0:
                        continue
                    ji.append(row * N + col); jd.append(k); jc.append(comp); js.append(rs)
        self.j_flat = np.array(ji, dtype=np.intp)
        self.j_sgn = np.array(js)
        # linear index into the flattened (4, M) conductance buffer
        self.j_lin = np.array(jc, dtype=np.intp) * max(M, 1) + np.array(jd, dtype=np.intp)

    # -- device evaluation ------------------------------------------------

    def mos_currents(self, v: np.ndarray):
        """Evaluate all MOSFETs at node voltages v.  Returns the physical
        drain->source currents and the (4, M) conductance components (w.r.t.
        the drain, gate, source, body node voltages)."""
        if self.M == 0:
            return np.zeros(0), self._gbuf
        buf = self._vbuf
        buf[: self.n] = v
        vd, vg, vs, vb = buf[self.g_idx4] * self.m_sgn
        hi = np.maximum(vd, vs)
        lo = np.minimum(vd, vs)
        swap = vd < vs
        idn, gm, gds, gmb = _core_eval(
            vg - lo, hi - lo, lo - vb,
            self.p_vth0, self.p_n, self.p_kp, self.p_lam,
            self.p_eta, self.p_gamma, self.p_phi, self.m_w, self.m_l,
            a=self.c_a, ispec=self.c_ispec,
        )
        # conductances are reflection-invariant; swapping exchanges the roles
        # of the drain and source columns and flips the gate/body signs
        gmb_gm = gm + gmb
        gsum = gmb_gm + gds
        msw = swap * gmb_gm
        sflip = 1.0 - 2.0 * swap
        g = self._gbuf
        g[0] = gds + msw          # d column: gds | gsum
        g[1] = gm * sflip         # g column: gm | -gm
        g[2] = msw - gsum         # s column: -gsum | -gds
        g[3] = gmb * sflip        # b column: gmb | -gmb
        i_phys = idn * (sflip * self.m_sgn)
        return i_phys, g

    # -- assembly ----------------------------------------------------------

    def source_vector(self, t: float, scale: float = 1.0) -> np.ndarray:
        ct, cs, cv = self._src_cache
        if ct == t and cs == scale:
            return cv
        v = np.array([scale * source_value(w, t) for w in self.waves])
        self._src_cache = (t, scale, v)
        return v

    def base_matrix(self, gmin: float, alpha: float = 0.0) -> np.ndarray:
        base = self.G + alpha * self.Cext
        idx = np.arange(self.n)
        base[idx, idx] += gmin
        return base

    def assemble(self, x, t, gmin, base, alpha=0.0, v_prev=None, ic_prev=None,
                 src_scale=1.0):
        """Return (J, f) at state vector x.  `base` must be
        base_matrix(gmin, alpha); alpha=0 means no companion (DC)."""
        n, N = self.n, self.N
        v = x[:n]
        f = base.dot(x)
        f[self.src_rows] -= self.source_vector(t, src_scale)
        if alpha != 0.0:
            f[:n] -= alpha * self.C.dot(v_prev)
            if ic_prev is not None:
                f[:n] -= ic_prev
        i_phys, gstack = self.mos_currents(v)
        J = base.copy()
        if self.M:
            f[:n] += np.bincount(self.f_idx, weights=self.f_sgn * i_phys[self.f_dev], minlength=n)
            jvals = self.j_sgn * gstack.ravel()[self.j_lin]
            J.ravel()[: N * N] += np.bincount(self.j_flat, weights=jvals, minlength=N * N)
        return J, f

    def cap_current(self, alpha, v_new, v_prev, ic_prev):
        ic = alpha * self.C.dot(v_new - v_prev)
        if ic_prev is not None:
            ic -= ic_prev
        return ic

    # -- Newton ------------------------------------------------------------

    def newton(self, x0, t, gmin, base, opts: SolveOptions, alpha=0.0,
               v_prev=None, ic_prev=None, src_scale=1.0, max_iter=None):
        """Damped Newton from x0.  Returns (x, iterations, residual_max,
        converged, failure_reason)."""
        n = self.n
        x = x0.copy()
        dv_ok = False
        limit = max_iter if max_iter is not None else opts.max_iter
        resmax = np.inf
        for it in range(1, limit + 1):
            J, f = self.assemble(x, t, gmin, base, alpha, v_prev, ic_prev, src_scale)
            resmax = float(np.max(np.abs(f[:n]))) if n else 0.0
            if dv_ok and resmax < opts.abstol:
                return x, it, resmax, True, ""
            try:
                dx = np.linalg.solve(J, -f)
            except np.linalg.LinAlgError:
                return x, it, resmax, False, "singular Jacobian (check for floating nodes)"
            if not np.all(np.isfinite(dx)):
                return x, it, resmax, False, "non-finite Newton update"
            dvmax = float(np.max(np.abs(dx[:n]))) if n else 0.0
            if resmax < opts.abstol and dvmax < opts.vntol:
                x += dx  # residual and update both inside tolerance: accept now
                return x, it, resmax, True, ""
            np.clip(dx[:n], -opts.vclamp, opts.vclamp, out=dx[:n])
            x += dx
            dv_ok = dvmax < opts.vntol
        return x, limit, resmax, False, "iteration limit"

    def worst_node(self, x, t, gmin, src_scale=1.0) -> str:
        if self.n == 0:
            return "<none>"
        _, f = self.assemble(x, t, gmin, self.base_matrix(gmin), src_scale=src_scale)
        return self.circuit.node_names[int(np.argmax(np.abs(f[: self.n])))]


def _state_from_vector(sys_: _System, x: np.ndarray) -> SysState:
    return SysState(v=x[: sys_.n].copy(), i_branch=x[sys_.n:].copy())


def assemble(circuit: Circuit, state: SysState, companion: dict | None = None,
             t: float = 0.0, gmin: float = GMIN_DEFAULT):
    """Public one-shot assembly: returns (J, f) at the given state.

    companion=None stamps DC (capacitors open).  Otherwise companion is a
    mapping with keys h (step), prev (SysState at the step start), scheme
    ("trap" | "be"), and optionally ic_prev (per-node capacitor currents at
    the step start; required history for trapezoidal, zeros by default).
    """
    sys_ = _System(circuit)
    x = state.as_vector()
    if companion is None:
        base = sys_.base_matrix(gmin)
        return sys_.assemble(x, t, gmin, base)
    h = companion["h"]
    scheme = companion.get("scheme", "trap")
    if scheme not in ("trap", "be"):
        raise ValueError(f"unknown scheme {scheme!r}")
    alpha = 2.0 / h if scheme == "trap" else 1.0 / h
    prev: SysState = companion["prev"]
    ic_prev = companion.get("ic_prev")
    if scheme == "trap" and ic_prev is None:
        ic_prev = np.zeros(sys_.n)
    base = sys_.base_matrix(gmin, alpha)
    return sys_.assemble(x, t, gmin, base, alpha, prev.v, ic_prev)


_GMIN_LADDER = tuple(10.0 ** -k for k in range(3, 13))  # 1e-3 .. 1e-12


def dc_operating_point(circuit: Circuit, opts: SolveOptions | None = None,
                       gmin: float = GMIN_DEFAULT, t: float = 0.0,
                       x0: np.ndarray | None = None) -> OpPoint:
    """Solve the DC operating point with sources at their t=0 values.

    Tries plain Newton first, then gmin stepping, then source stepping.
    Raises SolverError when every strategy fails.
    """
    opts = opts or SolveOptions()
    sys_ = _System(circuit)
    start = x0.copy() if x0 is not None else np.zeros(sys_.N)

    base = sys_.base_matrix(gmin)
    x, it, res, ok, _ = sys_.newton(start, t, gmin, base, opts)
    total = it
    if ok:
        return OpPoint(_state_from_vector(sys_, x), res, total, "none")

    ladder = [g for g in _GMIN_LADDER if g > gmin] + [gmin]
    x = np.zeros(sys_.N)
    ok_ladder = True
    for g in ladder:
        base = sys_.base_matrix(g)
        x, it, res, ok, _ = sys_.newton(x, t, g, base, opts)
        total += it
        if not ok:
            ok_ladder = False
            break
    if ok_ladder:
        return OpPoint(_state_from_vector(sys_, x), res, total, "gmin")

    x = np.zeros(sys_.N)
    base = sys_.base_matrix(gmin)
    for frac in np.linspace(0.05, 1.0, 20):
        x, it, res, ok, why = sys_.newton(x, t, gmin, base, opts, src_scale=float(frac))
        total += it
        if not ok:
            hint = f"; {'; '.join(circuit.warnings)}" if circuit.warnings else ""
            raise SolverError(
                f"DC operating point did not converge: plain Newton, gmin and "
                f"source stepping all failed ({why} at source scale {frac:.2f}; "
                f"largest residual at node "
                f"{sys_.worst_node(x, t, gmin, float(frac))!r}{hint})"
            )
    return OpPoint(_state_from_vector(sys_, x), res, total, "source")


_MAX_HALVINGS = 8


def transient(circuit: Circuit, tstep: float, tstop: float,
              scheme: str = "trap", ic: OpPoint | str = "auto",
              opts: SolveOptions | None = None,
              gmin: float = GMIN_DEFAULT) -> Waveforms:
    """Fixed-grid implicit transient analysis.

    Samples are emitted on the uniform grid 0, tstep, ..., tstop.  The
    initial condition is the DC operating point at the sources' initial
    values unless an OpPoint is passed explicitly.
    """
    if scheme not in ("trap", "be"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if tstep <= 0 or tstop <= 0:
        raise ValueError("tstep and tstop must be positive")
    if tstop < 10 * tstep:
        raise ValueError("tstop must be at least 10*tstep")
    opts = opts or SolveOptions()
    sys_ = _System(circuit)
    n = sys_.n

    if ic == "auto":
        op = dc_operating_point(circuit, opts, gmin)
    elif isinstance(ic, OpPoint):
        op = ic
    else:
        raise ValueError("ic must be 'auto' or an OpPoint")

    n_steps = int(round(tstop / tstep))
    vrec = np.empty((n_steps + 1, n))
    irec = np.empty((n_steps + 1, sys_.ns))
    x = op.state.as_vector()
    vrec[0] = x[:n]
    irec[0] = x[n:]
    ic_cur = np.zeros(n)  # capacitor currents at the current accepted point

    base_cache: dict = {}

    def base_for(alpha: float) -> np.ndarray:
        b = base_cache.get(alpha)
        if b is None:
            b = sys_.base_matrix(gmin, alpha)
            base_cache[alpha] = b
        return b

    step_iters = min(opts.max_iter, 60)  # failed steps fall back to halving

    def step(x_from, ic_from, t0, t1, use_trap, depth, guess=None):
        """One implicit step t0 -> t1, halving on failure.  Returns
        (x, ic, worst accepted residual)."""
        h = t1 - t0
        alpha = 2.0 / h if use_trap else 1.0 / h
        ic_hist = ic_from if use_trap else None
        starts = (guess, x_from) if guess is not None else (x_from,)
        for start in starts:
            x_new, _, res, ok, _ = sys_.newton(
                start, t1, gmin, base_for(alpha), opts,
                alpha=alpha, v_prev=x_from[:n], ic_prev=ic_hist,
                max_iter=step_iters,
            )
            if ok:
                ic_new = sys_.cap_current(alpha, x_new[:n], x_from[:n], ic_hist)
                return x_new, ic_new, res
        if depth >= _MAX_HALVINGS:
            raise SolverError(
                f"transient step at t={t1:.6g}s failed to converge after "
                f"{_MAX_HALVINGS} halvings (min substep {h:.3g}s)"
            )
        tm = 0.5 * (t0 + t1)
        x_mid, ic_mid, r1 = step(x_from, ic_from, t0, tm, use_trap, depth + 1)
        x_new, ic_new, r2 = step(x_mid, ic_mid, tm, t1, use_trap, depth + 1)
        return x_new, ic_new, max(r1, r2)

    rrec = np.empty(n_steps + 1)
    rrec[0] = op.residual_max
    x_prev_grid = x.copy()
    for i in range(1, n_steps + 1):
        t0 = (i - 1) * tstep
        t1 = i * tstep if i < n_steps else tstop
        use_trap = scheme == "trap" and i > 1
        guess = None
        if i > 1:
            guess = 2.0 * x - x_prev_grid  # linear predictor on the uniform grid
        x_prev_grid = x
        x, ic_cur, rrec[i] = step(x, ic_cur, t0, t1, use_trap, 0, guess)
        vrec[i] = x[:n]
        irec[i] = x[n:]

    t = np.arange(n_steps + 1) * tstep
    t[-1] = tstop
    names = circuit.node_names
    gname = lambda i: "0" if i < 0 else names[i]
    return Waveforms(
        t=t,
        node_v={nm: vrec[:, j] for j, nm in enumerate(names)},
        supply_i={s.name: irec[:, k] for k, s in enumerate(circuit.sources)},
        source_nodes={s.name: (gname(s.p), gname(s.m)) for s in circuit.sources},
        tstep=tstep,
        resid_max=rrec,
        gmin=gmin,
    )
