"""MNA assembly, DC operating point, and implicit transient integration."""

import numpy as np
import pytest

import refmodel as rm
from lsbench.devmodel import default_params
from lsbench.engine import (GMIN_DEFAULT, SolverError, SysState, assemble,
                            dc_operating_point, transient)
from lsbench.netlist import elaborate, parse_netlist
from lsbench.topologies import gen, stack_leakage_fixture

GMIN = GMIN_DEFAULT


def _circ(text):
    return elaborate(parse_netlist(text))


RC_STEP = """\
rc step response, tau = 1 ns
VIN in 0 PULSE(0 3.3 0 1f 1f 20n 40n)
R1 in out 1k
C1 out 0 1p
.tran 1p 10n
.end
"""

INV_DC = """\
static inverter, input low
.model NCH NMOS ()
.model PCH PMOS ()
VDD vdd 0 DC 3.3
VIN in 0 DC 0
MP1 out in vdd vdd PCH W=2.5u L=0.35u
MN1 out in 0 0 NCH W=1u L=0.35u
.end
"""


# ---------------------------------------------------------------------------
# assembly

def test_assemble_resistor_row():
    circ = _circ("one grounded resistor\nR1 a 0 1k\n.end\n")
    J, f = assemble(circ, SysState(v=np.array([2.0]), i_branch=np.zeros(0)))
    g = 1e-3 + GMIN
    assert f[0] == pytest.approx(2.0 * g, rel=1e-15)
    assert J[0, 0] == pytest.approx(g, rel=1e-15)


def test_assemble_source_constraint_row():
    circ = _circ("driven resistor\nV1 a 0 DC 3.3\nR1 a 0 1k\n.end\n")
    st = SysState(v=np.array([2.0]), i_branch=np.array([0.1]))
    J, f = assemble(circ, st)
    assert f[1] == pytest.approx(2.0 - 3.3, rel=1e-15)  # v(a) - 3.3
    assert f[0] == pytest.approx(2.0 * (1e-3 + GMIN) + 0.1, rel=1e-15)
    assert J[0, 1] == 1.0 and J[1, 0] == 1.0


def test_assemble_vanishes_at_stack_equilibrium():
    # hand-built state from the reference bisection must satisfy KCL exactly
    doc = stack_leakage_fixture(2, 1e-6, default_params("nmos"), 3.3)
    circ = elaborate(doc)
    vm = rm.stack_vm(rm.RET_NMOS, 3.3, 0.5e-6, gmin=GMIN)
    i_top = rm.ref_id(rm.RET_NMOS, -vm, 3.3 - vm, vm, 0.5e-6)
    v = np.zeros(circ.n_nodes)
    v[circ.node_index["vdd"]] = 3.3
    v[circ.node_index["mx1_m1"]] = vm
    st = SysState(v=v, i_branch=np.array([-(i_top + GMIN * 3.3)]))
    _, f = assemble(circ, st)
    assert np.max(np.abs(f)) < 1e-12


# ---------------------------------------------------------------------------
# DC operating point

def test_resistive_divider():
    circ = _circ("divider\nV1 in 0 DC 5\nR1 in out 1k\nR2 out 0 1k\n.end\n")
    op = dc_operating_point(circ)
    assert op.homotopy_used == "none"
    assert op.residual_max < 1e-9
    assert op.state.v[circ.node_index["out"]] == pytest.approx(2.5, abs=1e-6)


def test_inverter_dc_matches_reference():
    circ = _circ(INV_DC)
    op = dc_operating_point(circ)
    vo = op.state.v[circ.node_index["out"]]
    assert vo == pytest.approx(3.3, abs=5e-3)
    assert vo == pytest.approx(3.2999999810475193, abs=1e-6)
    want = rm.inverter_out(rm.RET_NMOS, rm.RET_PMOS, 3.3, 0.0, 1e-6, 2.5e-6)
    assert vo == pytest.approx(want, abs=1e-6)
    assert op.homotopy_used == "none"


def test_stack_fixture_middle_node():
    doc = stack_leakage_fixture(2, 1e-6, default_params("nmos"), 3.3)
    circ = elaborate(doc)
    op = dc_operating_point(circ)
    vm = op.state.v[circ.node_index["mx1_m1"]]
    assert vm == pytest.approx(0.07229562364375133, abs=1e-6)
    assert vm == pytest.approx(rm.stack_vm(rm.RET_NMOS, 3.3, 0.5e-6, gmin=GMIN),
                               abs=1e-6)


def test_singular_jacobian_reported():
    # with the shunt disabled, a capacitor island has no DC path at all
    circ = _circ("cap island\nV1 a 0 DC 1\nC1 b 0 1p\n.end\n")
    with pytest.raises(SolverError, match="singular Jacobian"):
        dc_operating_point(circ, gmin=0.0)


# ---------------------------------------------------------------------------
# transient

def test_rc_step_matches_closed_form():
    circ = _circ(RC_STEP)
    waves = transient(circ, circ.tran.tstep, circ.tran.tstop)
    rc = 1e3 * 1e-12
    assert len(waves.t) == 10001 and waves.t[-1] == 10e-9
    out = waves.node_v["out"]
    assert abs(out[0]) < 1e-6
    sel = (waves.t >= 0.1 * rc) & (waves.t <= 5 * rc)
    exact = 3.3 * (1.0 - np.exp(-waves.t[sel] / rc))
    assert np.max(np.abs(out[sel] - exact) / exact) < 0.01
    assert waves.resid_max.max() < 1e-9


def test_be_and_trap_agree_when_settled():
    circ = _circ(RC_STEP)
    tr = transient(circ, 1e-12, 10e-9, scheme="trap")
    be = transient(circ, 1e-12, 10e-9, scheme="be")
    sel = tr.t >= 5e-9
    diff = np.abs(tr.node_v["out"][sel] - be.node_v["out"][sel])
    assert np.max(diff) < 1e-3


def test_dc_sources_give_flat_waveforms():
    circ = _circ("dc only\nVIN in 0 DC 3.3\nR1 in out 1k\nC1 out 0 1p\n.end\n")
    waves = transient(circ, 1e-9, 20e-9)
    for arr in waves.node_v.values():
        assert np.max(np.abs(arr - arr[0])) < 1e-6


def test_transient_is_deterministic():
    circ = elaborate(gen("ssls"))
    w1 = transient(circ, 100e-12, 20e-9)
    w2 = transient(circ, 100e-12, 20e-9)
    for name in w1.node_v:
        assert np.array_equal(w1.node_v[name], w2.node_v[name])
    assert np.array_equal(w1.resid_max, w2.resid_max)


def test_companion_replay_satisfies_kcl():
    # rebuild every accepted step from the recorded waveforms with an
    # independently coded BE-then-trapezoid companion recurrence; the KCL
    # residual of each replayed step must sit inside the solver tolerance
    circ = _circ(RC_STEP)
    waves = transient(circ, 10e-12, 5e-9)
    names = circ.node_names
    vn = np.stack([waves.node_v[nm] for nm in names], axis=1)
    ib = np.stack([waves.supply_i[s.name] for s in circ.sources], axis=1)
    Cm = np.zeros((2, 2))
    Cm[circ.node_index["out"], circ.node_index["out"]] = 1e-12

    ic = np.zeros(2)
    worst = 0.0
    for i in range(1, len(waves.t)):
        h = float(waves.t[i] - waves.t[i - 1])
        scheme = "be" if i == 1 else "trap"
        comp = {"h": h, "prev": SysState(v=vn[i - 1], i_branch=ib[i - 1]),
                "scheme": scheme}
        if scheme == "trap":
            comp["ic_prev"] = ic
        _, f = assemble(circ, SysState(v=vn[i], i_branch=ib[i]),
                        companion=comp, t=float(waves.t[i]))
        worst = max(worst, float(np.max(np.abs(f[:2]))))
        alpha = (1.0 if scheme == "be" else 2.0) / h
        step_ic = alpha * Cm.dot(vn[i] - vn[i - 1])
        ic = step_ic - ic if scheme == "trap" else step_ic
    assert worst < 1e-9
    assert waves.resid_max.max() < 1e-9


def test_inverter_switches_once_per_edge(inverter_power_run):
    circ, waves = inverter_power_run
    sel = waves.t > 100e-9
    s = waves.node_v["out"][sel] - 1.65
    crossings = int(np.sum(np.diff(np.signbit(s)) != 0))
    assert crossings == 4  # two periods, one rise and one fall each
    assert waves.resid_max.max() < 1e-9


def test_transient_validation():
    circ = _circ(RC_STEP)
    with pytest.raises(ValueError, match="scheme"):
        transient(circ, 1e-12, 1e-9, scheme="euler")
    with pytest.raises(ValueError, match="10"):
        transient(circ, 1e-9, 5e-9)
    with pytest.raises(ValueError, match="positive"):
        transient(circ, -1e-12, 1e-9)
