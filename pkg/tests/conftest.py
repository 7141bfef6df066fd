"""Shared fixtures: simulations reused by several test modules."""

import pytest

from lsbench.engine import transient
from lsbench.netlist import elaborate, parse_netlist

# A minimal inverter driving a known load with a slow squarewave, sized so
# almost all supply energy goes into charging the 10 fF cap: the average
# power must land just above f * C * Vdd^2.
INVERTER_POWER_NETLIST = """\
inverter driving 10 fF from a 10 MHz squarewave
.model NCH NMOS ()
.model PCH PMOS ()
VDD vdd 0 DC 3.3
VIN in 0 PULSE(0 3.3 1n 0.1n 0.1n 49.9n 100n)
MP1 out in vdd vdd PCH W=0.2u L=0.35u
MN1 out in 0 0 NCH W=0.08u L=0.35u
CL out 0 10f
.tran 20p 300n
.end
"""


@pytest.fixture(scope="session")
def inverter_power_run():
    """(circuit, waveforms) for the inverter above, simulated once."""
    circ = elaborate(parse_netlist(INVERTER_POWER_NETLIST))
    waves = transient(circ, circ.tran.tstep, circ.tran.tstop)
    return circ, waves


# First-order RC driven by a pulse train, stepped at tau/1000: the measured
# 50% delay has the closed form RC * ln 2.
RC_DELAY_NETLIST = """\
rc pulse train, tau = 1 ns
VIN in 0 PULSE(0 3.3 0 1p 1p 7.998n 16n)
R1 in out 1k
C1 out 0 1p
.tran 1p 40n
.end
"""


@pytest.fixture(scope="session")
def rc_delay_run():
    """(circuit, waveforms) for the RC pulse train, simulated once."""
    circ = elaborate(parse_netlist(RC_DELAY_NETLIST))
    waves = transient(circ, circ.tran.tstep, circ.tran.tstop)
    return circ, waves
