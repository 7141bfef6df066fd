"""Independent reference implementations used as oracles.

Everything here is a direct hand transcription of the closed forms the
package claims to implement, written against plain math so the tests do not
reuse the code under test.  Bisection searches stand in for the nonlinear
solver wherever an equilibrium is needed.
"""

import math

VT = 0.025852
GMIN = 1e-12

# mirror of the shipped defaults, written out longhand on purpose
RET_NMOS = dict(vth0=0.50, kp=190e-6, n=1.35, lam=0.06, eta=0.03, gamma=0.58, phi=0.8)
RET_PMOS = dict(vth0=0.95, kp=48e-6, n=1.5, lam=0.05, eta=0.03, gamma=0.45, phi=0.8)
# an alternative mid-range 0.35 um-class set exercised through .model overrides
ALT_NMOS = dict(vth0=0.55, kp=170e-6, n=1.4, lam=0.06, eta=0.03, gamma=0.58, phi=0.8)


def ref_vth(p, vds=0.0, vsb=0.0):
    vsb_c = max(vsb, -0.5 * p["phi"])
    return (p["vth0"]
            + p["gamma"] * (math.sqrt(p["phi"] + vsb_c) - math.sqrt(p["phi"]))
            - p["eta"] * vds)


def ref_id(p, vgs, vds, vsb, w, l=0.35e-6):
    """Drain current of the continuous interpolated model, scalar math only."""
    vte = ref_vth(p, vds, vsb)
    ispec = 2.0 * p["n"] * p["kp"] * (w / l) * VT * VT
    a = 1.0 / (2.0 * p["n"] * VT)
    q = lambda u: math.log1p(math.exp(u)) if u < 40.0 else u
    uf = (vgs - vte) * a
    ur = uf - vds / (2.0 * VT)
    return ispec * (q(uf) ** 2 - q(ur) ** 2) * (1.0 + p["lam"] * vds)


def bisect(f, lo, hi, it=200):
    flo = f(lo)
    for _ in range(it):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if (f(mid) > 0.0) == (flo > 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def stack_vm(p, vdd, w_each, gmin=0.0, l=0.35e-6):
    """Intermediate-node equilibrium of a 2-series off stack (gates at 0)."""
    f = lambda vm: (ref_id(p, -vm, vdd - vm, vm, w_each, l)
                    - ref_id(p, 0.0, vm, 0.0, w_each, l) - gmin * vm)
    return bisect(f, 0.0, vdd / 2)


def stack3_vm(p, vdd, w_each, gmin=0.0, l=0.35e-6):
    """(vm1, vm2) equilibrium of a 3-series off stack, nested bisection."""
    def vm2_of(vm1):
        h = lambda vm2: (ref_id(p, -vm2, vm1 - vm2, vm2, w_each, l)
                         - ref_id(p, 0.0, vm2, 0.0, w_each, l) - gmin * vm2)
        return bisect(h, 0.0, max(vm1, 1e-12))
    def f(vm1):
        vm2 = vm2_of(vm1)
        return (ref_id(p, -vm1, vdd - vm1, vm1, w_each, l)
                - ref_id(p, -vm2, vm1 - vm2, vm2, w_each, l) - gmin * vm1)
    vm1 = bisect(f, 0.0, vdd / 2, it=120)
    return vm1, vm2_of(vm1)


def inverter_out(pn, pp, vdd, vin, w_n, w_p, gmin=GMIN, l=0.35e-6):
    """Output-node equilibrium of a CMOS inverter by 1-D bisection."""
    f = lambda vo: (ref_id(pp, vdd - vin, vdd - vo, 0.0, w_p, l)
                    - ref_id(pn, vin, vo, 0.0, w_n, l) - gmin * vo)
    return bisect(f, 0.0, vdd)
