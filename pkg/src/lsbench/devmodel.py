"""Continuous MOSFET equations, lumped capacitances, and source waveforms.

The drain current uses a single charge-interpolation expression that is valid
from deep subthreshold through strong inversion:

    q(u)  = ln(1 + exp(u / (2 n VT)))
    id    = ispec * (q(vgs - vte)^2 - q(vgs - vte - n vds)^2) * (1 + lambda vds)
    ispec = 2 n kp (W/L) VT^2

with the effective threshold

    vte = vth0 + gamma (sqrt(phi + vsb) - sqrt(phi)) - eta vds

so drain-induced barrier lowering and body bias enter the exponent.  In
subthreshold this collapses to id ~ ispec exp((vgs-vte)/(n VT)), giving an
n*VT*ln10 swing per decade; in strong inversion q(u) -> u/(2 n VT) recovers
the square-law kp/(2n) (W/L) (vgs-vte)^2 asymptote.

Biases are normalized before evaluation: PMOS devices are handled by
reflecting all terminal voltages (the equations below are polarity-blind),
and drain/source are swapped so vds >= 0.  Derivatives gm, gds, gmb are exact
analytic partials of the expression above, including the vte dependence on
vds and vsb.  gmb is the partial with respect to -vsb (positive for normal
body bias).

Capacitances are bias-independent lumps:

    cgs = cgd = 0.5 cox_a W L + cov_w W        cdb = csb = cj_w W
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VT = 0.025852  # thermal voltage kT/q at 300 K, volts
_QCLAMP = 40.0  # exp-argument clamp; beyond it q(u) is exactly its asymptote


@dataclass(frozen=True)
class MosParams:
    """Process parameters for one device polarity.  vth0 is stored positive
    for both polarities (reflection handles sign)."""

    polarity: str  # "nmos" | "pmos"
    vth0: float
    kp: float          # A/V^2, mobility * oxide capacitance
    n_slope: float     # subthreshold slope factor
    lam: float         # 1/V, channel-length modulation
    eta_dibl: float    # V/V, drain-induced barrier lowering
    gamma_body: float  # sqrt(V), body-effect coefficient
    phi_s: float       # V, surface potential
    cox_a: float = 4.6e-3   # F/m^2, gate oxide capacitance per area
    cov_w: float = 1.2e-10  # F/m, gate overlap capacitance per width
    cj_w: float = 9e-10     # F/m, junction capacitance per width


# Default 0.35 um-class parameter set.  Chosen so that the bundled shifter
# topologies switch with the widths and rails they are generated with; fully
# overridable per-netlist via .model cards (see resolve_model_keys).
DEFAULT_NMOS = MosParams(
    polarity="nmos", vth0=0.50, kp=190e-6, n_slope=1.35,
    lam=0.06, eta_dibl=0.03, gamma_body=0.58, phi_s=0.8,
)
DEFAULT_PMOS = MosParams(
    polarity="pmos", vth0=0.95, kp=48e-6, n_slope=1.5,
    lam=0.05, eta_dibl=0.03, gamma_body=0.45, phi_s=0.8,
)

_MODEL_KEYS = {
    "VTH0": "vth0",
    "KP": "kp",
    "N": "n_slope",
    "LAMBDA": "lam",
    "ETA": "eta_dibl",
    "GAMMA": "gamma_body",
    "PHI": "phi_s",
    "COXA": "cox_a",
    "COVW": "cov_w",
    "CJW": "cj_w",
}


def resolve_model_keys(key: str) -> str:
    """Map a .model card key (VTH0, KP, N, ...) to its MosParams field name.
    Raises KeyError for unknown keys."""
    return _MODEL_KEYS[key.upper()]


def model_key_for(field_name: str) -> str:
    for k, v in _MODEL_KEYS.items():
        if v == field_name:
            return k
    raise KeyError(field_name)


def default_params(polarity: str) -> MosParams:
    if polarity.lower() == "nmos":
        return DEFAULT_NMOS
    if polarity.lower() == "pmos":
        return DEFAULT_PMOS
    raise ValueError(f"unknown polarity {polarity!r}")


@dataclass(frozen=True)
class MosBias:
    """Source-referenced bias after polarity reflection and drain/source
    swap normalization (vds >= 0 for normal use; the equations stay smooth
    for slightly negative vds, which finite-difference probes rely on)."""

    vgs: float
    vds: float
    vsb: float = 0.0


@dataclass(frozen=True)
class MosEval:
    id: float   # A, drain -> source
    gm: float   # S, d id / d vgs
    gds: float  # S, d id / d vds
    gmb: float  # S, d id / d (-vsb)


def effective_vth(p: MosParams, vds: float = 0.0, vsb: float = 0.0) -> float:
    """Threshold shifted by body bias and DIBL.  vsb is clamped below at
    -phi_s/2 so the square root stays real."""
    vsb_c = max(vsb, -0.5 * p.phi_s)
    return p.vth0 + p.gamma_body * (math.sqrt(p.phi_s + vsb_c) - math.sqrt(p.phi_s)) - p.eta_dibl * vds


def _q_sigma(x):
    """q(x) = ln(1+exp(x)) and its logistic derivative, with the positive
    branch clamped at x = 40 where q(x) = x to machine precision.  The
    derivative uses the identity sigma = 1 - exp(-q), exact in both branches."""
    x = np.asarray(x, dtype=float)
    # asarray again: ufuncs collapse 0-d inputs to scalars, copyto needs an array
    q = np.asarray(np.log1p(np.exp(np.minimum(x, _QCLAMP))))
    np.copyto(q, x, where=x > _QCLAMP)
    return q, 1.0 - np.exp(-q)


def _core_eval(vgs, vds, vsb, vth0, n, kp, lam, eta, gamma, phi, w, l,
               a=None, ispec=None):
    """Vectorized current and exact partials in the normalized frame.

    Returns (id, gm, gds, gmb) as arrays broadcast over the inputs.  All vte
    dependencies (body effect on vsb, DIBL on vds) are differentiated, so a
    central-difference probe of id agrees with gm/gds/gmb to roundoff.
    Callers in the hot path may pass precomputed a = 1/(2 n VT) and
    ispec = 2 n kp (w/l) VT^2.
    """
    vsb_c = np.maximum(vsb, -0.5 * phi)
    sphi = np.sqrt(phi + vsb_c)
    vte = vth0 + gamma * (sphi - np.sqrt(phi)) - eta * vds
    if a is None:
        a = 1.0 / (2.0 * n * VT)
    if ispec is None:
        ispec = 2.0 * n * kp * (w / l) * VT * VT
    uf = (vgs - vte) * a
    ur = uf - vds / (2.0 * VT)  # a * n * vds
    qf, sf = _q_sigma(uf)
    qr, sr = _q_sigma(ur)
    qq = qf * qf - qr * qr
    mlam = 1.0 + lam * vds
    idrain = ispec * qq * mlam
    common = ispec * mlam * 2.0 * a
    fs = qf * sf
    rs = qr * sr
    gm = common * (fs - rs)
    gds = common * (fs * eta - rs * (eta - n)) + ispec * lam * qq
    dvte_dvsb = np.where(vsb > -0.5 * phi, gamma / (2.0 * sphi), 0.0)
    gmb = gm * dvte_dvsb
    return idrain, gm, gds, gmb


def mosfet_eval(p: MosParams, bias: MosBias, w: float, l: float) -> MosEval:
    """Evaluate drain current and conductances at one normalized bias point.

    The caller owns polarity reflection and drain/source swapping; given the
    same parameter values, NMOS and PMOS evaluate identically here.
    """
    idr, gm, gds, gmb = _core_eval(
        bias.vgs, bias.vds, bias.vsb,
        p.vth0, p.n_slope, p.kp, p.lam, p.eta_dibl, p.gamma_body, p.phi_s, w, l,
    )
    return MosEval(float(idr), float(gm), float(gds), float(gmb))


@dataclass(frozen=True)
class MosCaps:
    cgs: float
    cgd: float
    cdb: float
    csb: float


def mosfet_caps(p: MosParams, w: float, l: float) -> MosCaps:
    """Bias-independent lumped capacitances for one device."""
    cg = 0.5 * p.cox_a * w * l + p.cov_w * w
    cj = p.cj_w * w
    return MosCaps(cgs=cg, cgd=cg, cdb=cj, csb=cj)


# --------------------------------------------------------------------------
# independent sources


@dataclass(frozen=True)
class SourceWave:
    """DC value or periodic pulse.  For pulses: v1 until td, then per period:
    linear rise to v2 over tr, hold pw, linear fall to v1 over tf, v1 for the
    rest of the period."""

    kind: str  # "dc" | "pulse"
    v1: float
    v2: float = 0.0
    td: float = 0.0
    tr: float = 0.0
    tf: float = 0.0
    pw: float = 0.0
    per: float = 0.0


def source_value(wave: SourceWave, t: float) -> float:
    """Instantaneous source voltage at time t (t in seconds, >= 0)."""
    if wave.kind == "dc":
        return wave.v1
    if t < wave.td:
        return wave.v1
    tau = math.fmod(t - wave.td, wave.per)
    if tau < wave.tr:
        return wave.v1 + (wave.v2 - wave.v1) * tau / wave.tr
    tau -= wave.tr
    if tau < wave.pw:
        return wave.v2
    tau -= wave.pw
    if tau < wave.tf:
        return wave.v2 + (wave.v1 - wave.v2) * tau / wave.tf
    return wave.v1
