"""Figures of merit from simulated waveforms: propagation delay, average and
static power, and output swing, plus a one-call characterization report.

Delay is measured between 50% crossings, each waveform against the midpoint
of its own swing (input and output live in different voltage domains).
Input edges pair 1:1 with output transitions in time order; because a
receiving stage's switching threshold can sit far from the input midpoint,
the output's crossing may precede the input's and a delay may come out
slightly negative.  The first input edge of each polarity is treated as
startup and excluded from the averages.

Average power integrates the power delivered by every source (the stimulus
delivers real energy too) with trapezoidal quadrature over a whole number of
stimulus periods.  Static power pins pulse sources at one of their two
levels, solves DC, and excludes the synthetic gmin currents, leaving device
dissipation only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .devmodel import SourceWave
from .engine import (GMIN_DEFAULT, SolveOptions, Waveforms,
                     dc_operating_point, transient)
from .netlist import Circuit


class MeasureError(RuntimeError):
    pass


def _crossings(t, w, level):
    """(time, direction) for each crossing of level, linearly interpolated."""
    s = np.asarray(w, dtype=float) - level
    rise = (s[:-1] < 0) & (s[1:] >= 0)
    fall = (s[:-1] > 0) & (s[1:] <= 0)
    out = []
    for i in np.nonzero(rise | fall)[0]:
        tc = t[i] - s[i] * (t[i + 1] - t[i]) / (s[i + 1] - s[i])
        out.append((float(tc), 1 if rise[i] else -1))
    return out


def propagation_delay(in_wave, out_wave, t, in_levels=None, out_levels=None):
    """Per-direction propagation delays from 50% crossings.

    in_levels / out_levels are (lo, hi) tuples; by default each waveform's
    own min/max.  Returns {"delay_rise": s, "delay_fall": s}, keyed by the
    input edge direction and averaged over all measured edges.
    """
    in_wave = np.asarray(in_wave, dtype=float)
    out_wave = np.asarray(out_wave, dtype=float)
    ilo, ihi = in_levels if in_levels is not None else (in_wave.min(), in_wave.max())
    olo, ohi = out_levels if out_levels is not None else (out_wave.min(), out_wave.max())
    in_edges = _crossings(t, in_wave, 0.5 * (ilo + ihi))
    out_times = [tc for tc, _ in _crossings(t, out_wave, 0.5 * (olo + ohi))]

    delays = {1: [], -1: []}
    seen = {1: 0, -1: 0}
    op = 0
    for j, (ti, d) in enumerate(in_edges):
        t_next = in_edges[j + 1][0] if j + 1 < len(in_edges) else math.inf
        if op >= len(out_times) and j == len(in_edges) - 1:
            break  # response to the final edge truncated by the record end
        if op >= len(out_times) or out_times[op] >= t_next:
            kind = "rising" if d > 0 else "falling"
            raise MeasureError(
                f"no output transition for the {kind} input edge at {ti:.6g} s"
            )
        seen[d] += 1
        if seen[d] > 1:  # first edge of each polarity is startup
            delays[d].append(out_times[op] - ti)
        op += 1
    if not delays[1] or not delays[-1]:
        raise MeasureError(
            "need at least two input edges of each polarity (the first is "
            "excluded as startup)"
        )
    return {
        "delay_rise": float(np.mean(delays[1])),
        "delay_fall": float(np.mean(delays[-1])),
    }


def _window_integral(t, y, t0, t1):
    y0 = float(np.interp(t0, t, y))
    y1 = float(np.interp(t1, t, y))
    i0 = int(np.searchsorted(t, t0, side="right"))
    i1 = int(np.searchsorted(t, t1, side="left"))
    ts = np.concatenate(([t0], t[i0:i1], [t1]))
    ys = np.concatenate(([y0], y[i0:i1], [y1]))
    return float(np.trapezoid(ys, ts))


def source_power(waves: Waveforms, supplies=None) -> np.ndarray:
    """Instantaneous power delivered by the named sources (all by default)."""
    names = list(supplies) if supplies is not None else list(waves.supply_i)
    p = np.zeros_like(waves.t)
    for nm in names:
        try:
            ib = waves.supply_i[nm]
        except KeyError:
            raise MeasureError(f"no source named {nm!r} in waveforms") from None
        pn, mn = waves.source_nodes[nm]
        vs = (waves.node_v[pn] if pn != "0" else 0.0) - (
            waves.node_v[mn] if mn != "0" else 0.0
        )
        p = p + vs * (-ib)  # branch current is into the + terminal
    return p


def average_power(waves: Waveforms, supplies, window) -> float:
    """Mean delivered power over window=(t0, t1), trapezoidal quadrature.

    The gmin shunt dissipation is numerical, not physical, and is removed
    (exact when supplies covers every source, as the default None does)."""
    t = waves.t
    t0, t1 = window
    if t0 < t[0] or t1 > t[-1] or t0 >= t1:
        raise MeasureError(
            f"window [{t0:.6g}, {t1:.6g}] s outside simulated range "
            f"[{t[0]:.6g}, {t[-1]:.6g}] s"
        )
    p = source_power(waves, supplies)
    for v in waves.node_v.values():
        p = p - waves.gmin * v * v
    return _window_integral(t, p, t0, t1) / (t1 - t0)


def static_power(circuit: Circuit, input_state: str,
                 opts: SolveOptions | None = None) -> float:
    """DC power with every pulse source pinned at its lo (v1) or hi (v2)
    level.  The gmin currents are numerical, not physical, and are excluded."""
    if input_state not in ("lo", "hi"):
        raise ValueError(f"input_state must be 'lo' or 'hi', got {input_state!r}")
    pinned_sources = [
        replace(s, wave=SourceWave("dc", s.wave.v1 if input_state == "lo" else s.wave.v2))
        if s.wave.kind == "pulse" else s
        for s in circuit.sources
    ]
    pinned = replace(circuit, sources=pinned_sources)
    op = dc_operating_point(pinned, opts)
    v = op.state.v
    total = 0.0
    for k, s in enumerate(pinned.sources):
        vs = (v[s.p] if s.p >= 0 else 0.0) - (v[s.m] if s.m >= 0 else 0.0)
        total += vs * (-float(op.state.i_branch[k]))
    return total - GMIN_DEFAULT * float(np.dot(v, v))


def output_swing(out_wave, t, settle):
    """Settled low/high output levels as (swing_lo, swing_hi).

    The waveform's own 50% crossings delimit state windows; samples inside
    [crossing + settle, next crossing) are pooled per state and the medians
    reported.  A state with no window of at least 10 samples is an error.
    """
    w = np.asarray(out_wave, dtype=float)
    edges = _crossings(t, w, 0.5 * (w.min() + w.max()))
    pools = {"hi": [], "lo": []}
    for j, (te, d) in enumerate(edges):
        end = edges[j + 1][0] if j + 1 < len(edges) else math.inf
        mask = (t >= te + settle) & (t < end)
        if int(np.count_nonzero(mask)) >= 10:
            pools["hi" if d > 0 else "lo"].append(w[mask])
    for state in ("lo", "hi"):
        if not pools[state]:
            raise MeasureError(
                f"no settled window of at least 10 samples for the {state} state"
            )
    return (
        float(np.median(np.concatenate(pools["lo"]))),
        float(np.median(np.concatenate(pools["hi"]))),
    )


@dataclass(frozen=True)
class Report:
    circuit_name: str
    power_avg: float
    power_static_lo: float
    power_static_hi: float
    delay_rise: float
    delay_fall: float
    delay_max: float
    swing_lo: float
    swing_hi: float


def _stimulus_period(circuit: Circuit) -> float:
    for s in circuit.sources:
        if s.wave.kind == "pulse":
            return s.wave.per
    raise MeasureError("circuit has no pulse stimulus source")


def characterize(circuit: Circuit, tstep: float | None = None,
                 tstop: float | None = None, in_node: str = "in",
                 out_node: str = "out", scheme: str = "trap",
                 waves: Waveforms | None = None,
                 opts: SolveOptions | None = None) -> Report:
    """Simulate (or reuse `waves`) and extract the full report.

    Average power integrates complete stimulus periods from the second one
    on; the settle margin for swing extraction is 20% of the period.
    """
    if waves is None:
        if tstep is None or tstop is None:
            tr = circuit.tran
            if tr is None:
                raise ValueError("no timestep given and the netlist has no .tran")
            tstep = tstep if tstep is not None else tr.tstep
            tstop = tstop if tstop is not None else tr.tstop
        waves = transient(circuit, tstep, tstop, scheme=scheme, opts=opts)
    per = _stimulus_period(circuit)
    n_per = int(math.floor(waves.t[-1] / per + 1e-9))
    if n_per < 2:
        raise MeasureError(
            f"simulation covers {n_per} stimulus period(s); need at least 2"
        )
    for node in (in_node, out_node):
        if node not in waves.node_v:
            raise MeasureError(f"no node named {node!r} in waveforms")
    vin = waves.node_v[in_node]
    vout = waves.node_v[out_node]
    delays = propagation_delay(vin, vout, waves.t)
    p_avg = average_power(waves, None, (per, n_per * per))
    s_lo, s_hi = output_swing(vout, waves.t, 0.2 * per)
    return Report(
        circuit_name=circuit.title,
        power_avg=p_avg,
        power_static_lo=static_power(circuit, "lo", opts),
        power_static_hi=static_power(circuit, "hi", opts),
        delay_rise=delays["delay_rise"],
        delay_fall=delays["delay_fall"],
        delay_max=max(delays["delay_rise"], delays["delay_fall"]),
        swing_lo=s_lo,
        swing_hi=s_hi,
    )
