"""Closed-form two-emitter results used as an independent oracle.

After a quasi-instantaneous flip of the left emitter (and with zero pure
dephasing), the field arriving at each port splits into a fast ("sup") and a
slow ("sub") exponential branch,

    E_sup(t) = -i sqrt(G1 b1) (kappa + (S + G1 - G2)/2) / (sqrt(2) S)
               * exp[-(G1 + G2 + S) t / 4],
    E_sub(t) = +i sqrt(G1 b1) (kappa + (-S + G1 - G2)/2) / (sqrt(2) S)
               * exp[-(G1 + G2 - S) t / 4],

with S = sqrt(4 e^{2 i phi} G1 G2 b1 b2 + (2 i D - G1 + G2)^2) on the
principal branch (Re S >= 0, labelling "sup" as the faster branch) and
kappa = G2 b2 - i D for the right port, kappa = e^{2 i phi} G2 b2 - i D for
the left port.  D is the detuning of the *second* emitter relative to the
first; the pair convention used across this package is delta = Delta_1 -
Delta_2, so D = -delta internally (the choice is fixed by requiring exact
agreement with the no-jump propagation, see tests).

Everything here is straight double-precision formula evaluation, independent
of the numerical propagators, which is exactly why it is useful as an oracle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .units import to_angular

EXCEPTIONAL_S_TOL = 1e-6  # |S|/rate scale below this is treated as S = 0


@dataclass(frozen=True)
class TwoEmitterParams:
    """Pair parameters for the closed forms (rates in GHz, phi in radians).

    delta = Delta_1 - Delta_2 is the detuning between the two emitters.
    """

    gamma1: float
    gamma2: float
    beta1: float
    beta2: float
    delta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ConfigError("decay rates must be positive")
        for b in (self.beta1, self.beta2):
            if not 0.0 <= b <= 1.0:
                raise ConfigError("beta factors must be in [0, 1]")


@dataclass(frozen=True)
class FieldPair:
    """Super/subradiant field branches at one time, with their decay rates.

    rate_sup and rate_sub are the intensity decay rates in GHz
    (-2 Im(eigenvalue) / 2pi); total field = e_sup + e_sub.
    """

    e_sup: complex
    e_sub: complex
    rate_sup: float
    rate_sub: float
    s_param: complex
    degenerate: bool = False

    @property
    def total(self) -> complex:
        return self.e_sup + self.e_sub


def _s_parameter(p: TwoEmitterParams):
    """S and the angular-rate ingredients (g1, g2, d) of the closed form."""
    g1, g2 = to_angular(p.gamma1), to_angular(p.gamma2)
    d = to_angular(-p.delta)  # detuning of emitter 2 relative to emitter 1
    s = np.sqrt(4.0 * np.exp(2j * p.phi) * g1 * g2 * p.beta1 * p.beta2
                + (2j * d - g1 + g2)**2 + 0j)
    if s.real < 0:  # principal branch: numpy already guarantees Re >= 0
        s = -s
    return s, g1, g2, d


def closed_form_fields(p: TwoEmitterParams, port: str, t: float) -> FieldPair:
    """Evaluate the two field branches at one port and time (t in ns).

    Contract: emitter 1 starts excited by a quasi-instantaneous flip and
    dephasing is neglected.  At the exceptional point S = 0 the individual
    branches diverge while their sum stays finite; the limit is returned with
    the polynomial-in-t part split evenly and flagged as degenerate.
    """
    if port not in ("left", "right"):
        raise ConfigError(f"port must be 'left' or 'right', got {port!r}")
    s, g1, g2, d = _s_parameter(p)
    scale = max(g1, g2)
    kappa = g2 * p.beta2 - 1j * d
    if port == "left":
        kappa = np.exp(2j * p.phi) * g2 * p.beta2 - 1j * d

    pre = np.sqrt(g1 * p.beta1) / np.sqrt(2.0)
    rate_mean = g1 + g2

    if abs(s) < EXCEPTIONAL_S_TOL * scale:
        # E_tot -> pre * (1 - (kappa + (G1-G2)/2) t / 2) exp(-(G1+G2) t / 4)
        env = np.exp(-rate_mean * t / 4.0)
        total = -1j * pre * (1.0 - 0.5 * (kappa + 0.5 * (g1 - g2)) * t) * env
        half = 0.5 * total
        rate = rate_mean / 2.0 / (2.0 * np.pi)
        return FieldPair(half, half, rate, rate, s, degenerate=True)

    e_sup = -1j * pre * (kappa + 0.5 * (s + g1 - g2)) / s * np.exp(
        -(rate_mean + s) * t / 4.0)
    e_sub = +1j * pre * (kappa + 0.5 * (-s + g1 - g2)) / s * np.exp(
        -(rate_mean - s) * t / 4.0)
    rate_sup = float(np.real(rate_mean + s) / 2.0) / (2.0 * np.pi)
    rate_sub = float(np.real(rate_mean - s) / 2.0) / (2.0 * np.pi)
    return FieldPair(complex(e_sup), complex(e_sub), rate_sup, rate_sub, complex(s))


def closed_form_intensity(p: TwoEmitterParams, port: str, times) -> np.ndarray:
    """|E(t)|^2 on an array of times, photons/ns (matches port_intensity)."""
    times = np.asarray(times, dtype=float)
    return np.array([abs(closed_form_fields(p, port, t).total)**2 for t in times])


def oscillation_frequency(delta: float, j: float, gamma_mn: float):
    """Eigenvalue splitting f_osc = sqrt(delta^2 + (2 J - i Gamma_mn)^2).

    All inputs in GHz; returns (f_osc complex GHz, peak_time ns or None).
    Assumes equal single-emitter rates.  When the real part is positive
    (underdamped) the first intensity-modulation crest after the initial
    decay sits at t = pi / f_osc, i.e. 1 / (2 Re f_osc) ns.
    """
    f = np.sqrt(complex(delta)**2 + (2.0 * j - 1j * gamma_mn)**2)
    if f.real < 0:
        f = -f
    peak = 1.0 / (2.0 * f.real) if f.real > 1e-12 else None
    return f, peak


def damping_regime(delta: float, gamma_mn: float, tol: float = 1e-9) -> str:
    """Classify the J = 0 dynamics: under/over/critically damped."""
    gap = abs(delta) - abs(gamma_mn)
    if abs(gap) <= tol:
        return "critical"
    return "underdamped" if gap > 0 else "overdamped"


def approx_collective_rates(gamma_bar: float, beta: float, gamma_mn: float,
                            sigma_sd: float):
    """Collective rates with the spectral-diffusion correction, GHz.

    Gamma_sup ~= Gamma + Gamma_ij - sigma^2 / (2 beta Gamma) and Gamma_sub
    the mirror image.  Valid for sigma_sd << Gamma; a warning is emitted
    outside that window and a non-positive subradiant rate is flagged via the
    returned ``valid`` field.
    Returns (gamma_sup, gamma_sub, enhancement, valid).
    """
    if gamma_bar <= 0 or not 0 < beta <= 1:
        raise ConfigError("need gamma_bar > 0 and beta in (0, 1]")
    if sigma_sd > 0.75 * gamma_bar:
        warnings.warn("sigma_sd is not small compared to the decay rate; "
                      "the rate formula is outside its validity window",
                      stacklevel=2)
    correction = sigma_sd**2 / (2.0 * beta * gamma_bar)
    gamma_sup = gamma_bar + gamma_mn - correction
    gamma_sub = gamma_bar - gamma_mn + correction
    valid = gamma_sub > 0
    enhancement = gamma_sup / gamma_sub if valid else np.inf
    return gamma_sup, gamma_sub, enhancement, valid


def subradiant_rate_expansion(gamma: float, beta: float, phi: float,
                              delta: float) -> float:
    """Quadratic expansion of the subradiant decay rate near the dark point.

    Gamma_sub = Gamma (1 - beta) + Gamma beta phi^2 / 2
                + (2 - phi^2) delta^2 / (4 Gamma beta); valid for small phi
    and |delta| well below Gamma (warned otherwise).  GHz in, GHz out.
    """
    if gamma <= 0 or not 0 < beta <= 1:
        raise ConfigError("need gamma > 0 and beta in (0, 1]")
    if abs(phi) >= 0.5 or abs(delta) >= 0.5 * gamma:
        warnings.warn("expansion evaluated outside its validity window",
                      stacklevel=2)
    return (gamma * (1.0 - beta) + 0.5 * gamma * beta * phi**2
            + (2.0 - phi**2) * delta**2 / (4.0 * gamma * beta))
