"""Units convention used throughout the package.

All user-facing rates and detunings are *linear* frequencies nu = omega/(2 pi)
in GHz, matching how such numbers are usually quoted (e.g. "Gamma/2pi = 0.79
GHz").  Time is in nanoseconds.  Internal dynamical calculations use angular
rates omega = 2 pi nu in rad/ns, so that exp(-i H t) needs no extra factors.

GHz and rad/ns are numerically compatible: 1 GHz (linear) = 2 pi rad/ns.
"""

import math

TWO_PI = 2.0 * math.pi

#: Bohr magneton over Planck constant, in GHz per tesla.
MU_B_GHZ_PER_T = 13.996

#: Photonic-crystal lattice constant of the waveguide samples, in nm.
LATTICE_CONSTANT_NM = 240.0

#: Effective wavenumber times lattice constant near the band edge.
BAND_EDGE_KA = math.pi

#: Detector response presets (Gaussian FWHM in ns).
IRF_FWHM_SNSPD_NS = 0.2
IRF_FWHM_APD_NS = 0.04


def to_angular(nu_ghz):
    """Linear frequency in GHz -> angular rate in rad/ns."""
    return TWO_PI * nu_ghz


def to_linear(omega_rad_ns):
    """Angular rate in rad/ns -> linear frequency in GHz."""
    return omega_rad_ns / TWO_PI
