"""Independent reference computations used by the tests.

These deliberately take a different route from the package: the leakage
is undone by inverting the normalized transform M' = (M + c)/(1 + c)
directly, and the real-axis solutions are found by scanning the phase.
"""

import math

import numpy as np


def undo_leakage(m_prime, b, phis):
    """M = M'(1 + c) - c for every leakage phase."""
    c = b / (1.0 - b) * np.exp(1j * np.asarray(phis))
    return m_prime * (1.0 + c) - c


def phi_scan_radii(r_prime, b, n=4096):
    """Real-axis radii reachable by some leakage phase, found by sign changes of Im M.

    Returns the sorted crossing radii (linear interpolation between scan
    samples). When the circle only grazes the axis between two samples the
    closest sample stands in for the tangent point.
    """
    m_prime = 1.0 - complex(r_prime)
    phis = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    m = undo_leakage(m_prime, b, phis)
    im = m.imag
    nxt = np.roll(im, -1)
    m_next = np.roll(m, -1)
    hits = []
    for i in range(n):
        if im[i] == 0.0:
            hits.append(1.0 - m[i].real)
        elif nxt[i] != 0.0 and (im[i] < 0) != (nxt[i] < 0):
            t = im[i] / (im[i] - nxt[i])
            hits.append(1.0 - (m[i].real + t * (m_next[i].real - m[i].real)))
    if not hits:
        i = int(np.argmin(np.abs(im)))
        hits.append(1.0 - m[i].real)
    return sorted(hits)


def scan_range(r_prime, b, n=4096):
    """(R_min, R_max) from the scan, with R_min clipped at zero like the closed form."""
    hits = phi_scan_radii(r_prime, b, n)
    return max(hits[0], 0.0), hits[-1]
