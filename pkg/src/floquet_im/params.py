"""Model parameters for the brick-wall Floquet XXZ influence-matrix toolkit.

Conventions used throughout the package:

* ``eta`` is the anisotropy parameter of the two-site gate; the free-fermion
  point is ``eta = i*pi/2``.
* ``u`` is the gate spectral parameter (one Floquet half-step corresponds to
  the two-site gate built from an R-matrix evaluated at ``u``).
* ``q_weight`` parametrizes the diagonal single-site density matrix
  ``diag(q, 1/q) / (q + 1/q)`` assigned to every bath site initially.
* ``n_half`` is the number of Floquet periods ``N``; an influence matrix for
  ``N`` periods lives on ``2*N`` forward and ``2*N`` backward spins, i.e. on
  ``4*N`` qubit legs.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

from .errors import PoleError

#: half the gate-pole exclusion radius used by the constructors below
POLE_TOL = 1e-14

#: tolerance for detecting the free-fermion point eta = i*pi/2
FREE_FERMION_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Frozen parameter bundle validated against gate poles on construction.

    Raises
    ------
    PoleError
        if ``sinh(eta)``, ``sinh(u + eta)`` or ``q + 1/q`` vanish to within
        ``POLE_TOL`` (degenerate gate or initial weight), or ``q_weight <= 0``.
    ValueError
        if ``n_half < 1``.
    """

    eta: complex
    u: complex
    q_weight: float = 1.0
    n_half: int = 1
    epsilon: float | None = None
    precision_digits: int | None = None

    def __post_init__(self) -> None:
        if self.n_half < 1:
            raise ValueError(f"n_half must be >= 1, got {self.n_half}")
        if not (self.q_weight > 0.0):
            raise PoleError(f"q_weight must be positive, got {self.q_weight}")
        for label, w in (("sinh(eta)", self.eta), ("sinh(u+eta)", self.u + self.eta)):
            if abs(cmath.sinh(w)) < POLE_TOL:
                raise PoleError(f"{label} vanishes: gate is singular at these parameters")
        if abs(self.q_weight + 1.0 / self.q_weight) < POLE_TOL:
            raise PoleError("q + 1/q vanishes; initial site weight undefined")

    @property
    def is_free_fermion(self) -> bool:
        """True when eta sits on the free-fermion point i*pi/2."""
        return abs(complex(self.eta) - 0.5j * cmath.pi) < FREE_FERMION_TOL

    @property
    def n_legs(self) -> int:
        """Number of qubit legs of the influence matrix (forward + backward)."""
        return 4 * self.n_half

    def boundary_rho(self) -> "tuple[float, float]":
        """Diagonal of the single-site initial density matrix (p_up, p_down)."""
        q = self.q_weight
        z = q + 1.0 / q
        return (q / z, 1.0 / (q * z))
