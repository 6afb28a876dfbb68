"""Material data for the transmission problem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Medium"]


@dataclass(frozen=True)
class Medium:
    """Exterior/interior permittivity and permeability at frequency omega.

    eps_plus, mu_plus and mu_minus are positive reals; eps_minus may be
    complex.  Wavenumbers use the principal square root so Im k >= 0.
    The analyzed-regime flag is true iff Re eps_minus >= 0, Im eps_minus >= 0
    and eps_minus != 0; other (plasmonic) parameters are accepted with the
    flag false and no stability guarantee.
    """

    eps_plus: float = 1.0
    eps_minus: complex = 1.0 + 0.0j
    mu_plus: float = 1.0
    mu_minus: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        if self.eps_plus <= 0 or self.mu_plus <= 0 or self.mu_minus <= 0:
            raise ValueError("eps_plus, mu_plus, mu_minus must be positive")
        if self.eps_minus == 0:
            raise ValueError("eps_minus must be nonzero")
        if self.omega < 0:
            raise ValueError("omega must be >= 0")

    @property
    def k_plus(self) -> float:
        return self.omega * np.sqrt(self.mu_plus * self.eps_plus)

    @property
    def k_minus(self) -> complex:
        k = self.omega * np.sqrt(complex(self.mu_minus) * self.eps_minus)
        if k.imag < 0:
            k = -k
        return k

    @property
    def refractive_index(self) -> complex:
        nu = np.sqrt(complex(self.mu_minus) * self.eps_minus
                     / (self.mu_plus * self.eps_plus))
        if nu.imag < 0:
            nu = -nu
        return nu

    @property
    def analyzed_regime(self) -> bool:
        e = complex(self.eps_minus)
        return e != 0 and e.real >= 0 and e.imag >= 0

    @classmethod
    def from_refractive_index(cls, nu: complex, omega: float,
                              eps_plus: float = 1.0, mu_plus: float = 1.0,
                              mu_minus: float = 1.0) -> "Medium":
        """Medium with the requested refractive index (permittivity contrast)."""
        nu = complex(nu)
        eps_minus = nu**2 * mu_plus * eps_plus / mu_minus
        return cls(eps_plus=eps_plus, eps_minus=eps_minus, mu_plus=mu_plus,
                   mu_minus=mu_minus, omega=omega)

    def with_omega(self, omega: float) -> "Medium":
        return Medium(eps_plus=self.eps_plus, eps_minus=self.eps_minus,
                      mu_plus=self.mu_plus, mu_minus=self.mu_minus, omega=omega)
