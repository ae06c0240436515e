"""Quadratic stability matrix, closed-form principal minors and feedback-gain bounds.

For the controlled system ``V = 1/2 sum(R_i/p x_i^2 + y_i^2 + z_i^2)`` has
derivative ``-s^T A s`` with ``A`` built by :func:`build_A`.  Positive
definiteness of ``A`` (all leading principal minors positive) is therefore a
sufficient condition for global asymptotic stability, and each minor yields an
explicit lower bound on one of the gains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from thermoloop.model import COUPLING_PAIRS, SystemParams, as_gains, rhs_controlled


class ConsistencyError(ArithmeticError):
    """Minor-based and eigenvalue-based definiteness verdicts disagree."""


class PsiTriple(NamedTuple):
    psi1: float
    psi2: float
    psi3: float


class _Shorthand:
    """Recurring combinations ``gamma_ij = 1 + gamma_i + gamma_j`` and ``R_ij = R_i + R_j``."""

    def __init__(self, params: SystemParams):
        self.R1, self.R2, self.R3 = params.R
        self.g1, self.g2, self.g3 = params.gamma
        self.e1, self.e2, self.e3 = params.eta
        self.G12 = 1 + self.g1 + self.g2
        self.G13 = 1 + self.g1 + self.g3
        self.G23 = 1 + self.g2 + self.g3
        self.R12 = self.R1 + self.R2
        self.R13 = self.R1 + self.R3
        self.R23 = self.R2 + self.R3
        self.psi = psi(params)
        # the x-coupling part of the seventh minor, free of gains
        psi1 = self.psi.psi1
        self.D = (
            self.R3 * psi1 * self.G23
            - self.R12 * self.R23 * self.R13 * self.g1 * self.g2 * self.g3 / 4
            - self.R2 * self.G13 * self.R13**2 * self.g2**2 / 4
            - self.R1 * self.G12 * self.R23**2 * self.g3**2 / 4
        )


def build_A(params: SystemParams, gains) -> np.ndarray:
    """Symmetric 9x9 matrix with ``V' = -s^T A s`` along the controlled flow."""
    k = as_gains(gains)
    R = params.R
    A = np.zeros((9, 9))
    g_lap = params.momentum_laplacian
    e_lap = params.thermal_laplacian
    for i in range(3):
        xi, yi, zi = 3 * i, 3 * i + 1, 3 * i + 2
        A[xi, xi] = R[i] * (1 + g_lap[i, i])
        A[xi, yi] = A[yi, xi] = -R[i]
        A[yi, yi] = k[i]
        A[zi, zi] = 1 + e_lap[i, i]
    for (i, j), g, e in zip(COUPLING_PAIRS, params.gamma, params.eta):
        A[3 * i, 3 * j] = A[3 * j, 3 * i] = -(R[i] + R[j]) * g / 2
        A[3 * i + 2, 3 * j + 2] = A[3 * j + 2, 3 * i + 2] = -e
    return A


def psi(params: SystemParams) -> PsiTriple:
    R1, R2, R3 = params.R
    g1, g2, g3 = params.gamma
    G12, G13, G23 = 1 + g1 + g2, 1 + g1 + g3, 1 + g2 + g3
    return PsiTriple(
        R1 * R2 * (G12 * G13 - g1**2) - (R1 - R2) ** 2 * g1**2 / 4,
        R1 * R3 * (G12 * G23 - g2**2) - (R1 - R3) ** 2 * g2**2 / 4,
        R2 * R3 * (G13 * G23 - g3**2) - (R2 - R3) ** 2 * g3**2 / 4,
    )


def principal_minor(A: np.ndarray, i: int) -> float:
    """Determinant of the leading ``i x i`` block of ``A`` (LU based)."""
    if not 1 <= i <= A.shape[0]:
        raise ValueError(f"minor index must be in 1..{A.shape[0]}, got {i}")
    return float(np.linalg.det(A[:i, :i]))


def eta_factors(params: SystemParams) -> tuple[float, float, float]:
    """Determinants of the leading 1x1, 2x2 and 3x3 blocks of the thermal sub-matrix."""
    e1, e2, e3 = params.eta
    d1 = 1 + e1 + e2
    d2 = 1 + 2 * e1 + e2 + e3 + e1 * e2 + e1 * e3 + e2 * e3
    d3 = 1 + 2 * (e1 + e2 + e3) + 3 * (e1 * e2 + e1 * e3 + e2 * e3)
    return d1, d2, d3


def closed_form_minors(params: SystemParams, gains) -> np.ndarray:
    """Leading principal minors ``A_1..A_9`` from their factored expansions."""
    k1, k2, k3 = as_gains(gains)
    s = _Shorthand(params)
    psi1, psi2, psi3 = s.psi
    R1, R2, R3 = s.R1, s.R2, s.R3
    d1, d2, d3 = eta_factors(params)

    a2 = R1 * k1 * s.G12 - R1**2
    a4 = psi1 * k1 - R1**2 * R2 * s.G13
    a5 = k2 * a4 - R1 * R2**2 * (s.G12 * k1 - R1)
    a7 = (
        k2 * (k1 * s.D - R1**2 * psi3)
        - R2**2 * psi2 * k1
        + R1**2 * R2**2 * R3 * s.G23
    )
    A = np.empty(9)
    A[0] = R1 * s.G12
    A[1] = a2
    A[2] = d1 * a2
    A[3] = d1 * a4
    A[4] = d1 * a5
    A[5] = d2 * a5
    A[6] = d2 * a7
    A[7] = k3 * A[6] - R3**2 * A[5]
    A[8] = d3 / d2 * A[7]
    return A


@dataclass
class GainBounds:
    """Lower bounds on the gains with every intermediate value exposed.

    ``K1`` is a number; ``K2_of(k1)`` and ``K3_of(k1, k2)`` depend on the
    gains already chosen.  ``failures`` names the expressions whose
    positivity assumption does not hold; when non-empty the bounds are not
    certified.
    """

    params: SystemParams
    K1: float
    components: dict[str, float]
    denominators: dict[str, float]
    psi: PsiTriple
    failures: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.failures

    def K2_of(self, k1: float) -> float:
        return max(self.k2_terms(k1).values())

    def k2_terms(self, k1: float) -> dict[str, float]:
        s = _Shorthand(self.params)
        psi1, psi2, psi3 = s.psi
        R1, R2, R3 = s.R1, s.R2, s.R3
        via_a5 = R1 * R2**2 * (s.G12 * k1 - R1) / (k1 * psi1 - R1**2 * R2 * s.G13)
        via_a7 = (R2**2 * psi2 * k1 - R1**2 * R2**2 * R3 * s.G23) / (k1 * s.D - R1**2 * psi3)
        return {"A5": via_a5, "A7": via_a7}

    def k2_denominators(self, k1: float) -> dict[str, float]:
        s = _Shorthand(self.params)
        return {
            "A5": k1 * s.psi.psi1 - s.R1**2 * s.R2 * s.G13,
            "A7": k1 * s.D - s.R1**2 * s.psi.psi3,
        }

    def K3_of(self, k1: float, k2: float) -> float:
        num, den = self._k3_parts(k1, k2)
        return num / den

    def k3_denominator(self, k1: float, k2: float) -> float:
        return self._k3_parts(k1, k2)[1]

    def k3_flipped_sign(self, k1: float, k2: float) -> float:
        """The k3 bound with the sign of the gain-free denominator term flipped.

        This variant disagrees with ``A_8 = k3 A_7 - R3^2 A_6``; it is kept
        only for comparison in diagnostics.
        """
        s = _Shorthand(self.params)
        num, den = self._k3_parts(k1, k2)
        return num / (den - 2 * s.R1**2 * s.R2**2 * s.R3 * s.G23)

    def _k3_parts(self, k1, k2):
        s = _Shorthand(self.params)
        psi1, psi2, psi3 = s.psi
        R1, R2, R3 = s.R1, s.R2, s.R3
        num = R3**2 * (psi1 * k1 * k2 - R1**2 * R2 * k2 * s.G13 - R1 * R2**2 * (s.G12 * k1 - R1))
        den = (
            k1 * k2 * s.D
            - k1 * R2**2 * psi2
            - k2 * R1**2 * psi3
            + R1**2 * R2**2 * R3 * s.G23
        )
        return num, den

    def compose(self, margin: float = 1.01) -> np.ndarray:
        """Gains ``k1 = margin K1``, ``k2 = margin K2(k1)``, ``k3 = margin K3(k1, k2)``."""
        k1 = margin * self.K1
        k2 = margin * self.K2_of(k1)
        k3 = margin * self.K3_of(k1, k2)
        return np.array([k1, k2, k3])

    def check(self, gains) -> list[str]:
        """Names of the bounds the given gains fail to exceed (empty when all hold)."""
        k1, k2, k3 = as_gains(gains)
        bad = [f"k1 <= {n}" for n, v in self.components.items() if not k1 > v]
        if not bad:
            bad += [f"k2 <= {n}" for n, v in self.k2_terms(k1).items() if not k2 > v]
            bad += [f"k2 denominator {n} <= 0" for n, v in self.k2_denominators(k1).items() if not v > 0]
        if not bad:
            if not self.k3_denominator(k1, k2) > 0:
                bad.append("k3 denominator <= 0")
            elif not k3 > self.K3_of(k1, k2):
                bad.append("k3 <= A8")
        return bad


def gain_bounds(params: SystemParams) -> GainBounds:
    """Evaluate the k1 bounds and prepare the gain-dependent k2/k3 bounds."""
    s = _Shorthand(params)
    psi1, psi2, psi3 = s.psi
    R1, R2, R3 = s.R1, s.R2, s.R3
    failures = [f"psi{i} = {v:.6g} <= 0" for i, v in enumerate(s.psi, 1) if not v > 0]

    a4_den = R1 * R2 * s.G12 * s.G13 - s.R12**2 * s.g1**2 / 4
    a7_num = R1**2 * (R2 * R3 * s.G13 * s.G23 - s.R23**2 * s.g3**2 / 4)
    denominators = {"A2": s.G12, "A4": a4_den, "A7": s.D}
    for name, den in denominators.items():
        if not den > 0:
            failures.append(f"denominator of {name} = {den:.6g} <= 0")
    components = {
        "A2": R1 / s.G12,
        "A4": R1**2 * R2 * s.G13 / a4_den if a4_den else np.inf,
        "A7": a7_num / s.D if s.D else np.inf,
    }
    K1 = max(components.values()) if not failures else float("nan")
    return GainBounds(params, K1, components, denominators, s.psi, failures)


@dataclass(frozen=True)
class Definiteness:
    positive_definite: bool
    minors: np.ndarray
    min_eigenvalue: float
    witness_minor: int | None

    @property
    def witness(self) -> str | None:
        if self.positive_definite:
            return None
        if self.witness_minor is not None:
            return f"A_{self.witness_minor} = {self.minors[self.witness_minor - 1]:.6g} <= 0"
        return f"lambda_min = {self.min_eigenvalue:.6g} <= 0"


def is_positive_definite(A: np.ndarray, rtol: float = 1e-8) -> Definiteness:
    """Sylvester-criterion verdict, cross-checked against the smallest eigenvalue."""
    A = np.asarray(A, dtype=float)
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix is not symmetric")
    n = A.shape[0]
    minors = np.array([principal_minor(A, i) for i in range(1, n + 1)])
    bad = np.flatnonzero(minors <= 0)
    by_minors = bad.size == 0
    lam = float(np.linalg.eigvalsh(A)[0])
    tol = rtol * np.linalg.norm(A, 2)
    if (by_minors and lam < -tol) or (not by_minors and lam > tol):
        raise ConsistencyError(
            f"minor test says {'PD' if by_minors else 'not PD'} but lambda_min = {lam:.6g}"
        )
    witness = None if by_minors else int(bad[0]) + 1
    return Definiteness(by_minors, minors, lam, witness)


def lyapunov_V(params: SystemParams, s) -> float:
    s = np.asarray(s, dtype=float)
    X, Y, Z = s[0::3], s[1::3], s[2::3]
    return 0.5 * float(np.sum(params.R_arr / params.p * X**2 + Y**2 + Z**2))


def lyapunov_gradient(params: SystemParams, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    g = s.copy()
    g[0::3] *= params.R_arr / params.p
    return g


def lyapunov_Vdot(params: SystemParams, gains, s) -> float:
    """``V'`` along the controlled flow, evaluated as ``-s^T A s``."""
    s = np.asarray(s, dtype=float)
    return -float(s @ build_A(params, gains) @ s)


def lyapunov_Vdot_direct(params: SystemParams, gains, s) -> float:
    """``grad V . f(s)``, the independent route to :func:`lyapunov_Vdot`."""
    return float(lyapunov_gradient(params, s) @ rhs_controlled(params, gains, s))
