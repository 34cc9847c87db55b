"""Eigenvalue velocities, accelerations, and attraction forces.

With biorthonormal left/right vectors (see :mod:`eigendyn.core`) and a
simple spectrum, the eigenvalue paths of a smooth matrix family M(t) obey

    d(lambda_j)/dt   = u_j^H Mdot v_j,
    d2(lambda_j)/dt2 = u_j^H Mddot v_j
                       + 2 sum_{i != j} (u_j^H Mdot v_i)(u_i^H Mdot v_j)
                                        / (lambda_j - lambda_i).

For a real matrix the i = conj-partner summand is purely imaginary,
equal to -i |u_j^T Mdot v_j|^2 / Im(lambda_j): the attraction between an
eigenvalue and its complex conjugate, singular as the pair reaches the
real axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ConjugatePairing, SpectralDecomposition, as_square_matrix
from .errors import (
    DimensionMismatch,
    RealEigenvalue,
    SingularGap,
    ZeroSeparation,
)

__all__ = [
    "MatrixTrajectory",
    "ForceBreakdown",
    "EigenSeparation",
    "eigen_velocity",
    "eigen_acceleration",
    "conjugate_force",
    "pairwise_conjugate_summand",
    "separation",
    "circulant_acceleration",
    "dft_basis",
    "circulant_matrix",
    "circulant_eigenvalues",
]


@dataclass(frozen=True)
class MatrixTrajectory:
    """A time-parametrized matrix family with first and second derivatives.

    ``derivative_mode`` is "analytic" when derivative callables were
    supplied, else "finite-difference" with central differences of
    ``value`` at the stored step.
    """

    n: int
    value: Callable[[float], np.ndarray]
    first_derivative: Callable[[float], np.ndarray]
    second_derivative: Callable[[float], np.ndarray]
    derivative_mode: str
    fd_step: Optional[float] = None

    @staticmethod
    def from_callable(
        value: Callable[[float], np.ndarray],
        first_derivative: Optional[Callable[[float], np.ndarray]] = None,
        second_derivative: Optional[Callable[[float], np.ndarray]] = None,
        fd_step: Optional[float] = None,
        n: Optional[int] = None,
    ) -> "MatrixTrajectory":
        """Wrap callables; missing derivatives fall back to central
        differences of ``value``.

        The default steps scale with the Frobenius norm at t=0:
        1e-4 * max(1, ||M||_F) for the first derivative and a 1e-3 scale
        for the second, balancing truncation against cancellation.
        """
        m0 = as_square_matrix(value(0.0))
        dim = n if n is not None else m0.shape[0]

        if first_derivative is not None and second_derivative is not None:
            return MatrixTrajectory(dim, value, first_derivative,
                                    second_derivative, "analytic")

        scale = max(1.0, float(np.linalg.norm(m0)))
        h1 = fd_step if fd_step is not None else 1e-4 * scale
        h2 = fd_step if fd_step is not None else 1e-3 * scale

        def fd1(t: float) -> np.ndarray:
            return (value(t + h1) - value(t - h1)) / (2 * h1)

        def fd2(t: float) -> np.ndarray:
            return (value(t + h2) - 2 * value(t) + value(t - h2)) / h2**2

        return MatrixTrajectory(
            dim,
            value,
            first_derivative if first_derivative is not None else fd1,
            second_derivative if second_derivative is not None else fd2,
            "finite-difference",
            fd_step=h1,
        )

    @staticmethod
    def polynomial(a, b=None, c=None) -> "MatrixTrajectory":
        """M(t) = A + t B + t^2 C with analytic derivatives."""
        a = as_square_matrix(a)
        n = a.shape[0]
        b = as_square_matrix(b) if b is not None else np.zeros_like(a)
        c = as_square_matrix(c) if c is not None else np.zeros_like(a)
        if b.shape != a.shape or c.shape != a.shape:
            raise DimensionMismatch("polynomial coefficients must share shape")
        return MatrixTrajectory(
            n,
            lambda t: a + t * b + t * t * c,
            lambda t: b + 2 * t * c,
            lambda t: 2 * c,
            "analytic",
        )

    @staticmethod
    def constant(m) -> "MatrixTrajectory":
        return MatrixTrajectory.polynomial(m)


@dataclass(frozen=True)
class ForceBreakdown:
    """d2(lambda_j)/dt2 split into its three contributions.

    inertial        u_j^H Mddot v_j
    conjugate_term  the i = conj-partner summand (zero for self-paired or
                    when no pairing is available)
    others          the remaining i summands
    total           exact sum of the three
    """

    inertial: complex
    conjugate_term: complex
    others: complex

    @property
    def total(self) -> complex:
        return self.inertial + self.conjugate_term + self.others


@dataclass(frozen=True)
class EigenSeparation:
    """Geometric separation between two eigenvalues in the complex plane."""

    r_hat: complex  # (conj(l_i) - conj(l_j)) / |l_i - l_j|, unit modulus
    r_abs: float    # |l_i - l_j|


def _check_dim(d: SpectralDecomposition, m: np.ndarray, name: str) -> None:
    if m.shape != (d.n, d.n):
        raise DimensionMismatch(f"{name} has shape {m.shape}, expected {(d.n, d.n)}")


def eigen_velocity(d: SpectralDecomposition, mdot, j: int) -> complex:
    """d(lambda_j)/dt = u_j^H Mdot v_j."""
    mdot = as_square_matrix(mdot)
    _check_dim(d, mdot, "Mdot")
    return complex(d.left[:, j].conj() @ mdot @ d.right[:, j])


def eigen_acceleration(
    d: SpectralDecomposition,
    mdot,
    mddot,
    j: int,
    pairing: Optional[ConjugatePairing] = None,
    gap_tol: float = 1e-12,
) -> ForceBreakdown:
    """d2(lambda_j)/dt2 decomposed into inertial/conjugate/rest terms.

    When ``pairing`` is given (real-matrix runs) the conjugate-partner
    summand is isolated; otherwise it is folded into ``others``.

    Raises SingularGap when some |lambda_i - lambda_j| < gap_tol, carrying
    the offending pair.
    """
    mdot = as_square_matrix(mdot)
    mddot = as_square_matrix(mddot)
    _check_dim(d, mdot, "Mdot")
    _check_dim(d, mddot, "Mddot")
    w = d.eigenvalues
    n = d.n

    inertial = complex(d.left[:, j].conj() @ mddot @ d.right[:, j])
    jbar = int(pairing.partner[j]) if pairing is not None else -1

    # c[i] = u_i^H Mdot v_j ; r[i] = u_j^H Mdot v_i
    c = d.left.conj().T @ (mdot @ d.right[:, j])
    r = (d.left[:, j].conj() @ mdot) @ d.right

    conjugate_term = 0.0 + 0.0j
    others = 0.0 + 0.0j
    for i in range(n):
        if i == j:
            continue
        gap = w[j] - w[i]
        if abs(gap) < gap_tol:
            raise SingularGap(
                f"eigenvalue gap |lambda_{i} - lambda_{j}| = {abs(gap):.3e} "
                f"below tolerance {gap_tol}",
                pair=(i, j),
            )
        term = 2.0 * c[i] * r[i] / gap
        if i == jbar:
            conjugate_term = complex(term)
        else:
            others += term
    return ForceBreakdown(inertial=inertial, conjugate_term=conjugate_term,
                          others=complex(others))


def conjugate_force(
    d: SpectralDecomposition,
    pairing: ConjugatePairing,
    mdot,
    j: int,
    unsquared_form: bool = False,
    im_tol: float = 0.0,
) -> complex:
    """Attraction of lambda_j toward its complex conjugate.

    Default: the i = conj-partner summand of :func:`eigen_acceleration`
    (factor 2 included), which for real M and Mdot equals
    -i |u_j^T Mdot v_j|^2 / Im(lambda_j) in the biorthonormal convention.

    ``unsquared_form``: the unsquared magnitude form
    -i |u_j^T Mdot v_j| / Im(lambda_j) evaluated with *unit-normalized*
    left and right vectors (the "standard" eigenvectors); this is the
    variant whose magnitude scales as 1/Im(lambda_j) as a pair approaches
    the real axis.

    Raises RealEigenvalue when |Im(lambda_j)| <= im_tol.
    """
    mdot = as_square_matrix(mdot)
    _check_dim(d, mdot, "Mdot")
    im = d.eigenvalues[j].imag
    if abs(im) <= im_tol or im == 0.0:
        raise RealEigenvalue(
            f"lambda_{j} = {d.eigenvalues[j]} is real: conjugate force singular"
        )
    if unsquared_form:
        u = d.left[:, j] / np.linalg.norm(d.left[:, j])
        v = d.right[:, j]
        return complex(-1j * abs(u @ mdot @ v) / im)
    jbar = int(pairing.partner[j])
    if jbar == j:
        raise RealEigenvalue(f"lambda_{j} is self-paired (real)")
    w = d.eigenvalues
    num = (d.left[:, jbar].conj() @ mdot @ d.right[:, j]) * (
        d.left[:, j].conj() @ mdot @ d.right[:, jbar]
    )
    return complex(2.0 * num / (w[j] - w[jbar]))


def pairwise_conjugate_summand(
    d: SpectralDecomposition, pairing: ConjugatePairing, mdot, j: int
) -> complex:
    """Single directed force F(conj(lambda_j) -> lambda_j): the undoubled
    pairwise term.  Its expectation under random Mdot is what the
    closed-form expected-force formulas compute; the acceleration sum
    counts it twice."""
    return conjugate_force(d, pairing, mdot, j) / 2.0


def separation(lam_i: complex, lam_j: complex) -> EigenSeparation:
    """Unit direction and distance between two eigenvalues.

    r_hat = (conj(lam_i) - conj(lam_j)) / |lam_i - lam_j|; note
    r_hat / |r| = 1 / (lam_i - lam_j), which is how the geometric form of
    the acceleration reduces to the pairwise sum.
    """
    diff = complex(lam_i) - complex(lam_j)
    r_abs = abs(diff)
    if r_abs == 0.0:
        raise ZeroSeparation("coincident eigenvalues: direction undefined")
    return EigenSeparation(r_hat=diff.conjugate() / r_abs, r_abs=r_abs)


def dft_basis(n: int) -> np.ndarray:
    """Unitary DFT matrix whose columns diagonalize every circulant.

    Column m has entries exp(2i pi a m / n) / sqrt(n).
    """
    a = np.arange(n)
    return np.exp(2j * np.pi * np.outer(a, a) / n) / np.sqrt(n)


def circulant_matrix(first_row) -> np.ndarray:
    """Circulant with C[j, k] = c[(k - j) mod n]."""
    c = np.asarray(first_row, dtype=complex)
    n = len(c)
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return c[(k - j) % n]


def circulant_eigenvalues(first_row) -> np.ndarray:
    """lambda_m = sum_k c_k exp(2i pi m k / n), m = 0..n-1."""
    c = np.asarray(first_row, dtype=complex)
    n = len(c)
    m = np.arange(n)
    return np.exp(2j * np.pi * np.outer(m, np.arange(n)) / n) @ c


def circulant_acceleration(
    eigenvector_matrix,
    p,
    spectrum,
    j: int,
    gap_tol: float = 1e-12,
) -> complex:
    """Acceleration of eigenvalue j of a circulant under a diagonal
    perturbation, evaluated in the Fourier eigenbasis.

    Circulants are normal, so the DFT columns serve as both left and
    right eigenvectors (orthonormal, hence biorthonormal).  With
    Mddot = 0 the result equals the general pairwise sum

        2 sum_{i != j} |v_i^H diag(p) v_j|-type cross terms / (l_j - l_i),

    and must agree with :func:`eigen_acceleration` on the assembled
    circulant to near round-off.
    """
    v = np.asarray(eigenvector_matrix, dtype=complex)
    p = np.asarray(p, dtype=float)
    w = np.asarray(spectrum, dtype=complex)
    n = len(w)
    if v.shape != (n, n) or len(p) != n:
        raise DimensionMismatch("eigenvector matrix / perturbation size mismatch")

    pv_j = p * v[:, j]  # diag(p) v_j
    acc = 0.0 + 0.0j
    for i in range(n):
        if i == j:
            continue
        gap = w[j] - w[i]
        if abs(gap) < gap_tol:
            raise SingularGap(
                f"circulant eigenvalue gap below {gap_tol}", pair=(i, j)
            )
        c_ij = v[:, i].conj() @ pv_j          # u_i^H P v_j
        c_ji = v[:, j].conj() @ (p * v[:, i])  # u_j^H P v_i
        acc += 2.0 * c_ij * c_ji / gap
    return complex(acc)
