"""Photon-number statistics of a passively switched two-laser decoy source.

Two phase-randomized weak coherent pulses with mean photon numbers ``mu1``
and ``mu2`` interfere on a beam splitter of transmittance ``t``.  At a fixed
relative phase ``theta`` the two output modes carry independent Poissonian
photon numbers with means ``nu * gamma(theta)`` and ``nu * (1 - gamma(theta))``,
where ``nu = mu1 + mu2``; averaging over the uniform phase yields the
correlated, super-Poissonian joint distribution computed here.

A threshold detector monitoring the second output splits the emitted pulses
into a "click" and a "no-click" branch whose conditional photon-number
distributions differ, which is what makes the source usable for decoy-state
estimation.  An ``overlap`` factor in [0, 1] scales the interference
amplitude to model partially distinguishable pulses; ``overlap = 0``
factorizes the joint distribution, ``overlap = 1`` is perfect mode overlap.

All phase integrals use the composite midpoint rule, which converges
spectrally for these smooth periodic integrands; all factorials are taken in
log space so photon numbers up to the hard cap of 60 stay finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ParameterError, TruncationError

PHOTON_NUMBER_CAP = 60
DEFAULT_N_MAX = 20
DEFAULT_THETA_NODES = 256
DEFAULT_TAIL_TOL = 1e-12


def _check_unit_interval(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must be within [0, 1] (got {value})")


def _check_nonnegative(name: str, value: float) -> None:
    if not value >= 0.0:
        raise ParameterError(f"{name} must be >= 0 (got {value})")


@dataclass(frozen=True, slots=True)
class PulsePairParams:
    """Source-side physics of one pulse pair.

    Args:
        mu1: mean photon number of the first laser (>= 0).
        mu2: mean photon number of the second laser (>= 0).
        t: beam-splitter transmittance, in [0, 1].
        overlap: interference mode-overlap factor, in [0, 1]; 1 means
            perfectly indistinguishable pulses.
    """

    mu1: float
    mu2: float
    t: float
    overlap: float = 1.0

    def __post_init__(self) -> None:
        _check_nonnegative("mu1", self.mu1)
        _check_nonnegative("mu2", self.mu2)
        _check_unit_interval("t", self.t)
        _check_unit_interval("overlap", self.overlap)
        # AM-GM guarantees |xi| <= min(mode means) <= nu for in-range inputs.
        assert self.xi <= self.nu + 1e-15

    @property
    def nu(self) -> float:
        """Total mean photon number of the pair."""
        return self.mu1 + self.mu2

    @property
    def xi(self) -> float:
        """Interference amplitude, already scaled by the mode overlap."""
        return 2.0 * self.overlap * math.sqrt(self.mu1 * self.mu2 * self.t * (1.0 - self.t))

    @property
    def mean_mode_a(self) -> float:
        """Phase-averaged mean photon number of the kept output mode."""
        return self.mu1 * self.t + self.mu2 * (1.0 - self.t)

    def kernel(self) -> "InterferenceKernel":
        if self.nu <= 0.0:
            raise ParameterError("vacuum source has no interference kernel")
        return InterferenceKernel(nu=self.nu, xi=self.xi, mean_a=self.mean_mode_a)


@dataclass(frozen=True, slots=True)
class InterferenceKernel:
    """Phase dependence of the splitter output for one pulse pair.

    ``gamma_of(theta)`` is the fraction of the total intensity exiting into
    the kept mode at relative phase ``theta``; it is 2*pi periodic, even, and
    always within [0, 1].
    """

    nu: float
    xi: float
    mean_a: float

    def gamma_of(self, theta):
        return (self.mean_a + self.xi * np.cos(theta)) / self.nu


@dataclass(frozen=True, slots=True)
class ThresholdDetector:
    """Click/no-click detector with dark counts and finite efficiency.

    Args:
        epsilon: dark count probability per gate, in [0, 1].
        eta_d: detection efficiency, in [0, 1].
    """

    epsilon: float
    eta_d: float

    def __post_init__(self) -> None:
        _check_unit_interval("epsilon", self.epsilon)
        _check_unit_interval("eta_d", self.eta_d)


@dataclass(frozen=True)
class BranchDistributions:
    """Truncated photon-number distributions of the kept mode.

    ``p_click[n]`` and ``p_noclick[n]`` are joint probabilities of carrying
    ``n`` photons *and* the monitor detector clicking / staying silent, so each
    array sums to its branch probability and the two sum elementwise to
    ``p_total``.  ``tail_mass`` is the total probability beyond ``n_max``.
    """

    n_max: int
    p_click: np.ndarray
    p_noclick: np.ndarray
    p_total: np.ndarray
    tail_mass: float

    def branch(self, label: str) -> np.ndarray:
        """Return the array for branch label 'c', 'nc' or 't'."""
        try:
            return {"c": self.p_click, "nc": self.p_noclick, "t": self.p_total}[label]
        except KeyError:
            raise ParameterError(f"unknown branch label {label!r}") from None


def theta_nodes(count: int) -> np.ndarray:
    """Midpoint quadrature nodes on [0, 2*pi)."""
    if count < 4:
        raise ParameterError(f"theta node count must be >= 4 (got {count})")
    return 2.0 * np.pi * (np.arange(count) + 0.5) / count


def _poisson_pmf_matrix(lam: np.ndarray, n_max: int) -> np.ndarray:
    """Poisson pmf for n = 0..n_max at each rate, shape (n_max+1, len(lam)).

    Evaluated in log space; zero rates are handled exactly.
    """
    n = np.arange(n_max + 1)
    safe = np.where(lam > 0.0, lam, 1.0)
    logs = n[:, None] * np.log(safe[None, :]) - lam[None, :] - gammaln(n + 1)[:, None]
    pmf = np.exp(logs)
    zero = lam == 0.0
    if np.any(zero):
        pmf[:, zero] = 0.0
        pmf[0, zero] = 1.0
    return pmf


def _mode_rates(params: PulsePairParams, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    kern = params.kernel()
    gam = kern.gamma_of(theta_nodes(nodes))
    return params.nu * gam, params.nu * (1.0 - gam)


def _validate_count(name: str, value: int) -> None:
    if not isinstance(value, (int, np.integer)):
        raise ParameterError(f"{name} must be an integer (got {value!r})")
    if value < 0:
        raise ParameterError(f"{name} must be >= 0 (got {value})")
    if value > PHOTON_NUMBER_CAP:
        raise ParameterError(
            f"{name} exceeds the photon-number cap of {PHOTON_NUMBER_CAP} (got {value}); "
            "normalization guarantees do not extend past the cap"
        )


def joint_probability(params: PulsePairParams, n: int, m: int, *,
                      nodes: int = DEFAULT_THETA_NODES) -> float:
    """Probability of n photons in the kept mode and m in the monitored mode.

    The phase average of the product of the two conditional Poisson pmfs.
    """
    _validate_count("n", n)
    _validate_count("m", m)
    if params.nu <= 0.0:
        return 1.0 if (n == 0 and m == 0) else 0.0
    lam_a, lam_b = _mode_rates(params, nodes)
    pmf_a = _poisson_pmf_matrix(lam_a, n)[n]
    pmf_b = _poisson_pmf_matrix(lam_b, m)[m]
    return float(np.mean(pmf_a * pmf_b))


def joint_probability_matrix(params: PulsePairParams, n_max: int, m_max: int, *,
                             nodes: int = DEFAULT_THETA_NODES) -> np.ndarray:
    """All joint probabilities up to (n_max, m_max) in one quadrature pass."""
    _validate_count("n_max", n_max)
    _validate_count("m_max", m_max)
    if params.nu <= 0.0:
        out = np.zeros((n_max + 1, m_max + 1))
        out[0, 0] = 1.0
        return out
    lam_a, lam_b = _mode_rates(params, nodes)
    pmf_a = _poisson_pmf_matrix(lam_a, n_max)
    pmf_b = _poisson_pmf_matrix(lam_b, m_max)
    return np.einsum("nj,mj->nm", pmf_a, pmf_b) / lam_a.size


def branch_distributions(params: PulsePairParams, det: ThresholdDetector,
                         n_max: int = DEFAULT_N_MAX, *,
                         nodes: int = DEFAULT_THETA_NODES,
                         tail_tol: float = DEFAULT_TAIL_TOL) -> BranchDistributions:
    """Click-conditioned photon-number distributions of the kept mode.

    The sum over the monitored mode's photon number collapses analytically
    (the no-click weight at phase theta is ``(1-epsilon) * exp(-lam_b(theta)
    * eta_d)``), so a single phase quadrature per photon number suffices and
    no second truncation is introduced.

    Raises:
        TruncationError: if the mass beyond ``n_max`` exceeds ``tail_tol``.
    """
    if not 2 <= n_max <= PHOTON_NUMBER_CAP:
        raise ParameterError(
            f"n_max must be within [2, {PHOTON_NUMBER_CAP}] (got {n_max})")
    if params.nu <= 0.0:
        p_total = np.zeros(n_max + 1)
        p_total[0] = 1.0
        p_noclick = (1.0 - det.epsilon) * p_total
        p_click = det.epsilon * p_total
    else:
        lam_a, lam_b = _mode_rates(params, nodes)
        pmf = _poisson_pmf_matrix(lam_a, n_max)
        noclick_weight = (1.0 - det.epsilon) * np.exp(-lam_b * det.eta_d)
        p_total = pmf.mean(axis=1)
        p_noclick = (pmf * noclick_weight[None, :]).mean(axis=1)
        p_click = (pmf * (1.0 - noclick_weight)[None, :]).mean(axis=1)
    tail = 1.0 - float(p_total.sum())
    if tail > tail_tol:
        raise TruncationError(
            f"tail mass {tail:.3e} beyond n_max={n_max} exceeds tolerance "
            f"{tail_tol:.1e}; increase n_max for total intensity {params.nu:g}")
    for arr in (p_click, p_noclick, p_total):
        arr.flags.writeable = False
    return BranchDistributions(n_max=n_max, p_click=p_click, p_noclick=p_noclick,
                               p_total=p_total, tail_mass=tail)


def _clean_distribution(dist) -> np.ndarray:
    p = np.asarray(dist, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ParameterError("distribution must be a non-empty 1-d array")
    if np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise ParameterError("distribution entries must be finite and >= 0")
    total = p.sum()
    if total <= 0.0:
        raise ParameterError("distribution has zero total mass")
    return p / total


def g2(dist) -> float:
    """Second-order intensity correlation of a photon-number distribution.

    Ratio of the second factorial moment to the squared mean of the
    renormalized distribution; 1 for Poissonian light, above 1 for bunched.

    Raises:
        ParameterError: for an empty, negative, or zero-mean (vacuum) input.
    """
    p = _clean_distribution(dist)
    n = np.arange(p.size)
    mean = float(np.dot(n, p))
    if mean <= 0.0:
        raise ParameterError("g2 is undefined for a zero-mean (vacuum) distribution")
    pairs = float(np.dot(n * (n - 1), p))
    return pairs / mean**2


def branch_mean(dist) -> float:
    """Mean photon number of a (possibly unnormalized) distribution."""
    p = _clean_distribution(dist)
    return float(np.dot(np.arange(p.size), p))
