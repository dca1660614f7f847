"""Forward model of the full link and a pulse-level Monte Carlo sampler.

The analytic path expands the receiver response in the photon number of the
kept mode: an n-photon pulse is detected with yield
``Y_n = 1 - (1 - Y0) * (1 - eta)**n`` where ``eta`` is the end-to-end
per-photon transmission (sender internal loss, fiber, receiver detector
efficiency) and ``Y0`` the combined background click probability of the
receiver's detector pair; errors split into background (random, rate 1/2)
and optical misalignment contributions.  The Monte Carlo path samples the
same physics pulse by pulse and aggregates with the exact definitions used
for ingested experimental data, serving as an independent cross-check of
both the photon statistics and the analytic yields.

Reproducibility: one seed drives a run; pulses are processed in fixed-size
chunks, each with its own deterministically derived substream, so results
are identical no matter how chunks are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .bounds import ObservedStatistics
from .errors import ParameterError
from .records import RecordBatch, TallyCounts
from .statistics import (DEFAULT_THETA_NODES, BranchDistributions,
                         PulsePairParams, ThresholdDetector, theta_nodes)

BACKGROUND_ERROR_RATE = 0.5

# Pulses per Monte Carlo chunk.  Fixed (not configurable) so that the stream
# of random draws, and therefore every output, is independent of scheduling.
_CHUNK_PULSES = 1 << 20


@dataclass(frozen=True, slots=True)
class ChannelModel:
    """Everything between the source's kept mode and the receiver's bits.

    Args:
        fiber_length_km: channel length in km (>= 0).
        bob_detector: per-detector dark probability and efficiency of the
            receiver pair (both detectors identical).
        misalignment: probability an arriving photon is routed to the wrong
            detector, in [0, 0.5].
        alice_internal_loss_db: sender-side optical loss after the source
            splitter, in dB (>= 0).
        fiber_loss_db_per_km: attenuation coefficient (>= 0).
    """

    fiber_length_km: float
    bob_detector: ThresholdDetector
    misalignment: float = 0.0
    alice_internal_loss_db: float = 9.0
    fiber_loss_db_per_km: float = 0.2

    def __post_init__(self) -> None:
        for name in ("fiber_length_km", "alice_internal_loss_db", "fiber_loss_db_per_km"):
            if not getattr(self, name) >= 0.0:
                raise ParameterError(f"{name} must be >= 0 (got {getattr(self, name)})")
        if not 0.0 <= self.misalignment <= 0.5:
            raise ParameterError(
                f"misalignment must be within [0, 0.5] (got {self.misalignment})")

    @property
    def path_transmission(self) -> float:
        """Optical transmission excluding detector efficiency."""
        db = self.alice_internal_loss_db + self.fiber_length_km * self.fiber_loss_db_per_km
        return 10.0 ** (-db / 10.0)

    @property
    def transmission(self) -> float:
        """End-to-end per-photon detection probability."""
        return self.path_transmission * self.bob_detector.eta_d

    @property
    def background_yield(self) -> float:
        """Probability at least one receiver detector dark-fires in a gate."""
        eps = self.bob_detector.epsilon
        return 1.0 - (1.0 - eps) ** 2


@dataclass(frozen=True, slots=True)
class GroundTruth:
    """Channel-model yields the bounds are later compared against."""

    y0: float
    y1: float
    e1: float


@dataclass(frozen=True, slots=True)
class PredictedStatistics(ObservedStatistics):
    """Analytic observed statistics with the generating truth attached."""

    truth: GroundTruth = None  # type: ignore[assignment]


def _yields(ch: ChannelModel, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(n_max + 1)
    y0 = ch.background_yield
    yields = 1.0 - (1.0 - y0) * (1.0 - ch.transmission) ** n
    err_mass = BACKGROUND_ERROR_RATE * y0 + ch.misalignment * (yields - y0)
    return yields, err_mass


def predicted_statistics(dists: BranchDistributions,
                         ch: ChannelModel) -> PredictedStatistics:
    """Expected per-branch gains and error rates over the channel model.

    The per-branch gain is the yield expansion summed against the branch's
    (unnormalized) photon-number array, so it carries the branch probability
    weight just like the ingested experimental quantities.
    """
    yields, err_mass = _yields(ch, dists.n_max)
    q_c = float(np.dot(dists.p_click, yields))
    q_nc = float(np.dot(dists.p_noclick, yields))
    em_c = float(np.dot(dists.p_click, err_mass))
    em_nc = float(np.dot(dists.p_noclick, err_mass))
    e_c = em_c / q_c if q_c > 0.0 else 0.0
    e_nc = em_nc / q_nc if q_nc > 0.0 else 0.0
    y1 = yields[1]
    e1 = err_mass[1] / y1 if y1 > 0.0 else BACKGROUND_ERROR_RATE
    truth = GroundTruth(y0=ch.background_yield, y1=y1, e1=e1)
    return PredictedStatistics(q_c=q_c, e_c=e_c, q_nc=q_nc, e_nc=e_nc, truth=truth)


@dataclass(frozen=True)
class MonteCarloResult:
    stats: ObservedStatistics
    tallies: TallyCounts
    n_pulses: int
    seed: int


def _simulate_chunk(params: PulsePairParams, det: ThresholdDetector,
                    ch: ChannelModel, start: int, size: int,
                    rng: np.random.Generator) -> RecordBatch:
    # Draw order is part of the reproducibility contract; do not reorder.
    theta = rng.uniform(0.0, 2.0 * np.pi, size)
    if params.nu > 0.0:
        gam = params.kernel().gamma_of(theta)
        n_kept = rng.poisson(params.nu * gam)
        m_mon = rng.poisson(params.nu * (1.0 - gam))
    else:
        n_kept = np.zeros(size, dtype=np.int64)
        m_mon = np.zeros(size, dtype=np.int64)
    click_prob = 1.0 - (1.0 - det.epsilon) * (1.0 - det.eta_d) ** m_mon
    alice_click = rng.random(size) < click_prob

    alice_basis = rng.integers(0, 2, size, dtype=np.int8)
    alice_bit = rng.integers(0, 2, size, dtype=np.int8)
    bob_basis = rng.integers(0, 2, size, dtype=np.int8)

    arrived = rng.binomial(n_kept, ch.transmission)
    # Matching bases route photons to the bit's detector up to misalignment
    # flips; mismatched bases scatter them half-half.
    wrong_prob = np.where(alice_basis == bob_basis, ch.misalignment, 0.5)
    to_wrong = rng.binomial(arrived, wrong_prob)
    to_right = arrived - to_wrong

    eps_b = ch.bob_detector.epsilon
    dark0 = rng.random(size) < eps_b
    dark1 = rng.random(size) < eps_b
    coin = rng.integers(0, 2, size, dtype=np.int8)

    photons_d0 = np.where(alice_bit == 0, to_right, to_wrong)
    photons_d1 = np.where(alice_bit == 0, to_wrong, to_right)
    click0 = (photons_d0 > 0) | dark0
    click1 = (photons_d1 > 0) | dark1
    detected = click0 | click1
    bob_bit = np.full(size, -1, dtype=np.int8)
    bob_bit[click1 & ~click0] = 1
    bob_bit[click0 & ~click1] = 0
    both = click0 & click1
    bob_bit[both] = coin[both]

    return RecordBatch(
        pulse_index=np.arange(start, start + size, dtype=np.int64),
        alice_click=alice_click.astype(np.int8),
        alice_basis=alice_basis,
        alice_bit=alice_bit,
        bob_basis=bob_basis,
        detected=detected.astype(np.int8),
        bob_bit=bob_bit)


def monte_carlo_run(params: PulsePairParams, det: ThresholdDetector,
                    ch: ChannelModel, n_pulses: int, seed: int,
                    record_sink: Callable[[RecordBatch], None] | None = None
                    ) -> MonteCarloResult:
    """Sample the link pulse by pulse and aggregate observed statistics.

    Args:
        record_sink: optional callable receiving each RecordBatch in pulse
            order (for CSV streaming); aggregation happens either way.
    """
    if n_pulses < 1:
        raise ParameterError(f"n_pulses must be >= 1 (got {n_pulses})")
    n_chunks = (n_pulses + _CHUNK_PULSES - 1) // _CHUNK_PULSES
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    tallies = TallyCounts()
    for i in range(n_chunks):
        start = i * _CHUNK_PULSES
        size = min(_CHUNK_PULSES, n_pulses - start)
        batch = _simulate_chunk(params, det, ch, start, size,
                                np.random.default_rng(streams[i]))
        tallies.merge(TallyCounts.from_batch(batch))
        if record_sink is not None:
            record_sink(batch)
    return MonteCarloResult(stats=tallies.to_observed(), tallies=tallies,
                            n_pulses=n_pulses, seed=seed)


@dataclass(frozen=True, slots=True)
class HomPoint:
    overlap: float
    coincidence: float
    visibility: float


@dataclass(frozen=True)
class HomScan:
    rows: tuple
    visibility: float

    def as_rows(self) -> list[tuple[float, float, float]]:
        return [(r.overlap, r.coincidence, r.visibility) for r in self.rows]


def hom_coincidence_scan(params: PulsePairParams,
                         overlaps: Sequence[float],
                         nodes: int = DEFAULT_THETA_NODES) -> HomScan:
    """Two-detector coincidence probability versus mode overlap.

    Ideal threshold detectors (unit efficiency, no dark counts) watch both
    splitter outputs.  Per row, ``visibility`` compares the coincidence
    against the factorized (zero-overlap) baseline; the scan-level
    ``visibility`` is (max - min) / max across the scanned rows.  For
    balanced weak pulses on a symmetric splitter the scan from zero to full
    overlap approaches visibility 1/2.
    """
    if len(overlaps) == 0:
        raise ParameterError("overlaps must be non-empty")
    th = theta_nodes(nodes)
    rows = []
    mean_a = params.mean_mode_a
    mean_b = params.nu - mean_a
    baseline = (1.0 - np.exp(-mean_a)) * (1.0 - np.exp(-mean_b))
    for s in sorted(overlaps):
        p = replace(params, overlap=float(s))
        if p.nu > 0.0:
            gam = p.kernel().gamma_of(th)
            lam_a, lam_b = p.nu * gam, p.nu * (1.0 - gam)
            coinc = float(np.mean((1.0 - np.exp(-lam_a)) * (1.0 - np.exp(-lam_b))))
        else:
            coinc = 0.0
        vis = 1.0 - coinc / baseline if baseline > 0.0 else 0.0
        rows.append(HomPoint(overlap=float(s), coincidence=coinc, visibility=vis))
    cmax = max(r.coincidence for r in rows)
    cmin = min(r.coincidence for r in rows)
    scan_vis = (cmax - cmin) / cmax if cmax > 0.0 else 0.0
    return HomScan(rows=tuple(rows), visibility=scan_vis)


def fit_channel_to_observed(dists: BranchDistributions, obs: ObservedStatistics,
                            *, fiber_length_km: float = 10.0,
                            alice_internal_loss_db: float = 9.0,
                            fiber_loss_db_per_km: float = 0.2,
                            bob_dark_per_detector: float = 2.0e-6) -> ChannelModel:
    """Invert the no-click branch observables into a channel model.

    With the per-detector dark probability pinned, the receiver efficiency is
    root-found so the predicted no-click gain matches ``obs.q_nc`` and the
    misalignment follows in closed form from ``obs.e_nc``.  The click-branch
    observables are deliberately left out: how well they are then predicted
    measures the consistency of the whole source-plus-channel description.
    """
    n = np.arange(dists.n_max + 1)
    p_nc = dists.p_noclick
    s_nc = float(p_nc.sum())
    y0 = 1.0 - (1.0 - bob_dark_per_detector) ** 2
    floor = s_nc * y0

    if obs.q_nc <= floor:
        raise ParameterError(
            f"observed no-click gain {obs.q_nc:.3e} is below the background "
            f"floor {floor:.3e}; lower bob_dark_per_detector")

    def gain_mismatch(eta_b: float) -> float:
        eta = 10.0 ** (-(alice_internal_loss_db
                         + fiber_length_km * fiber_loss_db_per_km) / 10.0) * eta_b
        q = s_nc - (1.0 - y0) * float(np.dot(p_nc, (1.0 - eta) ** n))
        return q - obs.q_nc

    if gain_mismatch(1.0) < 0.0:
        raise ParameterError("observed no-click gain is unreachably large "
                             "for the given path loss")
    eta_b = brentq(gain_mismatch, 0.0, 1.0, xtol=1e-18, rtol=8.9e-16)

    err_mass = obs.e_nc * obs.q_nc
    misalignment = ((err_mass - BACKGROUND_ERROR_RATE * y0 * s_nc)
                    / (obs.q_nc - y0 * s_nc))
    if not 0.0 <= misalignment <= 0.5:
        raise ParameterError(
            f"fitted misalignment {misalignment:.4f} outside [0, 0.5]; "
            "the pinned dark probability is inconsistent with the error rate")
    return ChannelModel(
        fiber_length_km=fiber_length_km,
        bob_detector=ThresholdDetector(epsilon=bob_dark_per_detector, eta_d=eta_b),
        misalignment=misalignment,
        alice_internal_loss_db=alice_internal_loss_db,
        fiber_loss_db_per_km=fiber_loss_db_per_km)
