"""The full correlator protocol: per-shot sampling, averaging, and oracles.

One shot prepares the entangled pair, weakly measures arm 1 then arm 2
(signals ``alpha1``, ``alpha2``), projectively reads out both arms
(signals ``b1``, ``b2``), and evaluates the CHSH-form combination

    C = alpha1*alpha2 + alpha1*b2 + b1*alpha2 - b1*b2.

Every term of every C comes from the same shot of a single fixed analyzer
configuration.  Three independent routes to the ensemble mean are
provided:

* :func:`monte_carlo` averages C over sampled shots,
* :func:`exact_mean` integrates the joint outcome distribution
  deterministically (Gauss-Hermite quadrature per Gaussian arm, exact
  branch sums per ancilla arm),
* :func:`analytic_mean` evaluates the closed form
  ``(1 + v*xi1)(1 + v*xi2)/sqrt(2)`` from the arms' dephasing factors.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np
from scipy.special import roots_hermite

from . import measurement as meas
from .measurement import (
    AncillaMeterSpec,
    GaussianMeterSpec,
    MeterSpec,
    ProjectiveMeterSpec,
)
from .qmath import AnalyzerBasis, analyzer_basis, bell_state

SQRT2 = np.sqrt(2.0)

#: analyzer angles (phi_a1, phi_a2, phi_b1, phi_b2) of the standard
#: maximally violating CHSH configuration
DEFAULT_ANGLES = (np.pi / 2.0, np.pi / 4.0, 0.0, 3.0 * np.pi / 4.0)

#: fixed number of shots per RNG substream; part of the reproducibility
#: contract (results are bit-identical for a given (config, seed) no
#: matter how many workers execute the chunks)
CHUNK_SHOTS = 1 << 16

_QUADRATURE_LADDER = (256, 512, 1024, 2048, 4096)
_QUADRATURE_RTOL = 1e-8


class NumericalError(RuntimeError):
    """Raised when deterministic integration fails to converge."""


@dataclass(frozen=True)
class MeasurementRecord:
    """The four signals of one shot; ``b1``/``b2`` are exactly +/-1."""

    alpha1: float
    alpha2: float
    b1: float
    b2: float


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run: meters, angles, shots, seed."""

    meter1: MeterSpec
    meter2: MeterSpec
    b_spec: ProjectiveMeterSpec = ProjectiveMeterSpec(v=1.0)
    angles: tuple[float, float, float, float] = DEFAULT_ANGLES
    shots: int = 1_000_000
    seed: int = 42

    def __post_init__(self):
        if not isinstance(self.meter1, (GaussianMeterSpec, AncillaMeterSpec)):
            raise ValueError(f"meter1 must be a meter spec, got {type(self.meter1).__name__}")
        if not isinstance(self.meter2, (GaussianMeterSpec, AncillaMeterSpec)):
            raise ValueError(f"meter2 must be a meter spec, got {type(self.meter2).__name__}")
        if len(self.angles) != 4 or not all(np.isfinite(a) for a in self.angles):
            raise ValueError(f"angles must be four finite radians, got {self.angles}")
        if self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))

    def bases(self) -> tuple[AnalyzerBasis, AnalyzerBasis, AnalyzerBasis, AnalyzerBasis]:
        return tuple(analyzer_basis(phi) for phi in self.angles)


@dataclass(frozen=True)
class Estimate:
    """Monte-Carlo mean with its standard error (sample std / sqrt(shots))."""

    mean: float
    stderr: float
    shots: int


def correlator(record: MeasurementRecord) -> float:
    """Per-shot CHSH-form combination of the four signals."""
    return (
        record.alpha1 * record.alpha2
        + record.alpha1 * record.b2
        + record.b1 * record.alpha2
        - record.b1 * record.b2
    )


def run_shot(config: ExperimentConfig, rng: np.random.Generator) -> MeasurementRecord:
    """Run one full shot: prepare, weakly measure both arms, read out both arms."""
    basis_a1, basis_a2, basis_b1, basis_b2 = config.bases()
    state = bell_state()
    if isinstance(config.meter1, GaussianMeterSpec):
        out1 = meas.sample_gaussian(state, 1, config.meter1, basis_a1, rng)
    else:
        out1 = meas.sample_ancilla(state, 1, config.meter1, basis_a1, rng)
    state = out1.post_state
    if isinstance(config.meter2, GaussianMeterSpec):
        out2 = meas.sample_gaussian(state, 2, config.meter2, basis_a2, rng)
    else:
        out2 = meas.sample_ancilla(state, 2, config.meter2, basis_a2, rng)
    state = out2.post_state
    outb1 = meas.projective_sample(state, 1, config.b_spec, basis_b1, rng)
    outb2 = meas.projective_sample(outb1.post_state, 2, config.b_spec, basis_b2, rng)
    return MeasurementRecord(
        alpha1=out1.signal, alpha2=out2.signal, b1=outb1.signal, b2=outb2.signal
    )


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    # Philox is counter based: keying by (seed, chunk index) gives disjoint
    # substreams without sequential jumping.
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) + chunk_index))


def _run_chunk(config: ExperimentConfig, chunk_index: int, n: int) -> tuple[np.ndarray, ...]:
    rng = _chunk_rng(config.seed, chunk_index)
    basis_a1, basis_a2, basis_b1, basis_b2 = config.bases()
    coeff = meas.bell_coefficients(n)
    alpha1, coeff = meas.sample_weak_batch(coeff, 1, config.meter1, basis_a1, rng)
    alpha2, coeff = meas.sample_weak_batch(coeff, 2, config.meter2, basis_a2, rng)
    b1, coeff = meas.sample_projective_batch(coeff, 1, config.b_spec, basis_b1, rng)
    b2, coeff = meas.sample_projective_batch(coeff, 2, config.b_spec, basis_b2, rng)
    return alpha1, alpha2, b1, b2


def _chunk_sizes(shots: int) -> list[int]:
    full, rest = divmod(shots, CHUNK_SHOTS)
    return [CHUNK_SHOTS] * full + ([rest] if rest else [])


def iter_records(config: ExperimentConfig) -> Iterator[tuple[np.ndarray, ...]]:
    """Yield ``(alpha1, alpha2, b1, b2)`` arrays chunk by chunk.

    The concatenated stream is exactly the record sequence that
    :func:`monte_carlo` averages for the same config.
    """
    for index, n in enumerate(_chunk_sizes(config.shots)):
        yield _run_chunk(config, index, n)


def monte_carlo(config: ExperimentConfig, threads: int = 1) -> Estimate:
    """Average the per-shot correlator over ``config.shots`` sampled shots.

    Deterministic for a fixed (config, seed): shots are generated in fixed
    chunks from counter-based substreams and reduced in chunk order, so
    the result is bit-identical for any ``threads`` value.
    """
    sizes = _chunk_sizes(config.shots)

    def chunk_sums(index_size):
        index, n = index_size
        alpha1, alpha2, b1, b2 = _run_chunk(config, index, n)
        values = alpha1 * alpha2 + alpha1 * b2 + b1 * alpha2 - b1 * b2
        return float(values.sum()), float((values * values).sum())

    jobs = list(enumerate(sizes))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(chunk_sums, jobs))
    else:
        partials = [chunk_sums(job) for job in jobs]

    total = 0.0
    total_sq = 0.0
    for part, part_sq in partials:
        total += part
        total_sq += part_sq
    n = config.shots
    mean = total / n
    if n > 1:
        variance = max((total_sq - n * mean * mean) / (n - 1), 0.0)
        stderr = float(np.sqrt(variance / n))
    else:
        stderr = 0.0
    return Estimate(mean=mean, stderr=stderr, shots=n)


def analytic_mean(xi1: float, xi2: float, v: float) -> float:
    """Closed-form ensemble mean ``(1 + v*xi1)(1 + v*xi2)/sqrt(2)``.

    ``xi1``/``xi2`` are the arms' dephasing factors and ``v`` the
    projective readout visibility; all must lie in [0, 1].
    """
    for name, value in (("xi1", xi1), ("xi2", xi2), ("v", v)):
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    return float((1.0 + v * xi1) * (1.0 + v * xi2) / SQRT2)


def violation_threshold() -> float:
    """Dephasing-factor threshold ``2**(3/4) - 1`` above which the mean exceeds 2."""
    return 2.0 ** 0.75 - 1.0


def predicted_stderr(config: ExperimentConfig) -> float:
    """Rough a-priori standard error of :func:`monte_carlo` for this config.

    Uses the signals' second moments (``sigma^2 + 1`` for a Gaussian arm,
    ``1/v_total^2`` for an ancilla arm); good to a few tens of percent,
    which is enough for shot-budget warnings.
    """

    def second_moment(spec: MeterSpec) -> float:
        if isinstance(spec, GaussianMeterSpec):
            return spec.sigma**2 + 1.0
        return 1.0 / spec.v_total**2

    m1 = second_moment(config.meter1)
    m2 = second_moment(config.meter2)
    variance = m1 * m2 + m1 + m2 + 1.0
    return float(np.sqrt(variance / config.shots))


# ---------------------------------------------------------------------------
# Deterministic integration of the joint outcome distribution.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _ArmNodes:
    """Discretized weak measurement on one arm.

    ``signals[i]`` is the flip-averaged recorded signal of branch i,
    ``weights[i]`` its integration weight, ``kraus[i]`` the (2, 2)
    back-action operator, and ``channel`` the Kraus decomposition of the
    deterministic post-measurement channel (excess dephasing), or a single
    identity when there is none.
    """

    signals: np.ndarray
    weights: np.ndarray
    kraus: np.ndarray
    channel: tuple[np.ndarray, ...]


def _gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, gh_weights = roots_hermite(order)
    keep = gh_weights > 0.0  # weights below float range carry no usable mass
    return nodes[keep], gh_weights[keep]


def _gaussian_nodes(spec: GaussianMeterSpec, basis: AnalyzerBasis, order: int) -> _ArmNodes:
    x, w = _gauss_hermite(order)
    alpha = SQRT2 * spec.sigma * x
    # flat weights for integrating f(alpha) d alpha; log form avoids the
    # overflow of exp(x^2) at extreme nodes
    weights = SQRT2 * spec.sigma * np.exp(np.log(w) + x * x)
    norm = (2.0 * np.pi * spec.sigma**2) ** (-0.25)
    g0 = norm * np.exp(-((alpha - 1.0) ** 2) / (4.0 * spec.sigma**2))
    g1 = norm * np.exp(-((alpha + 1.0) ** 2) / (4.0 * spec.sigma**2))
    kraus = g0[:, None, None] * basis.projector0 + g1[:, None, None] * basis.projector1
    if spec.eta < 1.0:
        factor = meas.excess_dephasing_factor(spec)
        channel = (
            np.sqrt((1.0 + factor) / 2.0) * np.eye(2, dtype=complex),
            np.sqrt((1.0 - factor) / 2.0) * basis.observable,
        )
    else:
        channel = (np.eye(2, dtype=complex),)
    return _ArmNodes(signals=alpha, weights=weights, kraus=kraus, channel=channel)


def _ancilla_nodes(spec: AncillaMeterSpec, basis: AnalyzerBasis) -> _ArmNodes:
    kraus = np.stack(
        [meas.ancilla_kraus(+1, spec.v_ent, basis), meas.ancilla_kraus(-1, spec.v_ent, basis)]
    )
    # flip-averaged signal: E[reported]/v_total = u*sign/v_total per branch
    signals = np.array([+1.0, -1.0]) * spec.u / spec.v_total
    return _ArmNodes(
        signals=signals,
        weights=np.ones(2),
        kraus=kraus,
        channel=(np.eye(2, dtype=complex),),
    )


def _arm_nodes(spec: MeterSpec, basis: AnalyzerBasis, order: int) -> _ArmNodes:
    if isinstance(spec, GaussianMeterSpec):
        return _gaussian_nodes(spec, basis, order)
    return _ancilla_nodes(spec, basis)


def _integrate_mean(config: ExperimentConfig, order: int) -> tuple[float, float]:
    """One pass of the deterministic mean at a fixed quadrature order.

    Propagates pure-state amplitude matrices C (|psi> = sum C[k,l] |k,l>)
    through every branch pair: C -> L1 M1[i] C M2[j]^T L2^T, then projects
    onto the four joint readout kets.  The correlator is assembled from
    the branch signals and the flip-averaged readout eigenvalues
    (+/- v for terms linear in each b, the flips being independent).

    Returns ``(mean, norm)`` where ``norm`` is the integrated total
    probability; a grid that resolves the distribution has ``norm = 1``.
    """
    basis_a1, basis_a2, basis_b1, basis_b2 = config.bases()
    arm1 = _arm_nodes(config.meter1, basis_a1, order)
    arm2 = _arm_nodes(config.meter2, basis_a2, order)
    v = config.b_spec.v

    psi = np.eye(2, dtype=complex) / SQRT2
    kets_b1 = (basis_b1.ket0, basis_b1.ket1)
    kets_b2 = (basis_b2.ket0, basis_b2.ket1)
    eigen = (+1.0, -1.0)

    w1, w2 = arm1.weights, arm2.weights
    s1, s2 = arm1.signals, arm2.signals
    total = 0.0
    norm = 0.0
    block = max(1, (1 << 18) // max(len(s2), 1))
    for start in range(0, len(s1), block):
        stop = min(start + block, len(s1))
        k1 = arm1.kraus[start:stop]
        left = np.einsum("iab,bc->iac", k1, psi)
        for l1, l2 in itertools.product(arm1.channel, arm2.channel):
            k1c = np.einsum("ab,ibc->iac", l1, left)
            k2c = np.einsum("ab,jbc->jac", l2, arm2.kraus)
            coeff = np.einsum("iac,jdc->ijad", k1c, k2c)
            for (i_b1, ket1), (i_b2, ket2) in itertools.product(
                enumerate(kets_b1), enumerate(kets_b2)
            ):
                amp = np.einsum("ijad,a,d->ij", coeff, ket1.conj(), ket2.conj())
                prob = (amp * amp.conj()).real
                beta1, beta2 = eigen[i_b1], eigen[i_b2]
                row = w1[start:stop] * np.einsum("ij,j->i", prob, w2 * s2)
                row_plain = w1[start:stop] * np.einsum("ij,j->i", prob, w2)
                weight = float(row_plain.sum())
                total += float(np.dot(s1[start:stop], row))  # alpha1*alpha2 term
                total += v * beta2 * float(np.dot(s1[start:stop], row_plain))
                total += v * beta1 * float(row.sum())
                total -= v * v * beta1 * beta2 * weight
                norm += weight
    return total, norm


def exact_mean(config: ExperimentConfig) -> float:
    """Deterministic ensemble mean of the correlator, no sampling.

    Gaussian arms are integrated with Gauss-Hermite quadrature; the order
    starts at 256 points per axis and doubles until two successive results
    agree to 1e-8, capped at 4096.  Ancilla arms are exact two-branch sums
    (an all-ancilla config needs a single pass).  Raises
    :class:`NumericalError` when the quadrature does not converge.
    """
    has_gaussian = isinstance(config.meter1, GaussianMeterSpec) or isinstance(
        config.meter2, GaussianMeterSpec
    )
    if not has_gaussian:
        return _integrate_mean(config, order=2)[0]
    previous = None
    for order in _QUADRATURE_LADDER:
        value, norm = _integrate_mean(config, order)
        resolved = abs(norm - 1.0) <= _QUADRATURE_RTOL
        if previous is not None and resolved and abs(value - previous) <= _QUADRATURE_RTOL:
            return value
        previous = value if resolved else None
    raise NumericalError(
        f"quadrature did not converge to {_QUADRATURE_RTOL} "
        f"at {_QUADRATURE_LADDER[-1]} points per axis "
        f"(integrated probability {norm:.6g}, signal widths may be too small)"
    )


# ---------------------------------------------------------------------------
# Parameter sweeps.
# ---------------------------------------------------------------------------

SWEEP_AXES = ("sigma", "eta", "v", "v_total", "u")


@dataclass(frozen=True)
class SweepPoint:
    """One sweep row: parameter value with all three mean estimates."""

    value: float
    estimate: Estimate
    exact: float
    analytic: float


def config_analytic_mean(config: ExperimentConfig) -> float:
    """Closed-form mean for a config, from the meters' dephasing factors."""
    return analytic_mean(
        meas.dephasing_factor(config.meter1),
        meas.dephasing_factor(config.meter2),
        config.b_spec.v,
    )


def _config_with_value(config: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis in ("sigma", "eta"):
        for name, spec in (("meter1", config.meter1), ("meter2", config.meter2)):
            if not isinstance(spec, GaussianMeterSpec):
                raise ValueError(f"axis {axis!r} requires Gaussian meters, but {name} is ancilla")
        try:
            return replace(
                config,
                meter1=replace(config.meter1, **{axis: value}),
                meter2=replace(config.meter2, **{axis: value}),
            )
        except ValueError as exc:
            raise ValueError(f"invalid {axis} value {value}: {exc}") from exc
    if axis in ("v_total", "u"):
        for name, spec in (("meter1", config.meter1), ("meter2", config.meter2)):
            if not isinstance(spec, AncillaMeterSpec):
                raise ValueError(f"axis {axis!r} requires ancilla meters, but {name} is Gaussian")
        try:
            return replace(
                config,
                meter1=replace(config.meter1, **{axis: value}),
                meter2=replace(config.meter2, **{axis: value}),
            )
        except ValueError as exc:
            raise ValueError(f"invalid {axis} value {value}: {exc}") from exc
    if axis == "v":
        try:
            return replace(config, b_spec=ProjectiveMeterSpec(v=value))
        except ValueError as exc:
            raise ValueError(f"invalid v value {value}: {exc}") from exc
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def sweep(
    config: ExperimentConfig,
    axis: str,
    values: list[float],
    threads: int = 1,
) -> list[SweepPoint]:
    """Evaluate Monte-Carlo, deterministic, and closed-form means per value.

    ``axis`` selects the swept parameter: ``sigma``/``eta`` retune both
    Gaussian meters, ``v_total``/``u`` both ancilla meters, ``v`` the
    projective readout.
    """
    points = []
    for value in values:
        derived = _config_with_value(config, axis, float(value))
        points.append(
            SweepPoint(
                value=float(value),
                estimate=monte_carlo(derived, threads=threads),
                exact=exact_mean(derived),
                analytic=config_analytic_mean(derived),
            )
        )
    return points
