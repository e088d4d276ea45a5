"""Linear observable estimation from shadow ensembles.

A record contributes the product of per-site factors Phi[axis][outcome]
from the channel's factor table (unmeasured-axis sites contribute 1), so
estimating a k-local Pauli costs O(N k) regardless of system size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import FactorTable, MeasurementChannel, factor_table
from .paulis import AXES, I2
from .povm import noise_adjoint_povm
from .sampler import ShadowEnsemble, outcome_probabilities
from .states import product_operator_expectation


@dataclass(frozen=True)
class PauliObservable:
    """coefficient * product of single-site Paulis, e.g. 1.0 * z0 z5."""

    coefficient: float
    support: tuple  # ((site, axis), ...), sites distinct

    def __post_init__(self):
        support = tuple(sorted((int(s), str(ax)) for s, ax in self.support))
        if not support:
            raise ValueError("a Pauli observable needs at least one factor")
        sites = [s for s, _ in support]
        if len(set(sites)) != len(sites):
            raise ValueError(f"repeated site in support {support}")
        if min(sites) < 0:
            raise ValueError("negative site index")
        for _, ax in support:
            if ax not in AXES:
                raise ValueError(f"unknown Pauli axis {ax!r}")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @property
    def locality(self) -> int:
        return len(self.support)

    @property
    def label(self) -> str:
        body = " ".join(f"{ax}{s}" for s, ax in self.support)
        if self.coefficient == 1.0:
            return body
        return f"{self.coefficient!r} * {body}"


def zz_pair(i: int, j: int, coefficient: float = 1.0) -> PauliObservable:
    return PauliObservable(coefficient, ((i, "z"), (j, "z")))


def parse_observable(text: str) -> PauliObservable:
    """Parse "z0 z5", "x1,y2" or "1.5 * z0 z1" into a PauliObservable."""
    coeff = 1.0
    body = text
    if "*" in text:
        head, _, body = text.partition("*")
        coeff = float(head.strip())
    tokens = body.replace(",", " ").split()
    support = []
    for tok in tokens:
        axis, num = tok[0].lower(), tok[1:]
        if axis not in AXES or not num.isdigit():
            raise ValueError(f"cannot parse Pauli factor {tok!r}")
        support.append((int(num), axis))
    return PauliObservable(coeff, tuple(support))


# ---------------------------------------------------------------------------
# estimation methods

@dataclass(frozen=True)
class Mean:
    """Plain sample mean over records."""


@dataclass(frozen=True)
class MedianOfMeans:
    """Median of contiguous-batch means.

    With no explicit batch count, uses ceil(2 ln(2 L / delta)) batches.
    """

    batches: int | None = None
    delta: float = 0.05
    observables: int = 1

    def resolve_batches(self, count: int) -> int:
        b = self.batches
        if b is None:
            b = math.ceil(2.0 * math.log(2.0 * self.observables / self.delta))
        if b < 1:
            raise ValueError("median-of-means needs at least one batch")
        return min(b, count)


@dataclass(frozen=True)
class Estimate:
    value: float
    record_std: float
    count: int
    method: str


def per_record_values(
    ensemble: ShadowEnsemble, observable: PauliObservable, table: FactorTable
) -> np.ndarray:
    """The N per-record estimates coeff * prod_i Phi[axis_i][a_i]."""
    _check_compatible(ensemble, observable, table)
    values = np.full(ensemble.count, observable.coefficient)
    for site, axis in observable.support:
        values *= table.factors(axis)[ensemble.records[:, site]]
    return values


def estimate(
    ensemble: ShadowEnsemble,
    observable: PauliObservable,
    table: FactorTable,
    method: Mean | MedianOfMeans = Mean(),
) -> Estimate:
    """Estimate <O> from an ensemble; invariant under record permutations
    for the mean method (it depends only on the record multiset)."""
    values = per_record_values(ensemble, observable, table)
    if values.size == 0:
        raise ValueError("cannot estimate from an empty ensemble")
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    if isinstance(method, MedianOfMeans):
        b = method.resolve_batches(values.size)
        means = [chunk.mean() for chunk in np.array_split(values, b)]
        return Estimate(float(np.median(means)), std, values.size, f"median_of_means:{b}")
    return Estimate(float(values.mean()), std, values.size, "mean")


def _check_compatible(ensemble, observable, table):
    if table.povm_name != ensemble.povm_name or (
        table.noise_descriptor != ensemble.noise_descriptor
    ):
        raise ValueError(
            "factor table ({}, {}) does not match ensemble ({}, {}); "
            "estimates would be biased".format(
                table.povm_name, table.noise_descriptor,
                ensemble.povm_name, ensemble.noise_descriptor,
            )
        )
    if table.k != ensemble.k:
        raise ValueError("factor table outcome count differs from ensemble")
    top = max(site for site, _ in observable.support)
    if top >= ensemble.n:
        raise ValueError(f"observable touches site {top}, ensemble has n={ensemble.n}")


def zz_correlation_matrix(ensemble: ShadowEnsemble, table: FactorTable) -> np.ndarray:
    """All <sz_i sz_j> estimates at once via one Gram product.

    Entry (i, j), i != j, is the mean-estimate of the pair correlator; the
    diagonal is NaN (a site cannot pair with itself).
    """
    if ensemble.n < 2:
        raise ValueError("pair correlations need at least two sites")
    _check_compatible(ensemble, zz_pair(0, 1), table)
    phi_z = table.factors("z")[ensemble.records]  # (N, n)
    gram = (phi_z.T @ phi_z) / ensemble.count
    np.fill_diagonal(gram, np.nan)
    return gram


def max_error(
    ensemble: ShadowEnsemble,
    observables,
    table: FactorTable,
    truths,
) -> float:
    """max_i |mean-estimate(O_i) - truth_i| over an observable list."""
    observables = list(observables)
    truths = np.asarray(list(truths), dtype=float)
    if len(observables) != truths.size:
        raise ValueError("need one truth per observable")
    errs = [
        abs(estimate(ensemble, obs, table).value - t)
        for obs, t in zip(observables, truths)
    ]
    return float(max(errs))


# ---------------------------------------------------------------------------
# variance bounds and sample planning

def variance_bound(
    channel: MeasurementChannel, observable: PauliObservable, state=None
) -> float:
    """Upper bound on the per-record second moment E[o_j^2].

    Bound = coeff^2 * <prod_i V_i> with V_i = sum_a M'_a Phi[axis_i][a]^2,
    where M'_a are the outcome-law elements (adjoint-transformed under
    noise).  When every V_i is proportional to the identity the bound is
    state independent (Pauli-6: V = 3 I, so 3^k); otherwise the exact
    state must be supplied (Pauli-4: V = 5 I + 4 sigma_axis).
    """
    table = factor_table(channel)
    elements = channel.povm.elements
    if channel.noise is not None:
        elements = noise_adjoint_povm(channel.povm, channel.noise).elements
    site_ops = {}
    scalar = float(observable.coefficient) ** 2
    for site, axis in observable.support:
        phi2 = table.factors(axis) ** 2
        v = np.tensordot(phi2, elements, axes=(0, 0))
        c = 0.5 * np.trace(v).real
        if np.max(np.abs(v - c * I2)) <= 1e-10:
            scalar *= c
        else:
            site_ops[site] = v
    if not site_ops:
        return scalar
    if state is None:
        raise ValueError(
            f"variance bound for POVM {channel.povm.name!r} is state dependent; "
            "pass the exact state"
        )
    return scalar * product_operator_expectation(state, site_ops)


def bound_constant(table: FactorTable, locality: int) -> float:
    """Hoeffding range constant B = (b - a)^2 for k-local Pauli estimates.

    A per-record estimate is a product of k factors, each bounded by the
    largest |Phi| over axes and outcomes, so b - a = 2 max|Phi|^k.  A
    (hypothetical) 0-local observable is a constant, so its width is 0.
    """
    if locality < 0:
        raise ValueError("locality must be nonnegative")
    if locality == 0:
        return 0.0
    return (2.0 * table.max_factor ** locality) ** 2


@dataclass(frozen=True)
class SampleBudget:
    samples: int
    method: str  # hoeffding | chebyshev
    constant: float  # range constant B or variance, depending on method
    epsilon: float
    delta: float
    observables: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "samples": self.samples,
                "method": self.method,
                "constant": self.constant,
                "epsilon": self.epsilon,
                "delta": self.delta,
                "observables": self.observables,
            },
            indent=2,
        )


def _check_eps_delta(epsilon, delta, observables):
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if observables < 1:
        raise ValueError("need at least one observable")


def required_samples(
    bound: float, epsilon: float, delta: float, observables: int = 1
) -> SampleBudget:
    """Hoeffding + union bound budget: N = ceil(B ln(2L/delta) / (2 eps^2))."""
    _check_eps_delta(epsilon, delta, observables)
    if not bound > 0:
        raise ValueError("range constant must be positive")
    n = math.ceil(bound * math.log(2.0 * observables / delta) / (2.0 * epsilon ** 2))
    return SampleBudget(max(n, 1), "hoeffding", bound, epsilon, delta, observables)


def chebyshev_samples(variance: float, epsilon: float, delta: float) -> SampleBudget:
    """Smallest N with Var / (N eps^2) <= delta."""
    _check_eps_delta(epsilon, delta, 1)
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    n = math.ceil(variance / (epsilon ** 2 * delta))
    return SampleBudget(max(n, 1), "chebyshev", variance, epsilon, delta, 1)


# ---------------------------------------------------------------------------
# exhaustive (enumerated) expectation, for unbiasedness checks at small n

def enumerated_expectation(
    state, povm, table: FactorTable, observable: PauliObservable, noise=None
) -> float:
    """sum over all k^n outcome tuples of Pr(tuple) * per-record estimate.

    Pr uses the exact (noisy, if given) outcome law; limited to n <= 6.
    """
    probs = outcome_probabilities(state, povm, noise)
    n = probs.ndim
    factor_rows = []
    by_site = dict((site, axis) for site, axis in observable.support)
    for site in range(n):
        if site in by_site:
            factor_rows.append(table.factors(by_site[site]))
        else:
            factor_rows.append(np.ones(povm.k))
    value = probs
    for row in reversed(factor_rows):
        value = value @ row
    return float(observable.coefficient) * float(value)
