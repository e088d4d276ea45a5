"""Experiment drivers behind the CLI subcommands.

Every run_* function validates its configuration up front, computes
deterministically from (config, seed), and returns the complete output
text; nothing is written until a run finishes, so a failing run never
leaves partial files.  Per-run sampling seeds are derived from the base
seed and the run indices through SeedSequence, giving independent Philox
keys that are stable across platforms.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .channel import (
    NoiseModel,
    factor_table,
    measurement_channel,
    parse_noise,
)
from .estimator import (
    Mean,
    MedianOfMeans,
    PauliObservable,
    bound_constant,
    estimate,
    parse_observable,
    required_samples,
    zz_correlation_matrix,
    zz_pair,
)
from .fidelity import fidelity_pure, hypothesis_state, project_to_physical, shadow_overlaps
from .povm import BUILTIN_NAMES, Povm, builtin_povm, validate_povm
from .sampler import ShadowEnsemble, sample_dense, sample_mps, sample_noisy, sample_noisy_state
from .states import (
    DenseState,
    MpsState,
    all_spins_down,
    disordered_heisenberg,
    exact_expectation,
    ghz,
    ground_state,
    load_mps,
    local_depolarizing_scale,
    product_state,
    tfim_hamiltonian,
)


class ConfigError(Exception):
    """Invalid configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    """Mirror of the CLI flags; file form is `key = value` lines."""

    experiment: str = ""
    povm: str = "pauli6"
    state: str = ""
    noise: str = "none"
    samples: int = 5000
    runs: int = 10
    seed: int = 7
    out: str = ""
    method: str = "mean"
    observable: str = ""
    ensemble: str = ""
    epsilon: float = 0.1
    delta: float = 0.05
    observables: int = 1
    locality: int = 2
    p_grid: str = "0,0.1,0.2,0.3"
    pairs: str = "first"
    sample_grid: str = ""
    sizes: str = "2,4,6,8"

    def to_file(self, path: str) -> None:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)]
        _write_atomic(path, "\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        cfg = cls()
        cfg.update_from_file(path)
        return cfg

    def update_from_file(self, path: str) -> None:
        try:
            with open(path) as f:
                text = f.read()
        except OSError as err:
            raise ConfigError(f"cannot read config file {path}: {err}") from None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {raw!r}")
            key, _, value = line.partition("=")
            self.set_field(key.strip(), value.strip())

    def set_field(self, key: str, value: str) -> None:
        by_name = {f.name: f for f in fields(self)}
        if key not in by_name:
            raise ConfigError(f"unknown config key {key!r}")
        kind = by_name[key].type
        try:
            if kind == "int":
                setattr(self, key, int(value))
            elif kind == "float":
                setattr(self, key, float(value))
            else:
                setattr(self, key, value)
        except ValueError:
            raise ConfigError(f"config key {key!r} expects {kind}, got {value!r}") from None

    def as_dict(self) -> dict:
        return asdict(self)


def derive_seed(base: int, *indices: int) -> int:
    """Independent 128-bit Philox key from a base seed and run indices."""
    ss = np.random.SeedSequence([int(base), *[int(i) for i in indices]])
    words = ss.generate_state(4, dtype=np.uint32)
    return int(sum(int(w) << (32 * i) for i, w in enumerate(words)))


# ---------------------------------------------------------------------------
# spec-string parsing

def parse_povm(spec: str) -> Povm:
    if spec in BUILTIN_NAMES:
        return builtin_povm(spec)
    if spec.startswith("file:"):
        path = spec[len("file:"):]
        try:
            with open(path) as f:
                return Povm.from_json(f.read())
        except (OSError, ValueError, KeyError) as err:
            raise ConfigError(f"cannot load POVM from {path}: {err}") from None
    raise ConfigError(
        f"unknown POVM {spec!r}; use one of {BUILTIN_NAMES} or file:<path>"
    )


def _parse_kv(body: str, spec: str) -> dict:
    params = {}
    for part in body.split(","):
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad parameter {part!r} in state spec {spec!r}")
        key, _, value = part.partition("=")
        params[key.strip()] = value.strip()
    return params


def parse_state(spec: str):
    """State specs: ghz:N, down:N, up:N, mps:<path>, tfim:n=..,J=..,h=..,
    heisenberg:n=..,seed=.. ."""
    if not spec:
        raise ConfigError("no state specified")
    kind, _, body = spec.partition(":")
    try:
        if kind == "ghz":
            return ghz(int(body))
        if kind == "down":
            return all_spins_down(int(body))
        if kind == "up":
            return product_state([(0.0, 0.0, 1.0)] * int(body))
        if kind == "mps":
            return load_mps(body)
        if kind == "tfim":
            params = _parse_kv(body, spec)
            return ground_state(
                tfim_hamiltonian(
                    int(params.get("n", 12)),
                    float(params.get("J", 1.0)),
                    float(params.get("h", 1.0)),
                )
            )
        if kind == "heisenberg":
            params = _parse_kv(body, spec)
            return ground_state(
                disordered_heisenberg(int(params.get("n", 10)), int(params.get("seed", 0)))
            )
    except ConfigError:
        raise
    except (ValueError, OSError) as err:
        raise ConfigError(f"bad state spec {spec!r}: {err}") from None
    raise ConfigError(f"unknown state kind {kind!r} in {spec!r}")


def parse_noise_spec(spec: str) -> NoiseModel | None:
    try:
        return parse_noise(spec)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def parse_method(spec: str):
    if spec == "mean":
        return Mean()
    if spec == "mom":
        return MedianOfMeans()
    if spec.startswith("mom:"):
        try:
            return MedianOfMeans(batches=int(spec.split(":", 1)[1]))
        except ValueError:
            raise ConfigError(f"bad method spec {spec!r}") from None
    raise ConfigError(f"unknown method {spec!r}; use mean, mom or mom:<batches>")


def _parse_number_list(text: str, cast, what: str):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(cast(tok))
        except ValueError:
            raise ConfigError(f"bad {what} entry {tok!r}") from None
    if not out:
        raise ConfigError(f"empty {what} list")
    return out


def _sample_any(state, povm, count, seed):
    if isinstance(state, MpsState):
        return sample_mps(state, povm, count, seed)
    return sample_dense(state, povm, count, seed)


def _positive(cfg_value: int, name: str) -> int:
    if cfg_value < 1:
        raise ConfigError(f"{name} must be at least 1")
    return cfg_value


# ---------------------------------------------------------------------------
# output helpers

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _write_atomic(path: str, text: str) -> None:
    import os

    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _prefix(ensemble: ShadowEnsemble, count: int) -> ShadowEnsemble:
    # by the per-record stream contract, the first N records of a larger
    # ensemble are exactly the ensemble that sampling N would have produced
    return ShadowEnsemble(
        ensemble.n, ensemble.k, ensemble.povm_name, ensemble.noise_descriptor,
        ensemble.seed, ensemble.records[:count],
    )


# ---------------------------------------------------------------------------
# subcommand drivers

def run_validate_povm(cfg: ExperimentConfig) -> tuple[str, bool]:
    povm = parse_povm(cfg.povm)
    report = validate_povm(povm)
    lines = [f"povm: {povm.name}", f"outcomes: {povm.k}"]
    if report.ok:
        lines.append("result: ok")
    else:
        lines.append("result: invalid")
        for name, mag in report.violations:
            lines.append(f"violation: {name} magnitude={_fmt(float(mag))}")
    return "\n".join(lines) + "\n", report.ok


def run_sample(cfg: ExperimentConfig) -> str:
    povm = parse_povm(cfg.povm)
    state = parse_state(cfg.state)
    noise = parse_noise_spec(cfg.noise)
    count = _positive(cfg.samples, "samples")
    if not cfg.out:
        raise ConfigError("sample needs --out (ensemble file path)")
    if noise is None:
        ensemble = _sample_any(state, povm, count, cfg.seed)
    else:
        ensemble = sample_noisy(state, povm, noise, count, cfg.seed)
    if cfg.out.endswith(".csv"):
        ensemble.export_csv(cfg.out)
    else:
        ensemble.save(cfg.out)
    return f"wrote {ensemble.count} records to {cfg.out}\n"


def run_estimate(cfg: ExperimentConfig) -> str:
    if not cfg.ensemble:
        raise ConfigError("estimate needs --ensemble (input file path)")
    if not cfg.observable:
        raise ConfigError("estimate needs --observable, e.g. 'z0 z1'")
    try:
        ensemble = ShadowEnsemble.load(cfg.ensemble)
    except (OSError, ValueError) as err:
        raise ConfigError(f"cannot load ensemble {cfg.ensemble}: {err}") from None
    try:
        observable = parse_observable(cfg.observable)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    method = parse_method(cfg.method)
    if ensemble.povm_name in BUILTIN_NAMES:
        povm = builtin_povm(ensemble.povm_name)
    else:
        povm = parse_povm(cfg.povm)
        if povm.name != ensemble.povm_name:
            raise ConfigError(
                f"POVM {povm.name!r} does not match ensemble POVM {ensemble.povm_name!r}"
            )
    noise = parse_noise_spec(ensemble.noise_descriptor)
    table = factor_table(measurement_channel(povm, noise=noise))
    result = estimate(ensemble, observable, table, method)
    std_error = result.record_std / math.sqrt(result.count)
    truth = ""
    abs_error = ""
    if cfg.state:
        truth = exact_expectation(parse_state(cfg.state), observable)
        abs_error = abs(result.value - truth)
    support = ";".join(f"{s}:{ax}" for s, ax in observable.support)
    return _csv(
        ["observable", "support", "method", "samples", "estimate", "std_error",
         "truth", "abs_error"],
        [[observable.label, support, result.method, result.count, result.value,
          std_error, truth, abs_error]],
    )


def run_plan_samples(cfg: ExperimentConfig) -> str:
    povm = parse_povm(cfg.povm)
    noise = parse_noise_spec(cfg.noise)
    table = factor_table(measurement_channel(povm, noise=noise))
    k = _positive(cfg.locality, "locality")
    try:
        budget = required_samples(
            bound_constant(table, k), cfg.epsilon, cfg.delta, cfg.observables
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None
    doc = json.loads(budget.to_json())
    doc.update({"povm": povm.name, "noise": table.noise_descriptor, "locality": k})
    return json.dumps(doc, indent=2) + "\n"


def run_ghz_correlators(cfg: ExperimentConfig) -> str:
    """Mean/std over runs of <sz_i sz_j> on locally depolarized GHZ states."""
    povm = parse_povm(cfg.povm)
    state_spec = cfg.state or "ghz:30"
    state = parse_state(state_spec)
    if not isinstance(state, MpsState):
        raise ConfigError("ghz-correlators expects an MPS state spec (ghz:n)")
    n = state.n
    p_values = _parse_number_list(cfg.p_grid, float, "p-grid")
    for p in p_values:
        if not 0.0 <= p <= 0.75:
            raise ConfigError(f"depolarizing p={p} outside [0, 3/4]")
    pairs = _pair_list(cfg.pairs, n)
    count = _positive(cfg.samples, "samples")
    runs = _positive(cfg.runs, "runs")
    table = factor_table(measurement_channel(povm))

    clean_truth = {
        (i, j): exact_expectation(state, zz_pair(i, j)) for i, j in pairs
    }
    rows = []
    for p_idx, p in enumerate(p_values):
        noise = NoiseModel.depolarizing(4.0 * p / 3.0)
        per_run = np.empty((runs, len(pairs)))
        for run in range(runs):
            seed = derive_seed(cfg.seed, p_idx, run)
            ens = sample_noisy_state(state, povm, noise, count, seed)
            gram = zz_correlation_matrix(ens, table)
            per_run[run] = [gram[i, j] for i, j in pairs]
        mean = per_run.mean(axis=0)
        std = per_run.std(axis=0, ddof=1) if runs > 1 else np.zeros(len(pairs))
        scale = local_depolarizing_scale(p, 2)
        for idx, (i, j) in enumerate(pairs):
            rows.append([p, i, j, mean[idx], std[idx], scale * clean_truth[(i, j)]])
    return _csv(["p", "site_i", "site_j", "estimate_mean", "estimate_std", "truth"], rows)


def _pair_list(pairs_spec: str, n: int):
    if pairs_spec == "first":
        return [(0, j) for j in range(1, n)]
    if pairs_spec == "all":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    raise ConfigError(f"pairs must be 'first' or 'all', got {pairs_spec!r}")


def run_max_error_scaling(cfg: ExperimentConfig) -> str:
    """Worst pair-correlator error vs sample count, per POVM and state."""
    povm_names = [s.strip() for s in (cfg.povm or "pauli6,pauli4").split(",") if s.strip()]
    povms = [parse_povm(name) for name in povm_names]
    state_specs = [s.strip() for s in (cfg.state or "ghz:30,down:30").split(",") if s.strip()]
    grid = sorted(
        _parse_number_list(cfg.sample_grid or "100,250,500,1000,2500,5000", int, "sample-grid")
    )
    if grid[0] < 1:
        raise ConfigError("sample-grid entries must be positive")
    runs = _positive(cfg.runs, "runs")
    rows = []
    for s_idx, spec in enumerate(state_specs):
        state = parse_state(spec)
        n = state.n
        pairs = _pair_list("all", n)
        truth = np.array([exact_expectation(state, zz_pair(i, j)) for i, j in pairs])
        for p_idx, povm in enumerate(povms):
            table = factor_table(measurement_channel(povm))
            for run in range(runs):
                seed = derive_seed(cfg.seed, s_idx, p_idx, run)
                full = _sample_any(state, povm, grid[-1], seed)
                for count in grid:
                    gram = zz_correlation_matrix(_prefix(full, count), table)
                    est = np.array([gram[i, j] for i, j in pairs])
                    rows.append(
                        [povm.name, spec, count, run, float(np.max(np.abs(est - truth)))]
                    )
    return _csv(["povm", "state", "samples", "run", "max_error"], rows)


_TFIM_REGIMES = (("critical", 1.0, 1.0), ("ordered", 1.0, 0.5), ("paramagnetic", 0.5, 1.0))


def run_ising(cfg: ExperimentConfig) -> str:
    """Shadow vs exact-diagonalization pair correlators for TFIM ground states."""
    povm = parse_povm(cfg.povm)
    table = factor_table(measurement_channel(povm))
    count = _positive(cfg.samples, "samples")
    if cfg.state:
        if not cfg.state.startswith("tfim:"):
            raise ConfigError("ising expects a tfim:... state spec")
        params = _parse_kv(cfg.state.partition(":")[2], cfg.state)
        regimes = [("custom", float(params.get("J", 1.0)), float(params.get("h", 1.0)))]
        n = int(params.get("n", 12))
    else:
        regimes = list(_TFIM_REGIMES)
        n = 12
    rows = []
    for r_idx, (name, coupling, field_h) in enumerate(regimes):
        gs = ground_state(tfim_hamiltonian(n, coupling, field_h))
        ens = sample_dense(gs, povm, count, derive_seed(cfg.seed, r_idx))
        gram = zz_correlation_matrix(ens, table)
        for i in range(n):
            for j in range(i + 1, n):
                truth = exact_expectation(gs, zz_pair(i, j))
                rows.append([name, coupling, field_h, i, j, gram[i, j], truth])
    return _csv(["regime", "J", "h", "site_i", "site_j", "estimate", "truth"], rows)


def run_heisenberg(cfg: ExperimentConfig) -> str:
    """Shadow vs ED pair correlators for one disordered-Heisenberg draw."""
    povm = parse_povm(cfg.povm)
    table = factor_table(measurement_channel(povm))
    count = _positive(cfg.samples, "samples")
    # realization 22 shows a clean random-singlet pattern with one
    # long-range pair (2, 9); see the acceptance suite
    spec = cfg.state or "heisenberg:n=10,seed=22"
    if not spec.startswith("heisenberg:"):
        raise ConfigError("heisenberg expects a heisenberg:... state spec")
    gs = parse_state(spec)
    n = gs.n
    ens = sample_dense(gs, povm, count, derive_seed(cfg.seed, 0))
    gram = zz_correlation_matrix(ens, table)
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            truth = exact_expectation(gs, zz_pair(i, j))
            rows.append([i, j, gram[i, j], truth])
    return _csv(["site_i", "site_j", "estimate", "truth"], rows)


def run_fidelity(cfg: ExperimentConfig) -> str:
    """Raw and simplex-projected GHZ fidelity vs qubit count and sample count."""
    povm = parse_povm(cfg.povm)
    channel = measurement_channel(povm)
    sizes = _parse_number_list(cfg.sizes, int, "sizes")
    for n in sizes:
        if not 2 <= n <= 8:
            raise ConfigError("fidelity sizes must lie in 2..8 (4^n hypothesis matrix)")
    grid = sorted(_parse_number_list(cfg.sample_grid or "1000,10000", int, "sample-grid"))
    if grid[0] < 1:
        raise ConfigError("sample-grid entries must be positive")
    runs = _positive(cfg.runs, "runs")
    method = parse_method(cfg.method)
    rows = []
    for n_idx, n in enumerate(sizes):
        state = ghz(n)
        target = state.to_dense()
        for run in range(runs):
            seed = derive_seed(cfg.seed, n_idx, run)
            full = sample_mps(state, povm, grid[-1], seed)
            for count in grid:
                ens = _prefix(full, count)
                overlaps = shadow_overlaps(ens, channel, target)
                if isinstance(method, MedianOfMeans):
                    b = method.resolve_batches(overlaps.size)
                    raw = float(np.median([c.mean() for c in np.array_split(overlaps, b)]))
                else:
                    raw = float(overlaps.mean())
                sigma = hypothesis_state(ens, channel)
                projected = fidelity_pure(project_to_physical(sigma), target)
                rows.append([n, count, run, raw, projected])
    return _csv(["n", "samples", "run", "raw_fidelity", "projected_fidelity"], rows)
