"""Convergence studies and verification suites behind the command line tool.

Convergence studies produce :class:`ConvergenceReport` objects (one CSV row per
run); verification suites produce JSON-serializable dictionaries with a
``passed`` flag.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from subdiff_l1.errors import ParameterError
from subdiff_l1.gronwall import (
    DEFAULT_ENVELOPE_CONSTANT,
    GronwallParams,
    envelope_grid,
    propagation_matrix_checks,
)
from subdiff_l1.kernel import complementary_weights, l1_weights
from subdiff_l1.problems import example1, example2
from subdiff_l1.spatial import SpatialGrid, apply_laplacian, solve_shifted_system
from subdiff_l1.stepper import SchemeConfig, Variant, solve
from subdiff_l1.truncation import sup_ratio_stability, truncation_errors

logger = logging.getLogger(__name__)

__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "ConvergenceRecord",
    "ConvergenceReport",
    "StudyConfig",
    "expected_rate",
    "run_example1",
    "run_example2",
    "run_study",
    "run_verification_suites",
]

CSV_HEADER = (
    "alpha", "sigma", "N", "M", "tN", "variant", "max_error", "rate", "expected_rate",
)

CONVERGENCE_STUDIES = ("example1", "example2a", "example2b", "example2c", "example2d")
VERIFICATION_STUDIES = ("kernel", "truncation", "gronwall", "spatial")
EXPORT_STUDIES = ("weights",)
REGIMES = ("final", "initial", "spatial")


class ConfigError(ParameterError):
    """The study configuration is invalid."""


# {{{ expected rates

def expected_rate(alpha: float, sigma: float, regime: str) -> float:
    """Theoretical convergence order for a study regime.

    ``final``
        error at a fixed time away from zero: ``sigma + 1 - alpha`` for
        ``sigma < 1`` and ``2 - alpha`` for ``sigma > 1``;
    ``initial``
        error as ``t_N -> 0`` at a fixed number of steps: ``sigma``;
    ``global``
        maximum over all time levels: ``sigma`` below ``2 - alpha``,
        ``2 - alpha`` from there on;
    ``spatial``
        order in ``h``: ``2``.
    """
    if sigma <= 0 or sigma == 1.0 or sigma > 2.0:
        raise ParameterError(f"sigma must lie in (0, 1) or (1, 2]: {sigma}")

    if regime == "final":
        return sigma + 1.0 - alpha if sigma < 1.0 else 2.0 - alpha
    if regime == "initial":
        return sigma
    if regime == "global":
        return sigma if sigma < 2.0 - alpha else 2.0 - alpha
    if regime == "spatial":
        return 2.0

    raise ParameterError(f"unknown regime {regime!r}")

# }}}


# {{{ configuration

# (alpha, sigma) rows of the manufactured-solution tables
TABLE1_PAIRS = (
    (0.4, 0.1), (0.4, 0.4), (0.4, 0.6), (0.4, 1.2), (0.4, 1.8),
    (0.6, 0.4), (0.6, 0.6), (0.6, 0.8), (0.6, 1.2), (0.6, 1.8),
)
TABLE3_PAIRS = ((0.4, 0.4), (0.4, 1.2), (0.6, 0.6), (0.6, 0.2))

DEFAULTS: dict[tuple[str, str], dict[str, Any]] = {
    ("example1", "final"): {"pairs": TABLE1_PAIRS, "N": (10, 20, 40, 80, 160), "M": 1000},
    ("example1", "initial"): {
        "pairs": TABLE1_PAIRS, "N": 10, "M": 1000,
        "tN": (1e-3, 1e-4, 1e-5, 1e-6, 1e-7),
    },
    ("example1", "spatial"): {"pairs": TABLE3_PAIRS, "N": 1000, "M": (8, 16, 24, 32, 40)},
    ("example2", "final"): {"alpha": (0.4, 0.6, 0.8), "N": (10, 20, 40, 80, 160)},
    ("example2", "initial"): {
        "alpha": (0.4, 0.6, 0.8), "N": 10, "tN": (1e-4, 1e-5, 1e-6, 1e-7, 1e-8),
    },
}


def _tuple(value) -> tuple:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return (value,)


@dataclass(frozen=True)
class StudyConfig:
    """Parameters of one study; unset fields fall back to per-study defaults."""

    study: str
    regime: str = "final"
    alpha: tuple[float, ...] = ()
    sigma: tuple[float, ...] = ()
    #: explicit ``(alpha, sigma)`` rows; overrides the alpha x sigma product
    pairs: tuple[tuple[float, float], ...] = ()
    N: tuple[int, ...] = ()
    M: tuple[int, ...] = ()
    T: float = 1.0
    tN: tuple[float, ...] = ()
    variant: str = "implicit"
    #: spatial studies: ``fine`` (fine-mesh solution, same N) or ``exact``
    reference: str = "fine"
    #: reference step count factor for problems without exact solution
    ref_factor: int = 64
    newton_tol: float = 1.0e-12
    # verification suites
    n_max: int = 2048
    constant: float = DEFAULT_ENVELOPE_CONSTANT
    lams: tuple[float, ...] = ()
    taus: tuple[float, ...] = ()
    export_dir: str | None = None
    seed: int = 0

    @classmethod
    def from_mapping(cls, data: dict[str, Any], **overrides) -> StudyConfig:
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "study" not in data:
            raise ConfigError("configuration must name a study")

        study = data["study"]
        regime = data.get("regime", "final")
        family = "example2" if study.startswith("example2") else study
        merged = {**DEFAULTS.get((family, regime), {}), **data}

        for key in ("alpha", "sigma", "N", "M", "tN", "lams", "taus"):
            if key in merged:
                merged[key] = _tuple(merged[key])
        if "pairs" in merged:
            merged["pairs"] = tuple(tuple(map(float, p)) for p in merged["pairs"])
        if ("alpha" in data or "sigma" in data) and "pairs" not in data:
            merged.pop("pairs", None)

        try:
            config = cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        config.validate()
        return config

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> StudyConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        return cls.from_mapping(data, **overrides)

    @property
    def case(self) -> str:
        return self.study[-1]

    def rows(self) -> list[tuple[float, float]]:
        if self.pairs:
            return list(self.pairs)
        return [(a, s) for a in self.alpha for s in self.sigma]

    def validate(self) -> None:
        known = CONVERGENCE_STUDIES + VERIFICATION_STUDIES + EXPORT_STUDIES
        if self.study not in known:
            raise ConfigError(f"unknown study {self.study!r}, expected one of {known}")
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}, expected one of {REGIMES}")
        try:
            Variant(self.variant)
        except ValueError:
            raise ConfigError(f"unknown scheme variant {self.variant!r}") from None
        if self.reference not in ("fine", "exact"):
            raise ConfigError(f"unknown spatial reference {self.reference!r}")

        if self.study not in CONVERGENCE_STUDIES:
            return

        if self.study == "example1":
            if not self.rows():
                raise ConfigError("example1 needs (alpha, sigma) rows")
        elif not self.alpha:
            raise ConfigError(f"{self.study} needs a list of alpha values")
        if self.study != "example1" and self.regime == "spatial":
            raise ConfigError("spatial studies need an exact solution (example1)")

        sweep = {"final": self.N, "initial": self.tN, "spatial": self.M}[self.regime]
        if len(sweep) < 2:
            raise ConfigError(f"the {self.regime} regime needs at least two sweep values")
        if self.regime == "final" and any(b != 2 * a for a, b in zip(self.N, self.N[1:])):
            raise ConfigError(f"step counts must double for rate computation: {self.N}")
        if self.regime != "final" and len(self.N) != 1:
            raise ConfigError(f"the {self.regime} regime uses a single N, got {self.N}")
        if self.regime != "spatial" and len(self.M) > 1:
            raise ConfigError(f"the {self.regime} regime uses a single M, got {self.M}")
        if self.ref_factor < 2:
            raise ConfigError("ref_factor must be at least 2")

# }}}


# {{{ reports

@dataclass(frozen=True)
class ConvergenceRecord:
    alpha: float
    sigma: float
    N: int
    M: int
    tN: float
    variant: str
    max_error: float
    rate: float | None
    expected_rate: float


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


@dataclass
class ConvergenceReport:
    study: str
    regime: str
    records: list[ConvergenceRecord] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.records:
            writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
        return buf.getvalue()

    def sweeps(self) -> dict[tuple[float, float], list[ConvergenceRecord]]:
        out: dict[tuple[float, float], list[ConvergenceRecord]] = {}
        for r in self.records:
            out.setdefault((r.alpha, r.sigma), []).append(r)
        return out

    def finest_rates(self) -> dict[tuple[float, float], float]:
        return {key: rows[-1].rate for key, rows in self.sweeps().items()}

    def to_dict(self) -> dict:
        return {
            "study": self.study,
            "regime": self.regime,
            "records": [asdict(r) for r in self.records],
        }


def _pair_rate(e_coarse: float, e_fine: float, ratio: float) -> float:
    # ratio: refinement factor (> 1) between the two sweep values
    return math.log(e_coarse / e_fine) / math.log(ratio)


def _attach_rates(
    alpha, sigma, sweep, errors, *, N, M, tN, variant, regime, expected
) -> list[ConvergenceRecord]:
    records = []
    for i, value in enumerate(sweep):
        if i == 0:
            rate = None
        elif regime == "final":
            rate = _pair_rate(errors[i - 1], errors[i], sweep[i] / sweep[i - 1])
        elif regime == "initial":
            rate = _pair_rate(errors[i - 1], errors[i], sweep[i - 1] / sweep[i])
        else:
            rate = _pair_rate(errors[i - 1], errors[i], sweep[i] / sweep[i - 1])

        records.append(ConvergenceRecord(
            alpha=alpha,
            sigma=sigma,
            N=value if regime == "final" else N,
            M=value if regime == "spatial" else M,
            tN=value if regime == "initial" else tN,
            variant=variant,
            max_error=float(errors[i]),
            rate=rate,
            expected_rate=expected,
        ))
    return records

# }}}


# {{{ convergence studies

def _map(func: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    # Executor.map preserves input order, so output stays deterministic
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _scheme(config: StudyConfig, N: int) -> SchemeConfig:
    return SchemeConfig(N=N, variant=config.variant, newton_tol=config.newton_tol)


def _max_error(problem, config: StudyConfig, N: int, t: float) -> float:
    trajectory = solve(problem, _scheme(config, N))
    return float(np.max(np.abs(trajectory.final - problem.exact_field(t))))


def _fine_mesh_error(config: StudyConfig, alpha, sigma, Ms, N) -> list[float]:
    lcm = math.lcm(*Ms)
    M_ref = lcm * max(1, math.ceil(20 * max(Ms) / lcm))
    ref = solve(example1(alpha, sigma, M_ref, config.T), _scheme(config, N)).final

    errors = []
    for M in Ms:
        U = solve(example1(alpha, sigma, M, config.T), _scheme(config, N)).final
        stride = M_ref // M
        errors.append(float(np.max(np.abs(U - ref[stride - 1 :: stride]))))
    return errors


def _example1_row(args) -> list[ConvergenceRecord]:
    config, alpha, sigma = args
    regime = config.regime
    expected = expected_rate(alpha, sigma, regime)
    M = config.M[0] if config.M else None
    N = config.N[0]

    if regime == "final":
        problem = example1(alpha, sigma, M, config.T)
        errors = [_max_error(problem, config, n, config.T) for n in config.N]
        sweep = config.N
    elif regime == "initial":
        errors = [
            _max_error(example1(alpha, sigma, M, t), config, N, t) for t in config.tN
        ]
        sweep = config.tN
    elif config.reference == "fine":
        errors = _fine_mesh_error(config, alpha, sigma, config.M, N)
        sweep = config.M
    else:
        errors = [
            _max_error(example1(alpha, sigma, m, config.T), config, N, config.T)
            for m in config.M
        ]
        sweep = config.M

    logger.info("example1 alpha = %g sigma = %g: %s", alpha, sigma, errors)
    return _attach_rates(
        alpha, sigma, sweep, errors, N=N, M=M,
        tN=config.T, variant=config.variant, regime=regime, expected=expected,
    )


def run_example1(config: StudyConfig, threads: int = 1) -> ConvergenceReport:
    """Errors of the manufactured-solution problem against its exact solution.

    The ``spatial`` regime compares, by default, with a fine-mesh solution at
    the same ``N`` so the temporal error cancels (``reference = "exact"``
    measures against the exact solution instead).
    """
    if config.study != "example1":
        raise ConfigError(f"run_example1 cannot run {config.study!r}")

    items = [(config, a, s) for a, s in config.rows()]
    report = ConvergenceReport(study=config.study, regime=config.regime)
    for rows in _map(_example1_row, items, threads):
        report.records.extend(rows)
    return report


def _example2_row(args) -> list[ConvergenceRecord]:
    config, alpha = args
    case = config.case
    M = config.M[0] if config.M else None

    def error_against_reference(T: float, N: int) -> float:
        problem = example2(case, alpha, M, T)
        ref = solve(problem, _scheme(config, config.ref_factor * N)).final
        U = solve(problem, _scheme(config, N)).final
        return float(np.max(np.abs(U - ref)))

    if config.regime == "final":
        problem = example2(case, alpha, M, config.T)
        N_ref = config.ref_factor * max(config.N)
        ref = solve(problem, _scheme(config, N_ref)).final
        errors = [
            float(np.max(np.abs(solve(problem, _scheme(config, n)).final - ref)))
            for n in config.N
        ]
        sweep = config.N
    else:
        errors = [error_against_reference(t, config.N[0]) for t in config.tN]
        sweep = config.tN

    M_used = example2(case, alpha, M).grid.M
    logger.info("%s alpha = %g: %s", config.study, alpha, errors)
    return _attach_rates(
        alpha, alpha, sweep, errors, N=config.N[0], M=M_used,
        tN=config.T, variant=config.variant, regime=config.regime,
        expected=expected_rate(alpha, alpha, config.regime),
    )


def run_example2(config: StudyConfig, threads: int = 1) -> ConvergenceReport:
    """Errors of the unforced problems against a reference solution.

    The reference uses ``ref_factor`` times the finest step count (at the
    final time), or ``ref_factor * N`` steps on each interval ``[0, t_N]``.
    """
    if not config.study.startswith("example2"):
        raise ConfigError(f"run_example2 cannot run {config.study!r}")

    report = ConvergenceReport(study=config.study, regime=config.regime)
    for rows in _map(_example2_row, [(config, a) for a in config.alpha], threads):
        report.records.extend(rows)
    return report

# }}}


# {{{ verification suites

KERNEL_ALPHAS = tuple(round(0.1 * i, 1) for i in range(1, 10))
TRUNCATION_ALPHAS = (0.4, 0.6)
TRUNCATION_SIGMAS = (0.4, 0.8, 1.2, 1.8)
TRUNCATION_NS = (128, 256, 512, 1024)


def kernel_suite(config: StudyConfig) -> dict:
    """Properties of the complementary weights for ``n <= n_max``.

    * ``0 < p_n < (n + 1)^(alpha - 1)``;
    * ``sum_{j=k}^n p_{n-j} a_{j-k} = 1`` for ``k in {1, ceil(n/2), n}``;
    * ``Gamma(2 - alpha) sum_{j=1}^n p_{n-j} <= n^alpha / Gamma(1 + alpha)``.
    """
    from scipy.special import gamma

    alphas = config.alpha or KERNEL_ALPHAS
    n_max = config.n_max
    cells = []
    for alpha in alphas:
        a = l1_weights(alpha, n_max).a
        p = complementary_weights(alpha, n_max).p
        n = np.arange(1, n_max + 1)

        pos = bool(np.all(p > 0))
        bound_i = bool(np.all(p[1:] < (n + 1.0) ** (alpha - 1.0)))

        # sum_{j=k}^n p_{n-j} a_{j-k} = sum_{i=0}^{n-k} p_{n-k-i} a_i
        conv = np.convolve(p, a)[: n_max + 1]
        ks_err = 0.0
        for nn in n:
            for k in {1, math.ceil(nn / 2), int(nn)}:
                ks_err = max(ks_err, abs(conv[nn - k] - 1.0))

        lhs = float(gamma(2.0 - alpha)) * np.cumsum(p[:-1])
        rhs = n**alpha / float(gamma(1.0 + alpha))
        slack_iii = float(np.max(lhs - rhs))

        cells.append({
            "alpha": alpha,
            "n_max": n_max,
            "positive": pos,
            "bound_i": bound_i,
            "identity_ii_max_error": ks_err,
            "bound_iii_max_excess": slack_iii,
            "passed": pos and bound_i and ks_err <= 1.0e-10 and slack_iii <= 1.0e-10,
        })

    return {"suite": "kernel", "cells": cells, "passed": all(c["passed"] for c in cells)}


def truncation_suite(config: StudyConfig) -> dict:
    """Stability of ``sup_n |r_n| / (tau^(sigma - alpha) n^(-kappa))`` under
    ``N``-doubling; the sup must change by less than a factor 2."""
    rows = config.rows() if (config.pairs or (config.alpha and config.sigma)) else [
        (a, s) for a in TRUNCATION_ALPHAS for s in TRUNCATION_SIGMAS
    ]
    Ns = config.N or TRUNCATION_NS
    export = Path(config.export_dir) if config.export_dir else None
    if export is not None:
        export.mkdir(parents=True, exist_ok=True)

    cells = []
    for alpha, sigma in rows:
        sups = []
        for N in Ns:
            report = truncation_errors(alpha, sigma, N, config.T)
            sups.append(report.sup_ratio)
            if export is not None:
                name = export / f"truncation_a{alpha:g}_s{sigma:g}_N{N}.csv"
                with name.open("w", newline="") as fd:
                    writer = csv.writer(fd, lineterminator="\n")
                    writer.writerow(("n", "r_n", "bound_ratio"))
                    writer.writerows((n, f"{r:.6g}", f"{q:.6g}") for n, r, q in report.rows())

        factor = sup_ratio_stability(sups)
        cells.append({
            "alpha": alpha,
            "sigma": sigma,
            "N": list(Ns),
            "sup_ratio": sups,
            "max_factor": factor,
            "passed": bool(factor < 2.0 and np.all(np.isfinite(sups)) and min(sups) > 0),
        })

    return {"suite": "truncation", "cells": cells, "passed": all(c["passed"] for c in cells)}


def gronwall_suite(config: StudyConfig) -> dict:
    """Worst-case sequences against the envelope, plus the matrix checks."""
    alphas = config.alpha or (0.3, 0.5, 0.7)
    lams = config.lams or (0.5, 1.0, 2.0)
    taus = config.taus or (1.0 / 2048, 1.0 / 1024, 1.0 / 512)
    N = config.N[0] if config.N else 512

    # reject out-of-range cells up front with the threshold error
    for alpha in alphas:
        for lam in lams:
            for tau in taus:
                GronwallParams(alpha=alpha, lam=lam, tau=tau, eta=1.0)

    envelope = envelope_grid(alphas, lams, taus, N=N, constant=config.constant)
    matrices = [
        propagation_matrix_checks(alpha, lam, tau, N).to_dict()
        for alpha in alphas for lam in lams for tau in taus
    ]

    passed = all(r["passed"] for r in envelope) and all(m["passed"] for m in matrices)
    return {
        "suite": "gronwall",
        "constant": config.constant,
        "min_constant": max(r["min_constant"] for r in envelope),
        "envelope": envelope,
        "matrix": matrices,
        "passed": passed,
    }


def spatial_suite(config: StudyConfig) -> dict:
    """Consistency order, symmetry, definiteness and solver round trips."""
    rng = np.random.default_rng(config.seed)
    Ms = config.M or (8, 16, 32, 64)

    errors = []
    for M in Ms:
        grid = SpatialGrid(1, np.pi, M)
        u = grid.sample(np.sin)
        errors.append(float(np.max(np.abs(apply_laplacian(grid, u) + u))))
    orders = [
        _pair_rate(e0, e1, m1 / m0)
        for (e0, m0), (e1, m1) in zip(zip(errors, Ms), zip(errors[1:], Ms[1:]))
    ]

    checks = []
    for dim in (1, 2):
        grid = SpatialGrid(dim, 1.0, 16)
        u, v = rng.standard_normal((2, grid.size))
        Lu, Lv = apply_laplacian(grid, u), apply_laplacian(grid, v)
        sym = abs(Lu @ v - u @ Lv) / max(abs(Lu @ v), 1e-300)
        neg = float(Lu @ u)

        x0 = rng.standard_normal(grid.size)
        c = 3.0
        rhs = c * x0 - apply_laplacian(grid, x0)
        x = solve_shifted_system(grid, c, rhs)
        roundtrip = float(np.max(np.abs(x - x0)) / np.max(np.abs(x0)))

        checks.append({
            "dim": dim,
            "symmetry_rel_error": float(sym),
            "quadratic_form": neg,
            "roundtrip_rel_error": roundtrip,
            "passed": bool(sym <= 1e-12 and neg <= 0 and roundtrip <= 1e-10),
        })

    order_ok = all(abs(o - 2.0) <= 0.05 for o in orders)
    return {
        "suite": "spatial",
        "M": list(Ms),
        "consistency_errors": errors,
        "orders": orders,
        "checks": checks,
        "passed": bool(order_ok and all(c["passed"] for c in checks)),
    }


SUITES = {
    "kernel": kernel_suite,
    "truncation": truncation_suite,
    "gronwall": gronwall_suite,
    "spatial": spatial_suite,
}


def run_verification_suites(config: StudyConfig) -> tuple[bool, dict]:
    try:
        suite = SUITES[config.study]
    except KeyError:
        raise ConfigError(f"{config.study!r} is not a verification suite") from None

    report = suite(config)
    return report["passed"], report

# }}}


# {{{ exports

def weights_csv(alpha: float, n_max: int) -> str:
    a = l1_weights(alpha, n_max).a
    p = complementary_weights(alpha, n_max).p

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("index", "a_i", "p_i"))
    writer.writerows((i, repr(float(ai)), repr(float(pi))) for i, (ai, pi) in enumerate(zip(a, p)))
    return buf.getvalue()


def run_study(config: StudyConfig, threads: int = 1):
    """Dispatch on ``config.study``; returns a report object or dictionary."""
    if config.study == "example1":
        return run_example1(config, threads)
    if config.study.startswith("example2"):
        return run_example2(config, threads)
    if config.study in SUITES:
        return run_verification_suites(config)
    if config.study == "weights":
        alpha = config.alpha[0] if config.alpha else 0.5
        return weights_csv(alpha, config.n_max)

    raise ConfigError(f"unknown study {config.study!r}")

# }}}
