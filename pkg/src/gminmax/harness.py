"""Batch experiment runner: sweep orchestration, seeding, CSV persistence.

Three experiments:

* regression_sweep: per lambda, one auxiliary solve (theory columns) and
  `trials` independent direct solves on fresh data (empirical columns with
  standard deviations), per dimension in d_grid;
* classification_sweep: per lambda, the spiked auxiliary prediction (AO
  column), the sigma = 0 isotropic auxiliary prediction (PO column, name
  kept for file compatibility), and the direct solve averaged over
  `trials` dataset seeds (POR1 column);
* checks: the comparison-inequality, Lipschitz, and concentration suites
  on a fixed instance family.

Seeding rule: every random object is addressed as (master_seed, tag,
indices...) through rngstreams, so re-running a config reproduces every
CSV bit for bit and sweep points can fan out over processes.

CSV schemas (stable, consumed by the plotting component unchanged):
  regression theory: lam,train,gen
  regression experiment: lam,train,trainstd,gen,genstd
  classification: lam,PO,POR1,AO
  gcgmt checks: t,p_phi_hat,p_phi_stderr,p_ao_scaled,p_ao_stderr,violation_sigma
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .aoclass import ClassAoSpec, predicted_class_error, solve_ao_class
from .aoreg import AoProblemSpec, AoSolverConfig, solve_ao_regression
from .checks import (
    MinMaxInstance,
    PsiBilinear,
    ball_net,
    concentration_check,
    lipschitz_check,
    mc_gcgmt_inequality,
)
from .covariance import CovarianceSpec, PsdMatrix, build
from .datagen import ConfigError, gen_correlated_means, gen_gmm, gen_regression
from .posolve import (
    classification_error,
    closed_form_gen_error,
    solve_gmm_classifier,
    solve_ridge_multisource,
)
from .rngstreams import child_seed, stream

__all__ = [
    "ExperimentConfig",
    "SweepResult",
    "load_config",
    "run_regression_sweep",
    "run_classification_sweep",
    "run_checks",
    "run_experiment",
    "EXIT_OK",
    "EXIT_CHECK_VIOLATION",
    "EXIT_SOLVER_FAILURE",
]

log = logging.getLogger("gminmax.harness")

EXIT_OK = 0
EXIT_CHECK_VIOLATION = 2
EXIT_SOLVER_FAILURE = 3

MIN_CHECK_TRIALS = 10_000


@dataclass
class ExperimentConfig:
    experiment: str
    lambda_grid: list[float]
    output_dir: str = "out"
    trials: int = 20
    master_seed: int = 0
    jobs: int = 1
    # regression knobs
    k: int = 3
    n: int = 100
    d_grid: list[int] = field(default_factory=lambda: [100])
    cov_specs: Optional[list[dict]] = None
    noise_sigmas: list[float] = field(default_factory=lambda: [0.1, 0.2, 0.3])
    theta_star: str | list[float] = "ones"
    # classification knobs
    class_d: int = 700
    class_n: int = 300
    sigma1: float = 3.0
    sigma2: float = 3.0
    sigma: float = 10.0
    r: float = 0.9
    # checks knobs
    check_trials: int = 100_000
    t_points: int = 21

    def __post_init__(self):
        if self.experiment not in ("regression_sweep", "classification_sweep", "checks"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not self.lambda_grid and self.experiment != "checks":
            raise ConfigError("lambda_grid must be non-empty")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")


@dataclass
class SweepResult:
    experiment: str
    rows: list[dict]
    files: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a TOML config; CLI flags may override individual keys."""
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:  # pragma: no cover - 3.10 path
        import tomli as tomllib
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    top = {
        key: raw[key]
        for key in ("experiment", "output_dir", "trials", "master_seed", "jobs")
        if key in raw
    }
    if "lambda_grid" in raw:
        top["lambda_grid"] = [float(x) for x in raw["lambda_grid"]]
    elif "lambda_log_grid" in raw:
        g = raw["lambda_log_grid"]
        top["lambda_grid"] = list(
            np.logspace(float(g["lo"]), float(g["hi"]), int(g["points"]))
        )
    else:
        top["lambda_grid"] = []
    reg = raw.get("regression", {})
    for src, dst in (
        ("k", "k"),
        ("n", "n"),
        ("noise_sigmas", "noise_sigmas"),
        ("theta_star", "theta_star"),
    ):
        if src in reg:
            top[dst] = reg[src]
    if "d" in reg:
        d_val = reg["d"]
        top["d_grid"] = [int(x) for x in d_val] if isinstance(d_val, list) else [int(d_val)]
    if "covariances" in reg:
        top["cov_specs"] = reg["covariances"]
    cls = raw.get("classification", {})
    for src, dst in (
        ("d", "class_d"),
        ("n", "class_n"),
        ("sigma1", "sigma1"),
        ("sigma2", "sigma2"),
        ("sigma", "sigma"),
        ("r", "r"),
    ):
        if src in cls:
            top[dst] = cls[src]
    chk = raw.get("checks", {})
    if "trials" in chk:
        top["check_trials"] = int(chk["trials"])
    if "t_points" in chk:
        top["t_points"] = int(chk["t_points"])
    return ExperimentConfig(**top)


def _cov_spec_from_dict(entry: dict, d: int) -> CovarianceSpec:
    kind = entry.get("kind", "isotropic")
    if kind == "dense":
        return CovarianceSpec(kind="dense", dim=d, matrix=tuple(map(tuple, entry["matrix"])))
    return CovarianceSpec(
        kind=kind,
        dim=d,
        sigma_base=float(entry.get("sigma_base", 1.0)),
        spike_sigma=(
            float(entry["spike_sigma"]) if kind == "spiked" and "spike_sigma" in entry else None
        ),
        spike=tuple(entry["spike"]) if "spike" in entry else None,
    )


def _default_cov_dicts(k: int) -> list[dict]:
    bases = [0.5, 0.7, 0.3]
    return [
        {"kind": "spiked", "sigma_base": bases[l % len(bases)], "spike_sigma": 1.0}
        for l in range(k)
    ]


def _theta_star(cfg: ExperimentConfig, d: int) -> np.ndarray:
    if isinstance(cfg.theta_star, str):
        if cfg.theta_star == "ones":
            return np.ones(d)
        raise ConfigError(f"unknown theta_star spec {cfg.theta_star!r}")
    arr = np.asarray(cfg.theta_star, dtype=float)
    if arr.shape != (d,):
        raise ConfigError(f"theta_star length {arr.shape} does not match d={d}")
    return arr


def _build_regression_covs(cfg: ExperimentConfig, d: int, d_idx: int) -> list[PsdMatrix]:
    entries = cfg.cov_specs or _default_cov_dicts(cfg.k)
    if len(entries) != cfg.k:
        raise ConfigError(f"need {cfg.k} covariance specs")
    covs = []
    for l, entry in enumerate(entries):
        spec = _cov_spec_from_dict(dict(entry), d)
        covs.append(build(spec, rng_seed=child_seed(cfg.master_seed, "cov_build", d_idx, l)))
    return covs


def _regression_point(args) -> dict:
    """One lambda of the regression sweep (worker-safe)."""
    cfg, d, d_idx, lam_idx, lam = args
    covs = _build_regression_covs(cfg, d, d_idx)
    theta_star = _theta_star(cfg, d)
    spec = AoProblemSpec(
        k=cfg.k,
        n=cfg.n,
        d=d,
        covariances=covs,
        noise_sigmas=np.asarray(cfg.noise_sigmas, dtype=float),
        theta_star=theta_star,
        lam=lam,
    )
    flag = ""
    try:
        solution = solve_ao_regression(spec, AoSolverConfig())
        if not solution.meta.get("converged", False):
            flag = f"ao_not_converged(lam={lam})"
        train_theory = solution.predicted_train_error
        gen_theory = solution.predicted_gen_error
    except Exception as exc:  # noqa: BLE001 - row flagged, sweep continues
        flag = f"ao_failed(lam={lam}): {exc}"
        train_theory = gen_theory = float("nan")
    train_emp, gen_emp = [], []
    for trial in range(cfg.trials):
        seed = child_seed(cfg.master_seed, "regression_trial", d_idx, lam_idx, trial)
        ds = gen_regression(
            cfg.k, cfg.n, d, covs, list(cfg.noise_sigmas), theta_star, seed=seed
        )
        fit = solve_ridge_multisource(ds, lam)
        train_emp.append(fit.training_error)
        gen_emp.append(closed_form_gen_error(fit.theta_hat, theta_star, covs, cfg.noise_sigmas))
    train_emp = np.asarray(train_emp)
    gen_emp = np.asarray(gen_emp)
    return {
        "lam": lam,
        "train_theory": train_theory,
        "gen_theory": gen_theory,
        "train_emp": float(train_emp.mean()),
        "train_std": float(train_emp.std(ddof=1)) if cfg.trials > 1 else 0.0,
        "gen_emp": float(gen_emp.mean()),
        "gen_std": float(gen_emp.std(ddof=1)) if cfg.trials > 1 else 0.0,
        "flag": flag,
    }


def _map_points(worker, tasks, jobs: int):
    if jobs <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


def run_regression_sweep(cfg: ExperimentConfig) -> list[SweepResult]:
    """One SweepResult (and one theory/experiment CSV pair) per d in d_grid."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for d_idx, d in enumerate(cfg.d_grid):
        tasks = [
            (cfg, d, d_idx, lam_idx, float(lam))
            for lam_idx, lam in enumerate(cfg.lambda_grid)
        ]
        rows = _map_points(_regression_point, tasks, cfg.jobs)
        flags = [r["flag"] for r in rows if r["flag"]]
        for flag in flags:
            log.warning("regression sweep d=%s: %s", d, flag)
        stem = f"regression_n{cfg.n}_d{d}_k{cfg.k}"
        theory_path = out / f"{stem}_theory.csv"
        exp_path = out / f"{stem}_exp.csv"
        _write_csv(
            theory_path,
            ["lam", "train", "gen"],
            [[r["lam"], r["train_theory"], r["gen_theory"]] for r in rows],
        )
        _write_csv(
            exp_path,
            ["lam", "train", "trainstd", "gen", "genstd"],
            [
                [r["lam"], r["train_emp"], r["train_std"], r["gen_emp"], r["gen_std"]]
                for r in rows
            ],
        )
        results.append(
            SweepResult(
                experiment="regression_sweep",
                rows=rows,
                files=[str(theory_path), str(exp_path)],
                flags=flags,
            )
        )
    return results


def _classification_point(args) -> dict:
    cfg, lam_idx, lam = args
    d, n = cfg.class_d, cfg.class_n
    flag = ""
    try:
        spiked = ClassAoSpec(
            n=n, d=d, lam=lam, r=cfg.r, kind="spiked",
            sigma1=cfg.sigma1, sigma2=cfg.sigma2, sigma=cfg.sigma,
        )
        params, _ = solve_ao_class(spiked)
        ao_error = predicted_class_error(params, n)
        iso = ClassAoSpec(
            n=n, d=d, lam=lam, r=cfg.r, kind="spiked",
            sigma1=cfg.sigma1, sigma2=cfg.sigma2, sigma=0.0,
        )
        params_iso, _ = solve_ao_class(iso)
        iso_error = predicted_class_error(params_iso, n)
    except Exception as exc:  # noqa: BLE001
        flag = f"ao_failed(lam={lam}): {exc}"
        ao_error = iso_error = float("nan")
    po_errors = []
    for trial in range(cfg.trials):
        seed = child_seed(cfg.master_seed, "classification_trial", trial)
        mu1, mu2 = gen_correlated_means(d, cfg.r, seed=child_seed(seed, "means"))
        cov1 = build(
            CovarianceSpec("spiked", d, sigma_base=cfg.sigma1, spike_sigma=cfg.sigma),
            rng_seed=child_seed(seed, "spike", 0),
        )
        cov2 = build(
            CovarianceSpec("spiked", d, sigma_base=cfg.sigma2, spike_sigma=cfg.sigma),
            rng_seed=child_seed(seed, "spike", 1),
        )
        ds = gen_gmm(n, d, mu1, mu2, cov1, cov2, seed=child_seed(seed, "gmm"))
        fit = solve_gmm_classifier(ds, lam)
        po_errors.append(classification_error(fit.w_hat, mu1, mu2, cov1, cov2))
    return {
        "lam": lam,
        "ao_error": ao_error,
        "po_error": float(np.mean(po_errors)),
        "po_error_isotropic": iso_error,
        "flag": flag,
    }


def run_classification_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Columns: PO = sigma->0 auxiliary prediction (file-compatible name),
    POR1 = direct solve on spiked data, AO = spiked auxiliary prediction."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, lam_idx, float(lam)) for lam_idx, lam in enumerate(cfg.lambda_grid)]
    rows = _map_points(_classification_point, tasks, cfg.jobs)
    flags = [r["flag"] for r in rows if r["flag"]]
    for flag in flags:
        log.warning("classification sweep: %s", flag)
    path = Path(cfg.output_dir) / f"classification_d{cfg.class_d}_n{cfg.class_n}.csv"
    _write_csv(
        path,
        ["lam", "PO", "POR1", "AO"],
        [[r["lam"], r["po_error_isotropic"], r["po_error"], r["ao_error"]] for r in rows],
    )
    return SweepResult(
        experiment="classification_sweep", rows=rows, files=[str(path)], flags=flags
    )


def default_check_instances(master_seed: int = 0) -> list[MinMaxInstance]:
    """Five fixed instances (k in {1, 2}) for the inequality suite."""
    instances = []

    def points(tag, idx, count, dim, scale=1.0):
        return scale * stream(master_seed, tag, idx).standard_normal((count, dim))

    # 1: k=1, isotropic, pure bilinear psi
    instances.append(
        MinMaxInstance(
            k=1, d=2, n_list=[2],
            S_w=points("inst_w", 1, 6, 2),
            S_v_blocks=[points("inst_v", 1, 5, 2)],
            covariances=[build(CovarianceSpec("isotropic", 2, sigma_base=1.0))],
            psi=PsiBilinear((0.4 * np.ones((2, 2)),), c_w=0.3, c_v=0.2),
        )
    )
    # 2: k=1, spiked covariance, zero psi
    instances.append(
        MinMaxInstance(
            k=1, d=3, n_list=[2],
            S_w=points("inst_w", 2, 5, 3),
            S_v_blocks=[points("inst_v", 2, 4, 2)],
            covariances=[
                build(
                    CovarianceSpec("spiked", 3, sigma_base=0.6, spike_sigma=1.0),
                    rng_seed=child_seed(master_seed, "inst_cov", 2),
                )
            ],
        )
    )
    # 3: k=2, mixed isotropic/spiked, bilinear psi
    p1 = 0.3 * stream(master_seed, "inst_psi", 3).standard_normal((2, 2))
    p2 = 0.3 * stream(master_seed, "inst_psi", 31).standard_normal((2, 2))
    instances.append(
        MinMaxInstance(
            k=2, d=2, n_list=[2, 2],
            S_w=points("inst_w", 3, 5, 2),
            S_v_blocks=[points("inst_v", 3, 4, 2), points("inst_v", 31, 4, 2)],
            covariances=[
                build(CovarianceSpec("isotropic", 2, sigma_base=1.0)),
                build(
                    CovarianceSpec("spiked", 2, sigma_base=0.5, spike_sigma=1.0),
                    rng_seed=child_seed(master_seed, "inst_cov", 3),
                ),
            ],
            psi=PsiBilinear((p1, p2), c_w=0.25, c_v=0.25),
        )
    )
    # 4: k=2, dense covariances, unequal dual dims
    def dense_cov(idx, dim):
        a = stream(master_seed, "inst_dense", idx).standard_normal((dim, dim))
        return build(CovarianceSpec("dense", dim, matrix=tuple(map(tuple, a @ a.T / dim))))

    p1 = 0.2 * stream(master_seed, "inst_psi", 4).standard_normal((3, 3))
    p2 = 0.2 * stream(master_seed, "inst_psi", 41).standard_normal((3, 2))
    instances.append(
        MinMaxInstance(
            k=2, d=3, n_list=[3, 2],
            S_w=points("inst_w", 4, 4, 3),
            S_v_blocks=[points("inst_v", 4, 3, 3), points("inst_v", 41, 4, 2)],
            covariances=[dense_cov(4, 3), dense_cov(41, 3)],
            psi=PsiBilinear((p1, p2), c_w=0.1, c_v=0.4),
        )
    )
    # 5: k=2, scaled isotropic, larger dual net
    instances.append(
        MinMaxInstance(
            k=2, d=2, n_list=[2, 3],
            S_w=points("inst_w", 5, 5, 2),
            S_v_blocks=[points("inst_v", 5, 4, 2), points("inst_v", 51, 5, 3)],
            covariances=[
                build(CovarianceSpec("isotropic", 2, sigma_base=2.0)),
                build(CovarianceSpec("isotropic", 2, sigma_base=0.7)),
            ],
            psi=PsiBilinear(
                (np.zeros((2, 2)), np.zeros((2, 3))), c_w=0.5, c_v=0.5
            ),
        )
    )
    return instances


def with_random_maps(inst: MinMaxInstance, seed: int) -> MinMaxInstance:
    """Copy an instance with random smooth nonlinear alpha/beta maps
    (componentwise tanh of random affine transforms)."""
    rng = stream(seed, "random_maps")

    def make_map(dim):
        a = rng.standard_normal((dim, dim)) / np.sqrt(dim)
        b = 0.3 * rng.standard_normal(dim)

        def apply(x, a=a, b=b):
            x = np.asarray(x, dtype=float)
            return np.tanh(x @ a.T + b)

        return apply

    return MinMaxInstance(
        k=inst.k,
        d=inst.d,
        n_list=list(inst.n_list),
        S_w=inst.S_w,
        S_v_blocks=list(inst.S_v_blocks),
        covariances=list(inst.covariances),
        psi=inst.psi,
        alpha_maps=[make_map(inst.d) for _ in range(inst.k)],
        beta_maps=[make_map(n) for n in inst.n_list],
    )


def _phi_samples(inst: MinMaxInstance, count: int, rng) -> np.ndarray:
    from .checks import auxiliary_value

    vals = np.empty(count)
    for t in range(count):
        g = [rng.standard_normal(inst.d) for _ in range(inst.k)]
        h = [rng.standard_normal(n) for n in inst.n_list]
        vals[t] = auxiliary_value(inst, g, h)
    return vals


def pilot_t_grid(inst: MinMaxInstance, seed: int, points: int = 21, pilot: int = 2000):
    """t grid spanning mean +- 4 std of phi from a pilot batch."""
    vals = _phi_samples(inst, pilot, stream(seed, "pilot_phi"))
    lo = vals.mean() - 4.0 * vals.std()
    hi = vals.mean() + 4.0 * vals.std()
    return np.linspace(lo, hi, points)


def lipschitz_instances(master_seed: int = 0) -> list[MinMaxInstance]:
    """Sphere-net instances for the Lipschitz/concentration suite (surface
    nets keep the bound identical and give the sampled ratios power)."""
    net_w = ball_net(1.0, 3, 1000, child_seed(master_seed, "lip_w"), surface=True)
    net_v = ball_net(1.0, 3, 1000, child_seed(master_seed, "lip_v"), surface=True)
    iso = build(CovarianceSpec("isotropic", 3, sigma_base=1.0))
    scaled = build(CovarianceSpec("isotropic", 3, sigma_base=2.0))
    dense = build(
        CovarianceSpec("spiked", 3, sigma_base=0.5, spike_sigma=0.8),
        rng_seed=child_seed(master_seed, "lip_cov"),
    )
    return [
        MinMaxInstance(
            k=1, d=3, n_list=[3], S_w=net_w, S_v_blocks=[net_v], covariances=[iso]
        ),
        MinMaxInstance(
            k=1, d=3, n_list=[3], S_w=net_w, S_v_blocks=[net_v], covariances=[scaled]
        ),
        MinMaxInstance(
            k=2,
            d=3,
            n_list=[3, 3],
            S_w=net_w,
            S_v_blocks=[
                ball_net(0.8, 3, 700, child_seed(master_seed, "lip_v2"), surface=True),
                ball_net(0.6, 3, 700, child_seed(master_seed, "lip_v3"), surface=True),
            ],
            covariances=[iso, dense],
        ),
    ]


def run_checks(cfg: ExperimentConfig) -> tuple[int, list[str]]:
    """Run every verification suite; exit 2 on any violation."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []
    ok = True
    trials = cfg.check_trials
    if trials < MIN_CHECK_TRIALS:
        log.warning(
            "check_trials=%d is below %d; statistical power will be poor",
            trials,
            MIN_CHECK_TRIALS,
        )

    # Covariance-gap / variance-match sweep, half with nonlinear maps
    worst_gap = 0.0
    worst_var = 0.0
    instances = default_check_instances(cfg.master_seed)
    mapped = [
        with_random_maps(inst, child_seed(cfg.master_seed, "gap_maps", i))
        for i, inst in enumerate(instances)
    ]
    rng = stream(cfg.master_seed, "gap_sweep")
    from .checks import covariance_gap, variance_match

    pool = instances + mapped
    for rep in range(10_000 // 10):
        inst = pool[rep % len(pool)]
        for _ in range(10):
            w = rng.standard_normal(inst.d)
            w_p = rng.standard_normal(inst.d)
            v = [rng.standard_normal(n) for n in inst.n_list]
            v_p = [rng.standard_normal(n) for n in inst.n_list]
            gap = covariance_gap(inst, w, w_p, v, v_p)
            ex2, ey2 = variance_match(inst, w, v)
            worst_gap = min(worst_gap, gap)
            worst_var = max(worst_var, abs(ex2 - ey2) / max(ex2, 1.0))
    gap_ok = worst_gap >= -1e-12 and worst_var <= 1e-12
    ok &= gap_ok
    path = out / "covariance_gap.csv"
    _write_csv(path, ["min_gap", "max_variance_mismatch"], [[worst_gap, worst_var]])
    files.append(str(path))
    log.info("covariance gap sweep: min gap %.3e, variance mismatch %.3e", worst_gap, worst_var)

    # Comparison-inequality Monte-Carlo
    for idx, inst in enumerate(instances):
        t_grid = pilot_t_grid(inst, child_seed(cfg.master_seed, "tgrid", idx), cfg.t_points)
        report = mc_gcgmt_inequality(
            inst, t_grid, trials, seed=child_seed(cfg.master_seed, "gcgmt", idx)
        )
        path = out / f"gcgmt_instance{idx}.csv"
        _write_rows_csv(path, report.rows())
        files.append(str(path))
        if not report.passed():
            ok = False
            worst = report.max_violation_sigma()
            offending = report.t_grid[int(np.argmax(report.violation_sigma))]
            log.error(
                "inequality violation on instance %d (seed %d): %.2f sigma at t=%.4f",
                idx,
                cfg.master_seed,
                worst,
                offending,
            )

    # Lipschitz and concentration
    lips = lipschitz_instances(cfg.master_seed)
    lip_rows = []
    for idx, inst in enumerate(lips):
        report = lipschitz_check(inst, 1000, seed=child_seed(cfg.master_seed, "lip", idx))
        lip_rows.append(
            {
                "instance": idx,
                "max_ratio": report.max_ratio,
                "bound": report.bound,
                "n_pairs": report.n_pairs,
            }
        )
        if not report.passed():
            ok = False
            log.error(
                "Lipschitz violation on instance %d: ratio %.6f > bound %.6f",
                idx,
                report.max_ratio,
                report.bound,
            )
        conc_trials = min(trials, 10_000)
        conc_seed = child_seed(cfg.master_seed, "conc", idx)
        # epsilon grid spanning 0.5-4 sample standard deviations of phi
        probe = _phi_samples(inst, 500, stream(conc_seed, "std_probe"))
        eps_grid = np.linspace(0.5, 4.0, 6) * probe.std()
        report_c = concentration_check(inst, conc_trials, eps_grid, seed=conc_seed)
        path = out / f"concentration_instance{idx}.csv"
        _write_rows_csv(path, report_c.rows())
        files.append(str(path))
        if not report_c.passed():
            ok = False
            offending = report_c.epsilon_grid[
                int(np.argmax(report_c.frequency - report_c.bound - 3 * report_c.stderr))
            ]
            log.error(
                "concentration violation on instance %d at eps=%.4f", idx, offending
            )
    path = out / "lipschitz.csv"
    _write_rows_csv(path, lip_rows)
    files.append(str(path))

    return (EXIT_OK if ok else EXIT_CHECK_VIOLATION), files


def run_experiment(cfg: ExperimentConfig) -> int:
    try:
        if cfg.experiment == "regression_sweep":
            results = run_regression_sweep(cfg)
            return EXIT_OK if all(not r.flags for r in results) else EXIT_SOLVER_FAILURE
        if cfg.experiment == "classification_sweep":
            result = run_classification_sweep(cfg)
            return EXIT_OK if not result.flags else EXIT_SOLVER_FAILURE
        status, _ = run_checks(cfg)
        return status
    except Exception:  # noqa: BLE001
        log.exception("experiment failed")
        return EXIT_SOLVER_FAILURE


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _write_rows_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    header = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[key]) for key in header])


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)
