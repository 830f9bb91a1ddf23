"""Experiment runners behind the CLI subcommands.

Each runner takes a validated :class:`~gpbayes.config.ExperimentConfig`
and an output directory, runs deterministically under the configured
seed, and writes CSV files (with ``.meta`` siblings) plus key-value
summaries. No plotting: outputs are plain tables.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .bayes import (
    BayesProblem,
    Darcy1D,
    GaussianDiagPrior,
    Identity,
    LogNormalDiagPrior,
    NoiseModel,
    Scalar1D,
    UniformBoxPrior,
    evidence,
    posterior_density_on_grid,
    posterior_log_density,
    solve_darcy,
)
from .design import (
    GaussianDesign,
    PosteriorTruncatedDesign,
    UniformBoxDesign,
    fill_decay_study,
    sample_design,
)
from .gp import (
    GPPrior,
    fit,
    fit_hyperparameters,
    predict_mean,
    predict_var,
    sample_paths_on_grid,
)
from .kernels import KernelSpec
from .mcmc import chain_diagnostics, metropolis_hastings, random_walk_proposal
from .metrics import design_error_study, hellinger, weighted_L2_error
from .reporting import write_csv, write_keyvalues, write_meta
from .surrogate import SurrogatePosterior, emulate_forward, emulate_phi
from .util import split_seed


def _kernel_from_config(cfg) -> KernelSpec:
    k = cfg.values["kernel"]
    return KernelSpec(k["family"], k["lengthscale"], k["variance"])


def _emit(cfg, out_dir: Path, name: str, header, rows, extra=None):
    path = out_dir / name
    write_csv(path, header, rows)
    write_meta(
        path.with_suffix(path.suffix + ".meta"),
        seed=cfg.get("experiment", "seed"),
        config_digest=cfg.digest(),
        extra=extra,
    )


# ---------------------------------------------------------------------------
# sample-paths
# ---------------------------------------------------------------------------

PRIOR_PANELS = (
    ("matern12", 1.0),
    ("matern12", 0.1),
    ("sqexp", 1.0),
    ("sqexp", 0.1),
)


def run_sample_paths(cfg, out_dir: Path):
    seed = cfg.get("experiment", "seed")
    g = cfg.values["grid"]
    grid = np.linspace(g["lo"], g["hi"], g["points"])
    n_paths = cfg.get("paths", "count")

    for panel, (family, lam) in enumerate(PRIOR_PANELS):
        prior = GPPrior(KernelSpec(family, lengthscale=lam, variance=1.0))
        draws = sample_paths_on_grid(prior, grid, n_paths, split_seed(seed, panel))
        rows = [
            [float(x), 0.0, 1.0, *[float(draws[s, i]) for s in range(n_paths)]]
            for i, x in enumerate(grid)
        ]
        header = ["x", "mean", "std"] + [f"sample_{s + 1}" for s in range(n_paths)]
        tag = f"{family}_lam{lam:g}".replace(".", "p")
        _emit(cfg, out_dir, f"prior_paths_{tag}.csv", header, rows)

    # conditioned panels: a small design on a named test function with
    # maximum-likelihood hyperparameters per family
    c = cfg.values["conditioning"]
    from .bayes import SCALAR_FUNCTIONS

    if c["function"] not in SCALAR_FUNCTIONS:
        raise ValueError(f"unknown conditioning function {c['function']!r}")
    fun = SCALAR_FUNCTIONS[c["function"]]
    design = np.asarray(c["design"], dtype=np.float64)
    values = np.asarray([fun(x) for x in design])
    for panel, family in enumerate(("matern12", "sqexp")):
        spec = fit_hyperparameters(family, design, values)
        post = fit(GPPrior(spec), design, values)
        draws = sample_paths_on_grid(post, grid, n_paths, split_seed(seed, 10 + panel))
        mean = predict_mean(post, grid)
        sd = np.sqrt(predict_var(post, grid))
        rows = [
            [float(x), float(mean[i]), float(sd[i]),
             *[float(draws[s, i]) for s in range(n_paths)]]
            for i, x in enumerate(grid)
        ]
        header = ["x", "mean", "std"] + [f"sample_{s + 1}" for s in range(n_paths)]
        _emit(
            cfg, out_dir, f"conditioned_paths_{family}.csv", header, rows,
            extra={"fitted_lengthscale": spec.lengthscale, "fitted_variance": spec.variance},
        )


# ---------------------------------------------------------------------------
# regress
# ---------------------------------------------------------------------------


def run_regress(cfg, out_dir: Path):
    from .bayes import SCALAR_FUNCTIONS

    seed = cfg.get("experiment", "seed")
    r = cfg.values["regress"]
    g = cfg.values["grid"]
    if r["function"] not in SCALAR_FUNCTIONS:
        raise ValueError(f"unknown regression function {r['function']!r}")
    fun = SCALAR_FUNCTIONS[r["function"]]
    design = np.asarray(r["design"], dtype=np.float64)
    values = np.asarray([fun(x) for x in design])

    k = cfg.values["kernel"]
    if k["fit"]:
        spec = fit_hyperparameters(
            k["family"], design, values,
            lengthscale_bounds=tuple(k["lengthscale_bounds"]),
            variance_bounds=tuple(k["variance_bounds"]),
            noise_variance=r["noise_variance"],
        )
    else:
        spec = _kernel_from_config(cfg)
    post = fit(GPPrior(spec), design, values, r["noise_variance"])

    grid = np.linspace(g["lo"], g["hi"], g["points"])
    mean = predict_mean(post, grid)
    sd = np.sqrt(predict_var(post, grid))
    header = ["x", "mean", "std"]
    columns = [grid, mean, sd]
    if r["n_paths"] > 0:
        draws = sample_paths_on_grid(post, grid, r["n_paths"], split_seed(seed, 0))
        header += [f"sample_{s + 1}" for s in range(r["n_paths"])]
        columns += [draws[s] for s in range(r["n_paths"])]
    rows = [[float(col[i]) for col in columns] for i in range(grid.size)]
    _emit(
        cfg, out_dir, "predictions.csv", header, rows,
        extra={"lengthscale": spec.lengthscale, "variance": spec.variance},
    )


# ---------------------------------------------------------------------------
# invert
# ---------------------------------------------------------------------------


def _build_prior(cfg):
    p = cfg.values["prior"]
    if p["type"] == "gaussian":
        return GaussianDiagPrior(p["means"], p["variances"])
    if p["type"] == "uniform":
        return UniformBoxPrior(p["lower"], p["upper"])
    return LogNormalDiagPrior(p["log_means"], p["log_variances"])


def _build_forward(cfg):
    f = cfg.values["forward"]
    if f["type"] == "identity":
        return Identity(f["dim"])
    if f["type"] == "scalar1d":
        return Scalar1D(f["function"])
    return Darcy1D(
        breakpoints=f["breakpoints"],
        observe_at=f["observe_at"],
        grid_size=f["grid_size"],
        p_left=f["p_left"],
        p_right=f["p_right"],
        source=f["source"],
    )


def _build_problem(cfg) -> BayesProblem:
    forward = _build_forward(cfg)
    prior = _build_prior(cfg)
    noise = NoiseModel(cfg.get("noise", "gamma_diag"))
    d = cfg.values["data"]
    if d["y"] is not None:
        y = np.asarray(d["y"], dtype=np.float64)
    else:
        true_u = np.asarray(d["synthesize_true_u"], dtype=np.float64)
        rng = np.random.default_rng(d["synthesize_noise_seed"])
        y = forward(true_u) + noise.sample(rng)
    dom = cfg.values["domain"]
    box = None
    if dom["box_lo"] is not None and dom["box_hi"] is not None:
        box = (np.asarray(dom["box_lo"]), np.asarray(dom["box_hi"]))
    return BayesProblem(forward, y, noise, prior, domain_box=box)


def _design_measure_for_surrogate(cfg, problem, z, density_max):
    s = cfg.values["surrogate"]
    kind = s["design_measure"]
    if kind == "prior":
        return None  # draw straight from the prior
    if kind == "gaussian":
        return GaussianDesign(s["design_center"], s["design_sd"])
    if kind == "uniform":
        return UniformBoxDesign(s["design_lower"], s["design_upper"])
    # posterior-truncated: keep only where the normalized posterior density
    # exceeds the threshold (absolute, or the rule c * N^(-2 tau / d))
    if s["threshold"] is not None:
        thr = s["threshold"]
    elif s["threshold_rule_c"] is not None:
        thr = s["threshold_rule_c"] * s["n_train"] ** (
            -2.0 * s["threshold_rule_tau"] / problem.dim
        )
    else:
        thr = 0.01 * density_max

    # Sampling follows a tempered posterior on the kept region: power 1
    # reproduces the posterior, power 0 is uniform on the region. The
    # default 0.5 oversamples the tails, which keeps the fill distance
    # balanced against the square root of the density.
    power = s["design_density_power"]

    def reference(u):
        return float(np.exp(power * posterior_log_density(problem, u, z)))

    return PosteriorTruncatedDesign(
        reference, thr**power if thr > 0 else 0.0,
        (problem.domain_lo, problem.domain_hi),
        scan_resolution=512 if problem.dim == 1 else 128,
    )


def run_invert(cfg, out_dir: Path):
    seed = cfg.get("experiment", "seed")
    problem = _build_problem(cfg)
    if problem.dim > 2:
        raise ValueError("invert experiments support 1-d and 2-d parameters")
    n_quad = cfg.get("domain", "quad_points")
    grid = problem.quadrature_grid(n_quad)

    z = evidence(problem, "quadrature", n_nodes=n_quad).value
    true_density = posterior_density_on_grid(problem, grid, z)
    density_max = float(np.max(true_density))

    # train the emulator on design points from the configured measure
    s = cfg.values["surrogate"]
    measure = _design_measure_for_surrogate(cfg, problem, z, density_max)
    if measure is None:
        rng = np.random.default_rng(split_seed(seed, 1))
        design = problem.prior.sample(s["n_train"], rng)
    else:
        design = sample_design(measure, s["n_train"], split_seed(seed, 1))

    k = cfg.values["kernel"]
    if k["fit"]:
        # shared kernel across outputs: fit on the misfit for a misfit
        # emulator, on the first output otherwise
        if s["target"] == "phi":
            train_vals = problem.neg_log_likelihood_many(design)
        else:
            train_vals = np.array([problem.forward(p)[0] for p in design])
        spec = fit_hyperparameters(
            k["family"], design, train_vals,
            lengthscale_bounds=tuple(k["lengthscale_bounds"]),
            variance_bounds=tuple(k["variance_bounds"]),
        )
    else:
        spec = _kernel_from_config(cfg)

    if s["target"] == "phi":
        target = emulate_phi(problem, spec, design)
    else:
        target = emulate_forward(problem, spec, design)
    surr = SurrogatePosterior(
        problem, target, s["kind"],
        sample_seed=s["sample_seed"] if s["kind"] == "sample" else None,
    )
    surr.normalize("quadrature", n_nodes=n_quad)
    surr_density = surr.density_on_grid(grid)

    hell = hellinger(true_density, surr_density, grid)

    # MH chains on the surrogate and (optionally) the true posterior
    m = cfg.values["mcmc"]
    if m["init"] is not None:
        init = np.asarray(m["init"], dtype=np.float64)
    elif problem.dim == 1:
        init = np.array([grid[int(np.argmax(true_density))]])
    else:
        ij = np.unravel_index(int(np.argmax(true_density)), true_density.shape)
        init = np.array([grid[0][ij[0]], grid[1][ij[1]]])
    step = m["step_size"] if m["step_size"] is not None else [2.4 / np.sqrt(problem.dim)]
    proposal = random_walk_proposal(step)
    burn = int(m["burn_in_fraction"] * m["steps"])

    chains = {"surrogate": (lambda u: surr.unnormalized_log_density(u), split_seed(seed, 2))}
    if m["run_true_chain"]:
        chains["true"] = (lambda u: problem.log_unnormalized_posterior(u), split_seed(seed, 3))

    summary = {
        "evidence_true": z,
        "evidence_surrogate": surr.z,
        "hellinger_true_vs_surrogate": hell,
        "n_train": s["n_train"],
        "surrogate_kind": s["kind"],
        "surrogate_target": s["target"],
        "kernel_family": spec.family,
        "kernel_lengthscale": spec.lengthscale,
        "kernel_variance": spec.variance,
    }
    for name, (log_target, chain_seed) in chains.items():
        chain = metropolis_hastings(log_target, proposal, init, m["steps"], chain_seed)
        stats = chain_diagnostics(chain, burn)
        rows = [
            [i, *[float(v) for v in chain.samples[i]],
             float(chain.log_densities[i]), int(chain.accepted[i])]
            for i in range(len(chain))
        ]
        header = (
            ["iteration"]
            + [f"u_{j}" for j in range(problem.dim)]
            + ["log_density", "accepted"]
        )
        _emit(cfg, out_dir, f"chain_{name}.csv", header, rows)
        diag = {"burn_in": burn, **stats.as_dict()}
        write_keyvalues(out_dir / f"diagnostics_{name}.txt", diag)
        summary[f"acceptance_rate_{name}"] = stats.acceptance_rate
        for j in range(problem.dim):
            summary[f"posterior_mean_{name}_{j}"] = float(stats.mean[j])
            summary[f"posterior_sd_{name}_{j}"] = float(np.sqrt(stats.variance[j]))

    # density table
    if problem.dim == 1:
        rows = [
            [float(grid[i]), float(true_density[i]), float(surr_density[i])]
            for i in range(grid.size)
        ]
        header = ["u", "true_density", "surrogate_density"]
    else:
        ax, ay = grid
        rows = [
            [float(ax[i]), float(ay[j]), float(true_density[i, j]), float(surr_density[i, j])]
            for i in range(ax.size)
            for j in range(ay.size)
        ]
        header = ["u_0", "u_1", "true_density", "surrogate_density"]
    _emit(cfg, out_dir, "densities.csv", header, rows)

    summary["forward_evals_total"] = problem.forward.eval_count
    write_keyvalues(out_dir / "summary.txt", summary)
    return summary


# ---------------------------------------------------------------------------
# design-study (fill-distance decay)
# ---------------------------------------------------------------------------


def run_design_study(cfg, out_dir: Path):
    seed = cfg.get("experiment", "seed")
    m = cfg.values["measure"]
    if m["type"] == "uniform":
        measure = UniformBoxDesign(m["lower"], m["upper"])
    else:
        measure = GaussianDesign(m["center"], m["sd"])
    region = (
        np.asarray(cfg.get("region", "box_lo"), dtype=np.float64),
        np.asarray(cfg.get("region", "box_hi"), dtype=np.float64),
    )
    st = cfg.values["study"]
    study = fill_decay_study(
        measure, region, st["n_list"], st["replications"], seed,
        resolution=st["resolution"], tail_threshold=st["tail_threshold"],
    )
    _emit(
        cfg, out_dir, "fill_samples.csv",
        ["N", "replicate", "h"],
        [[n, r, float(h)] for n, r, h in study.samples],
    )
    _emit(
        cfg, out_dir, "fill_summary.csv",
        ["N", "mean_h", "q10", "q90"],
        [[row.n, row.mean_h, row.q10, row.q90] for row in study.rows],
    )
    write_keyvalues(
        out_dir / "fill_study.txt",
        {
            "loglog_slope": study.slope,
            "tail_threshold": study.tail_threshold,
            **{f"tail_prob_N{row.n}": row.tail_prob for row in study.rows},
        },
    )
    return study


# ---------------------------------------------------------------------------
# replicated design-error studies
# ---------------------------------------------------------------------------


def _gauss_pdf(center, sd):
    def pdf(x):
        return float(np.exp(-0.5 * ((x - center) / sd) ** 2) / (sd * np.sqrt(2 * np.pi)))

    return pdf


def run_design_study_gaussian(cfg, out_dir: Path):
    """Replicated error study: f(u)=u, weight N(1,1), designs N(1, sigma^2)."""
    seed = cfg.get("experiment", "seed")
    st = cfg.values["study"]
    sigmas = np.geomspace(st["sigma_lo"], st["sigma_hi"], st["sigma_count"])
    measures = [(float(s), GaussianDesign([1.0], [float(s)])) for s in sigmas]
    report = design_error_study(
        f=lambda x: np.asarray(x),
        kernel=_kernel_from_config(cfg),
        weight_density=_gauss_pdf(1.0, 1.0),
        measures=measures,
        n_list=st["n_list"],
        replications=st["replications"],
        seed=seed,
        support=(1.0 - 8.0, 1.0 + 8.0),
        quad_points=st["quad_points"],
    )
    _emit(
        cfg, out_dir, "error_report.csv",
        ["N", "measure_param", "e_estimate", "std_error", "resamples"],
        report.rows,
        extra={"n_warnings": len(report.warnings)},
    )
    return report


def run_design_study_uniform(cfg, out_dir: Path):
    """Replicated error study: f(u)=u, weight U[-1,1], designs U[-eps, eps]."""
    seed = cfg.get("experiment", "seed")
    st = cfg.values["study"]
    measures = [
        (float(e), UniformBoxDesign([-float(e)], [float(e)])) for e in st["epsilons"]
    ]
    report = design_error_study(
        f=lambda x: np.asarray(x),
        kernel=_kernel_from_config(cfg),
        weight_density=lambda x: 0.5 if -1.0 <= x <= 1.0 else 0.0,
        measures=measures,
        n_list=st["n_list"],
        replications=st["replications"],
        seed=seed,
        support=(-1.0, 1.0),
        quad_points=st["quad_points"],
    )
    _emit(
        cfg, out_dir, "error_report.csv",
        ["N", "measure_param", "e_estimate", "std_error", "resamples"],
        report.rows,
        extra={"n_warnings": len(report.warnings)},
    )
    return report


# ---------------------------------------------------------------------------
# hellinger-convergence (bounded-ratio tables)
# ---------------------------------------------------------------------------


def phi_convergence_table(problem, kernel, span, n_list, n_quad=4096):
    """Posterior-error vs misfit-error table for misfit emulators.

    For each design size: Hellinger distances of the mean-based and
    marginal surrogates to the true posterior, the posterior-weighted L2
    error of the emulated misfit, and the posterior-weighted L2 norm of
    the predictive standard deviation.
    """
    z = evidence(problem, "quadrature", n_nodes=n_quad).value
    grid = problem.quadrature_grid(n_quad)
    true_density = posterior_density_on_grid(problem, grid, z)
    phi_grid = problem.neg_log_likelihood_many(grid)
    rows = []
    for n in n_list:
        design = np.linspace(span[0], span[1], n)
        emu = emulate_phi(problem, kernel, design)
        mean_s = SurrogatePosterior(problem, emu, "mean").normalize(n_nodes=n_quad)
        marg_s = SurrogatePosterior(problem, emu, "marginal").normalize(n_nodes=n_quad)
        h_mean = hellinger(true_density, mean_s.density_on_grid(grid), grid)
        h_marg = hellinger(true_density, marg_s.density_on_grid(grid), grid)
        m_grid = predict_mean(emu.gp, grid)
        sd_grid = np.sqrt(predict_var(emu.gp, grid))
        l2_phi = weighted_L2_error(phi_grid, m_grid, true_density, grid)
        knorm = weighted_L2_error(sd_grid, np.zeros_like(sd_grid), true_density, grid)
        rows.append((int(n), h_mean, h_marg, l2_phi, knorm))
    return rows


def forward_convergence_table(problem, kernel, span, n_list, n_quad=4096):
    """Same table for component-wise forward-map emulators (d_y outputs)."""
    z = evidence(problem, "quadrature", n_nodes=n_quad).value
    grid = problem.quadrature_grid(n_quad)
    true_density = posterior_density_on_grid(problem, grid, z)
    rows = []
    for n in n_list:
        design = np.linspace(span[0], span[1], n)
        emu = emulate_forward(problem, kernel, design)
        mean_s = SurrogatePosterior(problem, emu, "mean").normalize(n_nodes=n_quad)
        marg_s = SurrogatePosterior(problem, emu, "marginal").normalize(n_nodes=n_quad)
        h_mean = hellinger(true_density, mean_s.density_on_grid(grid), grid)
        h_marg = hellinger(true_density, marg_s.density_on_grid(grid), grid)
        sum_l2 = 0.0
        for j, gp in enumerate(emu.gps):
            g_grid = np.array([problem.forward(u)[j] for u in np.atleast_2d(grid.reshape(-1, 1))])
            m_grid = predict_mean(gp, grid)
            sum_l2 += weighted_L2_error(g_grid, m_grid, true_density, grid)
        sd_grid = np.sqrt(predict_var(emu.gps[0], grid))
        knorm = weighted_L2_error(sd_grid, np.zeros_like(sd_grid), true_density, grid)
        rows.append((int(n), h_mean, h_marg, sum_l2, knorm))
    return rows


def conjugate_scalar_problem() -> BayesProblem:
    """G(u)=u, prior N(0,1), Gamma=1, y=1: posterior N(1/2, 1/2)."""
    return BayesProblem(Identity(1), [1.0], NoiseModel([1.0]),
                        GaussianDiagPrior([0.0], [1.0]))


class _SquareMap(Identity):
    """Two-output forward map (u, u^2) for component-wise emulation."""

    def __init__(self):
        super().__init__(1)
        self.d_out = 2

    def _evaluate(self, u):
        return np.array([u[0], u[0] ** 2])


def two_output_problem() -> BayesProblem:
    return BayesProblem(_SquareMap(), [1.0, 1.0], NoiseModel([1.0, 1.0]),
                        GaussianDiagPrior([0.0], [1.0]))


def run_hellinger_convergence(cfg, out_dir: Path):
    st = cfg.values["study"]
    kernel = _kernel_from_config(cfg)
    span = (st["design_lo"], st["design_hi"])

    phi_rows = phi_convergence_table(conjugate_scalar_problem(), kernel, span, st["n_list"])
    _emit(
        cfg, out_dir, "convergence_phi.csv",
        ["N", "hellinger_mean", "hellinger_marginal", "l2_phi", "knorm"],
        [[n, hm, hg, l2, kn] for n, hm, hg, l2, kn in phi_rows],
    )
    fwd_rows = forward_convergence_table(two_output_problem(), kernel, span, st["n_list"])
    _emit(
        cfg, out_dir, "convergence_forward.csv",
        ["N", "hellinger_mean", "hellinger_marginal", "sum_l2_outputs", "knorm"],
        [[n, hm, hg, l2, kn] for n, hm, hg, l2, kn in fwd_rows],
    )
    return phi_rows, fwd_rows


# ---------------------------------------------------------------------------
# darcy-demo
# ---------------------------------------------------------------------------


def run_darcy_demo(cfg, out_dir: Path):
    d = cfg.values["darcy"]
    model = Darcy1D(
        breakpoints=d["breakpoints"],
        observe_at=d["observe_at"],
        grid_size=d["grid_size"],
        p_left=d["p_left"],
        p_right=d["p_right"],
        source=d["source"],
    )
    pressure, obs = solve_darcy(model, d["permeabilities"])
    _emit(
        cfg, out_dir, "pressure.csv",
        ["x", "p"],
        [[float(x), float(p)] for x, p in zip(model.nodes, pressure)],
    )
    _emit(
        cfg, out_dir, "observations.csv",
        ["x", "value"],
        [[float(x), float(v)] for x, v in zip(model.observe_at, obs)],
    )
    return pressure, obs


RUNNERS = {
    "sample-paths": run_sample_paths,
    "regress": run_regress,
    "invert": run_invert,
    "design-study": run_design_study,
    "design-study-gaussian": run_design_study_gaussian,
    "design-study-uniform": run_design_study_uniform,
    "hellinger-convergence": run_hellinger_convergence,
    "darcy-demo": run_darcy_demo,
}
