"""Command-line front end.

Exit codes: 0 all checks pass, 2 bad input or solver failure, 3 a checked
inequality or rate bound is violated.
"""

import argparse
import json
import os
import sys

import numpy as np

from .analysis import (
    PolynomialPotential,
    contraction_run,
    growth_rate_fit,
    linear_operator_run,
    lower_bound_check,
    make_admissible_initial,
)
from .config import ConfigError, load_config
from .eigen import (
    ConvergenceError,
    contraction_factor,
    quadratic_lambda_oracle,
    solve_alpha,
    solve_eigen,
)
from .figures import figure_tables
from .grid import LogDensity
from .io import atomic_write_text, svg_line_plot, write_csv
from .model import SelectionError
from .transport import (
    ContractionRow,
    DiscreteMeasure,
    duality_check,
    ground_cost,
    log_estimate_check,
    rates_from_alpha,
    sample_test_functions,
    verify_kernel_contraction,
)

__all__ = ["main", "ClaimViolation"]

EXIT_OK, EXIT_INPUT, EXIT_CLAIM = 0, 2, 3


class ClaimViolation(RuntimeError):
    """A numerically checked inequality failed."""


def _out(args, cfg, name):
    return os.path.join(args.out or cfg["output.dir"], name)


def _initial_guess(grid, m):
    # Gaussian with the predicted log-concavity: admissible and close to the answer
    a = solve_alpha(m.beta)
    return LogDensity.from_function(grid, lambda x: 0.5 * a * x**2)


def _reference(cfg, grid, m, trunc=None, linear=False, tol=None):
    tol = min(cfg["run.tol"], 1e-12) if tol is None else tol
    return solve_eigen(m, _initial_guess(grid, m), trunc=trunc, tol=tol,
                       max_iter=cfg["run.max_iter"], linear=linear)


def _setup(cfg):
    grid = cfg.grid()
    m = cfg.selection(grid)
    trunc = cfg.truncation()
    if trunc is not None:
        trunc.check(grid)
    return grid, m, trunc


def cmd_eigen(args, cfg):
    grid, m, trunc = _setup(cfg)
    res = solve_eigen(m, _initial_guess(grid, m), trunc=trunc, tol=cfg["run.tol"],
                      max_iter=cfg["run.max_iter"])
    write_csv(_out(args, cfg, "eigen.csv"), ("n", "lambda_n", "step_diff", "alpha_hat_n"),
              res.trace_rows())
    F = np.exp(-res.profile.v)
    write_csv(_out(args, cfg, "profile.csv"), ("x", "V", "F"),
              zip(grid.x, res.profile.v, F))
    print(f"lambda      = {res.lam:.15g}")
    print(f"alpha_hat   = {res.alpha_hat:.15g}  (alpha* = {solve_alpha(m.beta):.15g})")
    print(f"residual    = {res.residual:.3e}")
    print(f"iterations  = {res.iterations}")
    if m.kind == "quadratic" and trunc is None:
        oracle = quadratic_lambda_oracle(m.beta)
        print(f"oracle      = {oracle:.15g}  (|diff| = {abs(res.lam - oracle):.3e})")
    return EXIT_OK


def _checked_ratios(trace, floor):
    i = trace.column("i_inf")
    r = trace.ratios()
    valid = np.isfinite(r) & (i[:-1] > floor)
    return np.flatnonzero(valid) + 1, r[valid]


def cmd_contract(args, cfg):
    grid, m, trunc = _setup(cfg)
    ref = _reference(cfg, grid, m, trunc)
    f0 = make_admissible_initial(ref.profile, cfg["initial.epsilon"], cfg["initial.mode"])
    trace = contraction_run(m, f0, ref, cfg["run.generations"], trunc)
    write_csv(_out(args, cfg, "trace.csv"), trace.CSV_HEADER, trace.csv_rows())
    rho = contraction_factor(m.beta)
    lines = [f"rho = {rho:.17g}", f"log_rho = {np.log(rho):.17g}"]
    try:
        s_lam, s_kl = growth_rate_fit(trace, ref)
        lines += [
            f"slope_lambda = {s_lam:.17g}",
            f"slope_kl = {s_kl:.17g}",
            f"slope_lambda / log_rho = {s_lam / np.log(rho):.17g}",
            f"slope_kl / (2 log_rho) = {s_kl / (2 * np.log(rho)):.17g}",
        ]
    except ValueError as exc:
        lines.append(f"fit: {exc}")
    gens, ratios = _checked_ratios(trace, cfg["run.noise_floor"])
    if ratios.size == 0:
        lines.append("fixed point: I_inf stays below the noise floor")
    else:
        worst = int(np.argmax(ratios))
        lines.append(f"max_ratio = {ratios[worst]:.17g} (generation {gens[worst]})")
    atomic_write_text(_out(args, cfg, "rates.txt"), "\n".join(lines) + "\n")
    print("\n".join(lines))
    if ratios.size and ratios[worst] > rho + cfg["run.slack"]:
        raise ClaimViolation(
            f"generation {gens[worst]}: I_inf ratio {ratios[worst]:.6g} > rho + slack "
            f"= {rho + cfg['run.slack']:.6g}"
        )
    return EXIT_OK


def cmd_linear(args, cfg):
    grid, m, _ = _setup(cfg)
    ref = _reference(cfg, grid, m, linear=True)
    f0 = make_admissible_initial(ref.profile, cfg["initial.epsilon"], cfg["initial.mode"])
    trace = linear_operator_run(m, f0, ref, cfg["run.generations"])
    write_csv(_out(args, cfg, "linear_trace.csv"), trace.CSV_HEADER, trace.csv_rows())
    gens, ratios = _checked_ratios(trace, cfg["run.noise_floor"])
    print(f"lambda_A    = {ref.lam:.15g}")
    if ratios.size == 0:
        print("fixed point: I_inf stays below the noise floor")
        return EXIT_OK
    kappa = float(ratios.max())
    print(f"kappa_hat   = {kappa:.15g} (generation {gens[int(np.argmax(ratios))]})")
    if not kappa < 1:
        raise ClaimViolation(f"linear operator is not contracting: kappa_hat = {kappa:.6g}")
    return EXIT_OK


def cmd_transport(args, cfg):
    grid, m, _ = _setup(cfg)
    ref = _reference(cfg, grid, m)
    alpha = solve_alpha(m.beta)
    rep = verify_kernel_contraction(ref.profile, alpha, cfg["transport.x_pairs"],
                                    cfg["transport.quantization"])
    write_csv(_out(args, cfg, "kernel_contraction.csv"), ContractionRow.CSV_HEADER,
              [r.csv_row() for r in rep.rows])
    r1, r2 = rates_from_alpha(alpha)
    write_csv(_out(args, cfg, "rate_comparison.csv"), ("beta", "alpha", "rate_l1", "rate_l2"),
              [(m.beta, alpha, float(r1), float(r2))])
    print(f"rho = {rep.rho:.15g}; l1 rate {float(r1):.6g} vs l2 rate {float(r2):.6g}")
    for r in rep.rows:
        print(f"  x={r.x:g} x~={r.x_tilde:g}: W_inf,1={r.winf1:.6g} ratio={r.ratio:.6g} "
              f"bound={r.bound:.6g} {'ok' if r.passed else 'VIOLATED'}")
    if not rep.passed:
        raise ClaimViolation("kernel contraction ratio above rho + quantization tolerance")
    return EXIT_OK


def _measure_json(mu):
    return {"points": mu.points.tolist(), "weights": mu.weights.tolist()}


def _pname(p):
    return "inf" if p == np.inf else int(p)


def _random_measure(rng, dim, max_points):
    k = int(rng.integers(1, max_points + 1))
    return DiscreteMeasure(1.5 * rng.normal(size=(k, dim)), rng.dirichlet(np.ones(k)))


def _dual_direction(a, q):
    """Unit ``l_q`` vector ``s`` with ``a.s = ||a||_{q'}``."""
    if q == 1:
        i = int(np.argmax(np.abs(a)))
        s = np.zeros_like(a)
        s[i] = np.sign(a[i])
        return s
    if q == np.inf:
        return np.sign(a)
    return a / np.linalg.norm(a)


def cmd_duality(args, cfg):
    seed = cfg["seed"] if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    ps, qs = (1, 2, np.inf), (1, 2, np.inf)
    rows, violations = [], []
    for k in range(cfg["duality.pairs"]):
        mu = _random_measure(rng, 2, cfg["duality.max_points"])
        nu = _random_measure(rng, 2, cfg["duality.max_points"])
        for u in sample_test_functions(2, rng):
            for p in ps:
                if p != np.inf and not u.positive():
                    continue
                for q in qs:
                    res = duality_check(u, mu, nu, p, q)
                    rows.append((k, res.kind, _pname(p), _pname(q), res.lhs, res.lipschitz,
                                 res.distance, res.rhs, res.passed))
                    if not res.passed:
                        violations.append({"pair": k, "function": u.kind,
                                           "params": {a: np.asarray(b).tolist() for a, b in u.params.items()},
                                           "p": _pname(p), "q": _pname(q), "lhs": res.lhs,
                                           "rhs": res.rhs, "mu": _measure_json(mu),
                                           "nu": _measure_json(nu)})
    write_csv(_out(args, cfg, "duality.csv"),
              ("pair", "function", "p", "q", "lhs", "lipschitz", "distance", "rhs", "pass"), rows)

    # Dirac pairs: the ratio reduces to a difference quotient of v
    dirac_rows, dirac_err = [], 0.0
    for u in sample_test_functions(2, rng):
        x = rng.normal(size=2)
        for p in ps:
            if p != np.inf and not u.positive():
                continue
            for q in qs:
                if u.kind == "linear":
                    xt = x + 0.7 * _dual_direction(np.asarray(u.params["slope"]), q)
                else:
                    xt = rng.normal(size=2)
                res = duality_check(u, DiscreteMeasure.dirac(x), DiscreteMeasure.dirac(xt), p, q)
                quotient = abs(u.value(x)[0] - u.value(xt)[0]) / ground_cost(x[None], xt[None], q)[0, 0]
                measured = res.lhs / res.distance
                err = abs(measured - quotient)
                if u.kind == "linear":
                    err = max(err, abs(measured - res.lipschitz))
                dirac_err = max(dirac_err, err)
                dirac_rows.append((u.kind, _pname(p), _pname(q), measured, quotient,
                                   res.lipschitz, err))
    write_csv(_out(args, cfg, "dirac.csv"),
              ("function", "p", "q", "lhs_over_w", "difference_quotient", "lipschitz", "error"),
              dirac_rows)

    # one-step log estimate on the kernel pairs of the configured model
    grid, m, _ = _setup(cfg)
    ref = _reference(cfg, grid, m)
    eps = cfg["duality.epsilon"]
    u0 = LogDensity.from_function(grid, lambda x: -eps * np.sin(x))
    log_rows = log_estimate_check(u0, ref.profile, cfg["transport.x_pairs"],
                                  cfg["transport.quantization"])
    write_csv(_out(args, cfg, "log_estimate.csv"),
              ("x", "x_tilde", "lhs", "log_lipschitz", "winf1", "rhs", "winf2", "rhs_l2", "pass",
               "norm_comparison"),
              [(r.x, r.x_tilde, r.lhs, r.log_lipschitz, r.winf1, r.rhs, r.winf2, r.rhs_l2,
                r.passed, r.norm_comparison) for r in log_rows])
    for r in log_rows:
        if not (r.passed and r.norm_comparison):
            violations.append({"log_estimate": {"x": r.x, "x_tilde": r.x_tilde, "lhs": r.lhs,
                                                "rhs": r.rhs, "winf1": r.winf1, "winf2": r.winf2}})
    n_ok = sum(1 for r in rows if r[-1])
    print(f"duality: {n_ok}/{len(rows)} inequalities hold; Dirac max error {dirac_err:.3e}")
    print(f"log estimate: {sum(r.passed for r in log_rows)}/{len(log_rows)} pairs hold")
    if dirac_err > 1e-9:
        violations.append({"dirac_max_error": dirac_err})
    if violations:
        atomic_write_text(_out(args, cfg, "violation.json"),
                          json.dumps(violations, indent=1, sort_keys=True) + "\n")
        raise ClaimViolation(f"{len(violations)} violation(s); instances written to violation.json")
    return EXIT_OK


def cmd_figures(args, cfg):
    tables = figure_tables(cfg["figures.beta_max"], cfg["figures.alpha_max"])
    for name, (header, data) in tables.items():
        write_csv(_out(args, cfg, name), header, data)
    a = tables["fig1_alpha.csv"][1]
    r = tables["fig1_rho.csv"][1]
    atomic_write_text(_out(args, cfg, "fig1.svg"), svg_line_plot(
        [("alpha(beta)", a[:, 0], a[:, 1]), ("2/(1+2 alpha)", r[:, 0], r[:, 1])],
        "beta", "value", "Log-concavity and contraction factor", marks=[(0.0, 0.5), (0.0, 1.0)]))
    f2 = tables["fig2_rates.csv"][1]
    atomic_write_text(_out(args, cfg, "fig2.svg"), svg_line_plot(
        [("2/(1+2 alpha)", f2[:, 0], f2[:, 1]), ("1/alpha", f2[:, 0], f2[:, 2])],
        "alpha", "rate", "One-step contraction rates", marks=[(0.5, 1.0), (0.5, 2.0), (1.0, 1.0)]))
    print("wrote " + ", ".join(list(tables) + ["fig1.svg", "fig2.svg"]))
    return EXIT_OK


def cmd_lowerbound(args, cfg):
    gamma = cfg["lowerbound.gamma"]
    samples = [(f * (gamma + 2) / gamma * d, d)
               for d in cfg["lowerbound.deltas"] for f in cfg["lowerbound.x0_factors"]]
    R = cfg["lowerbound.R"]
    rows, failed = [], 0
    for idx, coeffs in enumerate(cfg["lowerbound.potentials"]):
        pot = PolynomialPotential(tuple(float(c) for c in coeffs))
        for radius in ([None, R] if R is not None else [None]):
            for r in lower_bound_check(pot, gamma, samples, R=radius,
                                       upper_limit=cfg["lowerbound.upper_limit"]):
                rows.append((idx, r.x0, r.delta, r.log_lhs, r.log_rhs, r.upper_limit,
                             r.truncation, r.passed))
                failed += not r.passed
    write_csv(_out(args, cfg, "lowerbound.csv"),
              ("potential", "x0", "delta", "log_lhs", "log_rhs", "upper_limit", "R", "pass"), rows)
    print(f"lower bound: {len(rows) - failed}/{len(rows)} hold")
    if failed:
        raise ClaimViolation(f"{failed} lower-bound instance(s) violated")
    return EXIT_OK


COMMANDS = {
    "eigen": (cmd_eigen, "solve the eigenproblem; write eigen.csv and profile.csv"),
    "contract": (cmd_contract, "contraction run; write trace.csv and rates.txt"),
    "transport": (cmd_transport, "kernel W_inf,1 contraction; write kernel_contraction.csv"),
    "duality": (cmd_duality, "randomized transport-duality checks"),
    "figures": (cmd_figures, "emit the alpha/rho and rate curves (CSV + SVG)"),
    "lowerbound": (cmd_lowerbound, "Gaussian-convolution lower bounds"),
    "linear": (cmd_linear, "single-parent linear operator run"),
}


def _common_options(default):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default, help="flat key = value config file")
    common.add_argument("--out", default=default, help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, default=default, help="random seed (overrides seed)")
    return common


def build_parser():
    parser = argparse.ArgumentParser(prog="inflab", description=__doc__.splitlines()[0],
                                     parents=[_common_options(None)])
    sub = parser.add_subparsers(dest="command", required=True)
    # SUPPRESS keeps a subcommand from resetting options given before it
    after = _common_options(argparse.SUPPRESS)
    for name, (_, helptext) in COMMANDS.items():
        sub.add_parser(name, help=helptext, parents=[after])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command][0](args, cfg)
    except ClaimViolation as exc:
        print(f"claim violated: {exc}", file=sys.stderr)
        return EXIT_CLAIM
    except ConvergenceError as exc:
        tail = "\n".join(f"  {row}" for row in exc.trace[-3:])
        print(f"solver failed: {exc}\nlast trace rows (lambda_n, step_diff, alpha_hat):\n{tail}",
              file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, SelectionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
