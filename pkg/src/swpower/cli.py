"""Command-line front door.

Subcommands mirror the service endpoints: power, samplesize, gicc, simulate,
validate (design upload), and serve. Flags use the study-design vocabulary:
cluster-period size, administrative censoring proportion, baseline hazard
change constant.
"""

from __future__ import annotations

import functools
import json
import sys

import click

from .design import DesignError, parse_design_matrix, render_design_matrix
from .harness import SimConfig, run_study
from .power import PowerRequest, evaluate_power, solve_clusters
from .simgen import generate_trial
from .survmodel import CensoringSpec, CorrelationSpec, HazardSpec, solve_lambda0

FORMATS = ("text", "json", "csv")


def _common_options(f):
    opts = [
        click.option("--J", "J", type=int, required=True, help="number of time periods"),
        click.option("--m", "m", type=int, required=True, help="cluster-period size"),
        click.option("--beta", type=float, required=True, help="treatment effect (log hazard ratio)"),
        click.option("--beta0", type=float, default=0.0, show_default=True, help="null log hazard ratio"),
        click.option("--tau-w", type=float, default=None, help="within-period Kendall's tau"),
        click.option("--tau-b", type=float, default=None, help="between-period Kendall's tau"),
        click.option("--rho-w", type=float, default=None, help="within-period g-ICC (direct mode)"),
        click.option("--rho-b", type=float, default=None, help="between-period g-ICC (direct mode)"),
        click.option("--pa", type=float, required=True, help="administrative censoring proportion"),
        click.option("--trend", type=float, default=0.0, show_default=True,
                     help="baseline hazard change constant per period"),
        click.option("--c-star", type=float, default=1.0, show_default=True, help="maximum follow-up time"),
        click.option("--alpha", type=float, default=0.05, show_default=True, help="two-sided significance level"),
        click.option("--format", "fmt", type=click.Choice(FORMATS), default="text", show_default=True),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _clean_errors(f):
    """Turn validation failures into clean one-line CLI errors."""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (ValueError, DesignError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _correlation(tau_w, tau_b, rho_w, rho_b) -> CorrelationSpec:
    kendall = tau_w is not None or tau_b is not None
    direct = rho_w is not None or rho_b is not None
    if kendall and direct:
        raise click.UsageError("give either Kendall's taus or direct g-ICCs, not both")
    if direct:
        return CorrelationSpec(mode="gicc", rho_w=rho_w or 0.0, rho_b=rho_b or 0.0)
    return CorrelationSpec(mode="kendall", tau_w=tau_w or 0.0, tau_b=tau_b or 0.0)


def _request(J, m, n, beta, beta0, corr, pa, trend, c_star, alpha, dof_rule, design_file=None) -> PowerRequest:
    lam0 = solve_lambda0(pa, c_star)
    hazard = HazardSpec(
        lambda0=lam0, beta=beta,
        trend="constant" if trend == 0 else "additive", trend_delta=trend, p_a=pa,
    )
    censoring = CensoringSpec(c_star=c_star)
    methods = ("wald_t",) if corr.mode == "gicc" else ("wald_t", "score_sm", "score_tang")
    if design_file is not None:
        design = parse_design_matrix(design_file.read(), m=m)
        if design.J != J:
            raise click.UsageError(f"--J {J} disagrees with the uploaded design ({design.J} periods)")
    else:
        from .design import build_balanced_design

        design = build_balanced_design(J, n, m=m)
    return PowerRequest(
        design=design, hazard=hazard, censoring=censoring, corr=corr,
        beta1=beta, beta0=beta0, alpha=alpha, dof_rule=dof_rule, methods=methods,
    )


@click.group()
def main() -> None:
    """Design-stage power tools for stepped wedge trials with survival outcomes."""


@main.command("power")
@_common_options
@click.option("--n", type=int, required=True, help="total number of clusters")
@click.option("--dof", "dof_rule", type=click.Choice(["n-1", "n-2", "normal"]), default="n-2",
              show_default=True, help="Wald t degrees-of-freedom rule")
@click.option("--design-file", type=click.File("r"), default=None,
              help="CSV schedule for an unbalanced design (overrides balanced layout)")
@_clean_errors
def cmd_power(J, m, beta, beta0, tau_w, tau_b, rho_w, rho_b, pa, trend, c_star, alpha, fmt,
              n, dof_rule, design_file):
    """Predicted power at a fixed number of clusters."""
    corr = _correlation(tau_w, tau_b, rho_w, rho_b)
    req = _request(J, m, n, beta, beta0, corr, pa, trend, c_star, alpha, dof_rule, design_file)
    result = evaluate_power(req)
    payload = {
        "powers": result.powers,
        "rho_w": result.variance.giccs.rho_w,
        "rho_b": result.variance.giccs.rho_b,
        "design_effect": result.variance.design_effect,
        "var_beta": result.variance.var_beta,
        "n": req.design.n,
    }
    _emit(payload, fmt, _power_text)


@main.command("samplesize")
@_common_options
@click.option("--power", "target_power", type=float, required=True, help="target power")
@_clean_errors
def cmd_samplesize(J, m, beta, beta0, tau_w, tau_b, rho_w, rho_b, pa, trend, c_star, alpha, fmt,
                   target_power):
    """Clusters required for a target power (normal-quantile solve)."""
    corr = _correlation(tau_w, tau_b, rho_w, rho_b)
    req = _request(J, m, J - 1, beta, beta0, corr, pa, trend, c_star, alpha, "normal")
    solution = solve_clusters(req, target_power)
    payload = {
        "clusters": solution.clusters,
        "exact": solution.exact,
        "balanced": solution.balanced_ok,
        "sequences": len(req.design.sequences),
        "rho_w": solution.variance.giccs.rho_w,
        "rho_b": solution.variance.giccs.rho_b,
        "target_power": target_power,
    }
    _emit(payload, fmt, _samplesize_text)


@main.command("gicc")
@_common_options
@click.option("--n", type=int, default=None, help="total number of clusters (defaults to one per sequence)")
@_clean_errors
def cmd_gicc(J, m, beta, beta0, tau_w, tau_b, rho_w, rho_b, pa, trend, c_star, alpha, fmt, n):
    """Generalized ICCs implied by the generative dependence assumptions."""
    corr = _correlation(tau_w, tau_b, rho_w, rho_b)
    if corr.mode != "kendall":
        raise click.UsageError("g-ICC computation needs Kendall's taus")
    req = _request(J, m, n if n is not None else J - 1, beta, beta0, corr, pa, trend, c_star,
                   alpha, "n-2")
    from .varengine import treatment_effect_variance

    report = treatment_effect_variance(req.design, req.hazard, req.censoring, req.corr, beta1=req.beta1)
    payload = {
        "rho_w": report.giccs.rho_w,
        "rho_b": report.giccs.rho_b,
        "sum_upsilon0": report.giccs.sum_upsilon0,
        "design_effect": report.design_effect,
    }
    _emit(payload, fmt, lambda p: (
        f"within-period g-ICC:  {p['rho_w']:.4f}\n"
        f"between-period g-ICC: {p['rho_b']:.4f}\n"
        f"design effect:        {p['design_effect']:.4f}"
    ))


@main.command("simulate")
@click.option("--config", "config_file", type=click.File("r"), default=None,
              help="JSON file of scenario settings (overrides flags)")
@click.option("--J", "J", type=int, default=3)
@click.option("--n", type=int, default=12)
@click.option("--m", "m", type=int, default=25)
@click.option("--beta", type=float, default=0.0)
@click.option("--tau-w", type=float, default=0.0)
@click.option("--tau-b", type=float, default=0.0)
@click.option("--pa", type=float, default=0.2)
@click.option("--trend", type=float, default=0.2)
@click.option("--alpha", type=float, default=0.05)
@click.option("--replicates", type=int, default=1000)
@click.option("--seed", type=int, default=2024)
@click.option("--format", "fmt", type=click.Choice(FORMATS), default="text", show_default=True)
@_clean_errors
def cmd_simulate(config_file, J, n, m, beta, tau_w, tau_b, pa, trend, alpha, replicates, seed, fmt):
    """Monte Carlo study: empirical test size or power vs predictions."""
    if config_file is not None:
        config = SimConfig.from_json(config_file.read())
    else:
        config = SimConfig(J=J, n=n, m=m, beta1=beta, tau_w=tau_w, tau_b=tau_b, p_a=pa,
                           trend_delta=trend, alpha=alpha, replicates=replicates, seed=seed)
    result = run_study(config)
    if fmt == "csv":
        click.echo(result.to_csv(), nl=False)
    elif fmt == "json":
        click.echo(json.dumps({
            "rows": result.rows(),
            "dropped_replicates": result.dropped_replicates,
            "mean_beta_hat": result.mean_beta_hat,
            "elapsed_seconds": result.elapsed_seconds,
        }, indent=2))
    else:
        for row in result.rows():
            line = f"{row['method']:<16} {row['fraction']:.4f}  [{row['ci_low']:.4f}, {row['ci_high']:.4f}]"
            if "predicted" in row:
                line += f"  predicted {row['predicted']:.4f}  diff {row['difference']:+.4f}"
            click.echo(line)
        click.echo(f"dropped {result.dropped_replicates} non-converged replicates; "
                   f"mean estimate {result.mean_beta_hat:.4f}; {result.elapsed_seconds:.1f}s")


@main.command("validate")
@click.argument("design_file", type=click.File("r"))
def cmd_validate(design_file):
    """Validate an uploaded design schedule and echo the canonical form."""
    try:
        design = parse_design_matrix(design_file.read())
    except DesignError as exc:
        click.echo(f"invalid design: {exc}", err=True)
        sys.exit(1)
    click.echo(render_design_matrix(design), nl=False)
    click.echo(f"# {design.n} clusters, {design.J} periods, {len(design.sequences)} sequences")


@main.command("export")
@click.option("--J", "J", type=int, required=True)
@click.option("--n", type=int, required=True)
@click.option("--m", "m", type=int, required=True)
@click.option("--beta", type=float, default=0.0)
@click.option("--tau-w", type=float, default=0.0)
@click.option("--tau-b", type=float, default=0.0)
@click.option("--pa", type=float, default=0.2)
@click.option("--trend", type=float, default=0.2)
@click.option("--seed", type=int, default=2024)
@_clean_errors
def cmd_export(J, n, m, beta, tau_w, tau_b, pa, trend, seed):
    """Generate one simulated trial and print it as CSV."""
    from .design import build_balanced_design

    design = build_balanced_design(J, n, m=m)
    hazard = HazardSpec(lambda0=solve_lambda0(pa, 1.0), beta=beta,
                        trend="constant" if trend == 0 else "additive", trend_delta=trend)
    corr = CorrelationSpec(mode="kendall", tau_w=tau_w, tau_b=tau_b)
    dataset = generate_trial(design, hazard, CensoringSpec(), corr, seed=seed)
    click.echo(dataset.to_csv(), nl=False)


@main.command("serve")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def cmd_serve(port, host):
    """Run the stateless HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


def _power_text(p: dict) -> str:
    lines = [f"power ({m}): {v:.4f}" for m, v in p["powers"].items()]
    lines.append(f"within-period g-ICC:  {p['rho_w']:.4f}")
    lines.append(f"between-period g-ICC: {p['rho_b']:.4f}")
    lines.append(f"design effect:        {p['design_effect']:.4f}")
    return "\n".join(lines)


def _samplesize_text(p: dict) -> str:
    lines = [f"clusters ({m}): {v}" for m, v in p["clusters"].items()]
    if not all(p["balanced"].values()):
        lines.append(f"# some counts are not divisible by {p['sequences']} sequences; "
                     "re-check power under an explicit unbalanced design")
    lines.append(f"within-period g-ICC:  {p['rho_w']:.4f}")
    lines.append(f"between-period g-ICC: {p['rho_b']:.4f}")
    return "\n".join(lines)


def _emit(payload: dict, fmt: str, text_fn) -> None:
    if fmt == "json":
        click.echo(json.dumps(payload, indent=2))
    elif fmt == "csv":
        flat = _flatten(payload)
        click.echo(",".join(flat.keys()))
        click.echo(",".join(str(v) for v in flat.values()))
    else:
        click.echo(text_fn(payload))


def _flatten(payload: dict, prefix: str = "") -> dict:
    out: dict = {}
    for key, value in payload.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, prefix=f"{name}."))
        else:
            out[name] = value
    return out


if __name__ == "__main__":
    main()
