"""Command-line front end.

Usage: ``python -m backend.app.cli <command> [options]`` with the commands
generate, analyze, expand, sweep, reconstruct, esprit, lrf and mc. Results
go to ``--output-dir`` as CSV (and SVG with ``--plot``); diagnostics go to
stderr. Exit status is 0 on success, 1 on invalid input and 2 when a
numerical precondition fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .config import get_settings
from .errors import HankelpertError, InputError, NumericalPreconditionError, exit_code_for
from .logging_config import configure_logging
from .schemas import CliConfig, MonteCarloConfig, SweepConfig
from .services import bounds, harness, io, methods, monte_carlo, perturb
from .services.series import Series, characteristic_roots, derive_seed, generate, is_stochastic, theoretical_rank
from .services.trajectory import matrix_to_series, spectral_norm

logger = logging.getLogger("hankelpert.cli")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise InputError(f"{self.prog}: {message}")


# ---------- Inputs ----------

def _load_series(path: str, n: Optional[int], seed: int, stream: int) -> tuple[Series, Optional[int]]:
    """A CSV series, or a JSON spec evaluated at length n; returns the theoretical rank when known."""

    if Path(path).suffix.lower() == ".json":
        spec = io.load_spec(path)
        if n is None:
            raise InputError(f"--n is required to evaluate the spec in {path}")
        seed_for = derive_seed(seed, stream) if is_stochastic(spec) else None
        return generate(spec, n, seed=seed_for), theoretical_rank(spec)
    return io.read_series(path), None


def _pair(cfg: CliConfig) -> tuple[perturb.PerturbationPair, int]:
    seed = cfg.seed or 0
    signal, known_rank = _load_series(cfg.signal, cfg.n, seed, 0)
    if cfg.noise:
        noise, _ = _load_series(cfg.noise, cfg.n, seed, 1)
    else:
        noise = Series(np.zeros(len(signal)))
    if cfg.L is None:
        raise InputError("--L is required")
    d = cfg.d or known_rank
    pair = perturb.pair_from_series(signal, noise, cfg.L, rank=d)
    return pair, pair.dec.rank


def _known_roots(path: str):
    if Path(path).suffix.lower() != ".json":
        return None
    return characteristic_roots(io.load_spec(path))


def _out(cfg: CliConfig, name: str) -> Path:
    return Path(cfg.output_dir) / name


def _require(cfg: CliConfig, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(cfg, n, None) is None]
    if missing:
        raise InputError(f"{cfg.command} needs {', '.join(missing)}")


# ---------- Commands ----------

def cmd_generate(cfg: CliConfig) -> None:
    _require(cfg, "spec", "n")
    spec = io.load_spec(cfg.spec)
    seed = derive_seed(cfg.seed or 0, 0) if is_stochastic(spec) else None
    series = generate(spec, cfg.n, seed=seed)
    io.write_series(series, cfg.out or _out(cfg, "series.csv"))


def cmd_analyze(cfg: CliConfig) -> None:
    _require(cfg, "signal", "noise", "delta")
    pair, d = _pair(cfg)
    gap = spectral_norm(perturb.delta_projector(pair, cfg.delta, d))
    row = {"L": pair.L, "K": pair.K, "rank": pair.dec.rank, "delta_p": gap, "expansion": perturb.expansion_status(pair, cfg.delta)}
    row.update(bounds.compute_bounds(pair, cfg.delta).as_row())
    zero = bounds.check_zero_perturbation(pair)
    row.update({"biorthogonal": zero.biorthogonal, "zero_perturbation": zero.zero_perturbation})
    io.write_table(pd.DataFrame([row]), _out(cfg, "analyze.csv"))


def cmd_expand(cfg: CliConfig) -> None:
    _require(cfg, "signal", "noise", "delta")
    pair, d = _pair(cfg)
    approx = perturb.series_projector(pair, cfg.delta, cfg.tol)
    oracle = perturb.projector_direct(pair, cfg.delta, d)
    rows = [
        {
            "delta": cfg.delta,
            "order": approx.order,
            "tail_bound": approx.tail_bound,
            "residual": spectral_norm(approx.matrix - oracle.matrix),
            "delta_p": spectral_norm(oracle.matrix - pair.dec.P0perp),
            "expansion": perturb.expansion_status(pair, cfg.delta),
        }
    ]
    io.write_table(pd.DataFrame(rows), _out(cfg, "expand.csv"))


def cmd_sweep(cfg: CliConfig) -> None:
    _require(cfg, "config")
    sweep_cfg = io.load_model(cfg.config, SweepConfig)
    result = harness.run_sweep(sweep_cfg, threads=cfg.threads)
    io.write_table(result.records, _out(cfg, "sweep_records.csv"))
    io.write_table(result.fits, _out(cfg, "sweep_fits.csv"))
    io.write_table(result.violations, _out(cfg, "sweep_violations.csv"))
    if not result.ok:
        logger.warning("%d bound violations, see sweep_violations.csv", len(result.violations))
    if cfg.plot:
        for delta, group in result.records.groupby("delta"):
            io.plot_lines(
                group, "axis", [q for q in ("delta_p", "res_v01", "res_l", "res_t") if q in sweep_cfg.quantities],
                _out(cfg, f"sweep_delta_{delta:g}.svg"), log="xy" if sweep_cfg.rate_scale == "loglog" else "y",
            )


def cmd_reconstruct(cfg: CliConfig) -> None:
    if cfg.signal is not None:
        _require(cfg, "delta")
        pair, d = _pair(cfg)
        recon = methods.ssa_reconstruct(pair, cfg.delta, d)
        df = pd.DataFrame({"index": np.arange(recon.errors.size), "value": recon.series.values, "error": recon.errors})
        io.write_table(df, _out(cfg, "reconstruction.csv"))
        return
    _require(cfg, "a", "delta", "n")
    result = harness.figure1_reproduce(cfg.a, cfg.delta, [cfg.n] + list(cfg.extra_n or []))
    for n, curve in result.curves.items():
        io.write_table(curve, _out(cfg, f"reconstruction_N{n}.csv"))
        if cfg.plot:
            io.plot_lines(curve, "index", ["error", "main_term"], _out(cfg, f"reconstruction_N{n}.svg"), title=f"N={n}")
    io.write_table(result.summary, _out(cfg, "reconstruction_summary.csv"))


def cmd_esprit(cfg: CliConfig) -> None:
    _require(cfg, "signal")
    pair, d = _pair(cfg)
    if cfg.noise and cfg.delta is not None:
        cmp = methods.esprit_perturbed(pair, cfg.delta, d)
        found = cmp.observed
        cert = {"delta": cfg.delta, "delta_p": cmp.delta_p, "upsilon": cmp.reference.upsilon, "vartheta": cmp.vartheta,
                "error": cmp.error, "bound": cmp.bound, "bound_basis_free": cmp.bound_basis_free}
        io.write_table(pd.DataFrame([cert]), _out(cfg, "esprit_certificate.csv"))
    else:
        found = methods.esprit(pair.dec.basis[:, :d])
    roots = pd.DataFrame(
        {"real": found.eigenvalues.real, "imag": found.eigenvalues.imag, "modulus": found.moduli, "frequency": found.frequencies}
    )
    expected = _known_roots(cfg.signal)
    if expected is not None and expected.size == d:
        roots["root_error"] = methods.match_roots(found.eigenvalues, expected)
    io.write_table(roots, _out(cfg, "esprit_roots.csv"))


def cmd_lrf(cfg: CliConfig) -> None:
    _require(cfg, "signal")
    pair, d = _pair(cfg)
    if cfg.noise and cfg.delta is not None:
        cmp = methods.lrf_perturbed(pair, cfg.delta, d)
        table = pd.DataFrame({"k": np.arange(1, pair.L), "a_k": cmp.reference.coefficients, "a_k_delta": cmp.perturbed.coefficients})
        cert = {"delta": cfg.delta, "delta_p": cmp.delta_p, "vartheta": cmp.reference.cos_to_null, "error": cmp.error, "bound": cmp.bound}
        io.write_table(pd.DataFrame([cert]), _out(cfg, "lrf_certificate.csv"))
    else:
        result = methods.lrf_coefficients(pair.dec, series=matrix_to_series(pair.H))
        table = pd.DataFrame({"k": np.arange(1, pair.L), "a_k": result.coefficients})
        logger.info("recurrence residual %.3g (relative %.3g)", result.residual, result.relative_residual)
    io.write_table(table, _out(cfg, "lrf_coefficients.csv"))


def cmd_mc(cfg: CliConfig) -> None:
    _require(cfg, "config")
    mc_cfg = io.load_model(cfg.config, MonteCarloConfig)
    if cfg.seed is not None:
        mc_cfg = mc_cfg.model_copy(update={"seed": cfg.seed})
    result = monte_carlo.monte_carlo(mc_cfg, threads=cfg.threads, progress=sys.stderr.isatty())
    io.write_table(result.records, _out(cfg, "mc_records.csv"))
    io.write_table(pd.DataFrame([result.summary]), _out(cfg, "mc_summary.csv"))


COMMANDS = {
    "generate": cmd_generate,
    "analyze": cmd_analyze,
    "expand": cmd_expand,
    "sweep": cmd_sweep,
    "reconstruct": cmd_reconstruct,
    "esprit": cmd_esprit,
    "lrf": cmd_lrf,
    "mc": cmd_mc,
}


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    common = _Parser(add_help=False)
    common.add_argument("--output-dir", default=settings.output_dir, help="Directory for CSV / SVG output")
    common.add_argument("--threads", type=int, default=settings.threads, help="Parallel workers")
    common.add_argument("--seed", type=int, default=None, help="Master seed for stochastic series")
    common.add_argument("--plot", action="store_true", help="Also write SVG plots")

    pair_args = _Parser(add_help=False)
    pair_args.add_argument("--signal", help="Signal series CSV or spec JSON")
    pair_args.add_argument("--noise", help="Noise series CSV or spec JSON")
    pair_args.add_argument("--n", type=int, help="Series length when specs are given")
    pair_args.add_argument("--L", type=int, help="Window length")
    pair_args.add_argument("--d", type=int, help="Signal rank (theoretical rank of the spec if omitted)")
    pair_args.add_argument("--delta", type=float, help="Noise level")

    parser = _Parser(prog="hankelpert", description="Perturbation analysis of Hankel signal subspaces")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", parents=[common], help="Evaluate a series spec")
    gen.add_argument("--spec", required=True, help="Series spec JSON")
    gen.add_argument("--n", type=int, required=True, help="Series length")
    gen.add_argument("--out", help="Output CSV (default <output-dir>/series.csv)")

    sub.add_parser("analyze", parents=[common, pair_args], help="Bounds report for signal + delta * noise")
    expand = sub.add_parser("expand", parents=[common, pair_args], help="Truncated projector series against the SVD oracle")
    expand.add_argument("--tol", type=float, help="Truncation tolerance")

    sweep = sub.add_parser("sweep", parents=[common], help="Run an N-sweep config")
    sweep.add_argument("--config", required=True, help="Sweep config JSON")

    recon = sub.add_parser("reconstruct", parents=[common, pair_args], help="SSA reconstruction errors")
    recon.add_argument("--a", type=float, help="Base of the exponential signal a^n (constant noise)")
    recon.add_argument("--extra-n", type=int, nargs="*", help="Further odd series lengths")

    sub.add_parser("esprit", parents=[common, pair_args], help="LS-ESPRIT roots and their certificate")
    sub.add_parser("lrf", parents=[common, pair_args], help="Recurrence coefficients and their bound")

    mc = sub.add_parser("mc", parents=[common], help="Monte Carlo verification")
    mc.add_argument("--config", required=True, help="Monte Carlo config JSON")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging(get_settings().log_level)
    try:
        args = build_parser().parse_args(argv)
        cfg = CliConfig(**vars(args))
        COMMANDS[cfg.command](cfg)
    except NumericalPreconditionError as exc:
        logger.error("precondition '%s' failed: %s", exc.precondition, exc)
        return exit_code_for(exc)
    except ValidationError as exc:
        logger.error("invalid arguments: %s", exc.errors()[0]["msg"])
        return 1
    except (HankelpertError, OSError) as exc:
        logger.error("%s", exc)
        return exit_code_for(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
