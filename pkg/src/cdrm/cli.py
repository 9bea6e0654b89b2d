"""Command line front end.

Usage::

    cdrm {tau,drm,cdrm,table,plot-grid,sample} --config run.json [--out PATH]
         [--seed INT] [--abs-tol FLOAT] [--threads INT]

Single-record results go to stdout as JSON; tables and grids are CSV files
(``--out``, else the config's ``output_path``, else stdout).  Failures are
written to stderr as JSON records ``{"code", "message", "field"?}`` and give
a non-zero exit status: 1 for computation errors, 2 for bad input.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import aggregate as agg
from . import mc
from .config import RunConfig, parse_config
from .copula import BOUNDARY_EPS, copula_density, kendall_tau
from .errors import CdrmError, ConfigError

TABLE_HEADER = ["delta", "tau_delta", "cdrm_excess", "cdrm_full", "quad_err", "trunc_err", "error"]
GRID_N = 101


def fmt(x) -> str:
    """Six significant digits; blank for missing values."""
    if x is None:
        return ""
    x = float(x)
    if x == 0.0:
        return "0"
    return f"{x:.6g}"


def _record(obj) -> dict:
    return {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in vars(obj).items()}


def _emit_json(rec: dict) -> None:
    sys.stdout.write(json.dumps(rec, sort_keys=True) + "\n")


def _error(exc: CdrmError) -> None:
    sys.stderr.write(json.dumps(exc.to_record(), sort_keys=True) + "\n")


@contextlib.contextmanager
def _sink(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _csv(rows: list[list[str]], header: list[str], path: str | None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    with _sink(path) as fh:
        fh.write(buf.getvalue())


def cmd_tau(cfg: RunConfig, args) -> int:
    base = kendall_tau(cfg.model.copula)
    rec = {"tau": base.tau, "method": base.method, "abs_err_est": base.abs_err_est}
    if cfg.model.copula_distortion is not None:
        d = kendall_tau(cfg.model.distorted_copula)
        rec.update(tau_distorted=d.tau, method_distorted=d.method, abs_err_est_distorted=d.abs_err_est)
    _emit_json(rec)
    return 0


def cmd_drm(cfg: RunConfig, args) -> int:
    model = cfg.model.with_copula_distortion(None)
    rep = agg.risk_report(model, cfg.quadrature)
    _emit_json({**_record(rep), "expectation_excess": rep.expectation_excess})
    return 0


def cmd_cdrm(cfg: RunConfig, args) -> int:
    if cfg.model.copula_distortion is None:
        raise ConfigError("cdrm needs a copula distortion", field="model.copula_distortion")
    rep = agg.risk_report(cfg.model, cfg.quadrature)
    _emit_json({**_record(rep), "expectation_excess": rep.expectation_excess})
    return 0


def cmd_table(cfg: RunConfig, args) -> int:
    if not cfg.delta_grid:
        raise ConfigError("table needs a non-empty delta_grid", field="delta_grid")
    rows = agg.table_scan(cfg.model, cfg.delta_grid, q=cfg.quadrature, threads=args.threads,
                          family=cfg.delta_family)
    out = [[fmt(r.delta), fmt(r.tau_delta), fmt(r.cdrm_excess), fmt(r.cdrm_full), fmt(r.quad_err),
            fmt(r.trunc_err), "" if r.error is None else json.dumps(r.error, sort_keys=True)] for r in rows]
    _csv(out, TABLE_HEADER, args.out)
    failed = [r for r in rows if r.error is not None]
    for r in failed:
        sys.stderr.write(json.dumps({**r.error, "delta": r.delta}, sort_keys=True) + "\n")
    return 1 if failed else 0


def density_grid(model: agg.PortfolioModel) -> tuple[list[str], list[np.ndarray], int]:
    """Copula density on the interior of a 101 x 101 grid.

    Returns the column names, the columns and the number of boundary points
    left out (the density is unbounded there for most families).
    """
    grid = np.linspace(0.0, 1.0, GRID_N)
    uu, vv = np.meshgrid(grid, grid, indexing="ij")
    inside = ((uu >= BOUNDARY_EPS) & (uu <= 1 - BOUNDARY_EPS) & (vv >= BOUNDARY_EPS) & (vv <= 1 - BOUNDARY_EPS))
    u, v = uu[inside], vv[inside]
    header = ["u", "v", "density"]
    cols = [u, v, np.asarray(copula_density(model.copula, u, v), dtype=float)]
    if model.copula_distortion is not None:
        header.append("density_distorted")
        cols.append(np.asarray(copula_density(model.distorted_copula, u, v), dtype=float))
    return header, cols, int((~inside).sum())


def _density_grid(cfg: RunConfig, path: str | None) -> int:
    header, cols, skipped = density_grid(cfg.model)
    rows = [[fmt(x) for x in row] for row in zip(*cols)]
    _csv(rows, header, path)
    sys.stderr.write(json.dumps({"info": "boundary points skipped", "count": skipped}) + "\n")
    return 0


def _risk_vs_delta(cfg: RunConfig, args) -> int:
    if not cfg.delta_grid:
        raise ConfigError("risk_vs_delta needs a non-empty delta_grid", field="delta_grid")
    base = cfg.model.with_copula_distortion(None)
    d = agg.drm_result(base, cfg.quadrature)
    e_exc = agg.expectation_excess(base)
    rows_out = agg.table_scan(cfg.model, cfg.delta_grid, q=cfg.quadrature, threads=args.threads,
                              family=cfg.delta_family)
    rows = [[fmt(r.delta), fmt(e_exc), fmt(r.cdrm_excess), fmt(d.excess),
             "" if r.error is None else json.dumps(r.error, sort_keys=True)] for r in rows_out]
    _csv(rows, ["delta", "expectation_excess", "cdrm_excess", "drm_excess", "error"], args.out)
    return 1 if any(r.error is not None for r in rows_out) else 0


def cmd_plot_grid(cfg: RunConfig, args) -> int:
    if args.what == "copula_density":
        return _density_grid(cfg, args.out)
    return _risk_vs_delta(cfg, args)


def cmd_sample(cfg: RunConfig, args) -> int:
    distorted = args.distorted and cfg.model.copula_distortion is not None
    batch = mc.sample_losses(cfg.model, cfg.sample_size, cfg.seed, distorted=distorted)
    if args.out is None:
        raise ConfigError("sample needs --out or output_path", field="output_path")
    mc.write_batch_csv(batch, args.out, {"distorted": distorted})
    return 0


COMMANDS = {
    "tau": cmd_tau,
    "drm": cmd_drm,
    "cdrm": cmd_cdrm,
    "table": cmd_table,
    "plot-grid": cmd_plot_grid,
    "sample": cmd_sample,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cdrm", description="Distortion risk measures of sums of dependent losses.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output file (overrides output_path)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--abs-tol", type=float, help="overrides quadrature.abs_tol")
    p.add_argument("--threads", type=int, default=1, help="worker processes for grid rows (speed only)")
    p.add_argument("--what", choices=["copula_density", "risk_vs_delta"], default="risk_vs_delta",
                   help="plot-grid data set")
    p.add_argument("--distorted", action="store_true", help="sample: draw from the distorted copula")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", field="--config") from None
        cfg = parse_config(text)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.abs_tol is not None:
            try:
                cfg = replace(cfg, quadrature=replace(cfg.quadrature, abs_tol=args.abs_tol))
            except CdrmError as exc:
                raise ConfigError(str(exc), field="--abs-tol") from None
        if args.threads < 1:
            raise ConfigError("threads must be at least 1", field="--threads")
        if args.out is None:
            args.out = cfg.output_path
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            status = COMMANDS[args.command](cfg, args)
        for w in caught:
            sys.stderr.write(json.dumps({"code": "warning", "message": str(w.message)}, sort_keys=True) + "\n")
        return status
    except ConfigError as exc:
        _error(exc)
        return 2
    except CdrmError as exc:
        _error(exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
