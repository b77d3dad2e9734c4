"""Command line entry point: ``entroreg register|transport|norms|verify``.

Exit codes: 0 success, 2 usage or input error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .field import GridError, ScalarField, VectorField
from .fieldio import FieldFormatError, decode_fld, encode_fld, read_field
from .orlicz import PHI_EXP, PHI_LOG, luxemburg_norm
from .registration import (
    ConfigError,
    RegistrationConfig,
    RegistrationData,
    continuation_solve,
    transported,
)
from .smoothmax import chi_gamma, log_mean_exp
from .transport import CharacteristicBlowUp, TransportSetup, default_nsub, solve_forward
from .verify import SCOPES, run_checks

log = logging.getLogger("entroreg")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3
DEFAULT_SEED = 20240611
NORMS_HEADER = "gamma,E,chi,psi0_relevant,lux_exp,lux_log"


class InputError(Exception):
    """Bad user input; the message names the offending file or key."""


class InvariantError(Exception):
    pass


def thread_cap() -> int:
    """Value of ``ENTROREG_THREADS`` (0 = auto).

    The numerics are vectorized and single-threaded, so the cap is validated
    and recorded in the manifest but has nothing to limit.
    """
    raw = os.environ.get("ENTROREG_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"ENTROREG_THREADS must be a non-negative integer, got {raw!r}") from None
    if n < 0:
        raise InputError(f"ENTROREG_THREADS must be a non-negative integer, got {raw!r}")
    return n


def _load(path) -> ScalarField:
    try:
        return read_field(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except (FieldFormatError, GridError, OSError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _write_checked(path: Path, f: ScalarField) -> None:
    data = encode_fld(f)
    if not np.array_equal(decode_fld(data, str(path)).values, f.values):
        raise InvariantError(f"{path}: FLD1 round trip is not bit-identical")
    path.write_bytes(data)


def _check_max_principle(phi0: ScalarField, phiT: ScalarField) -> None:
    if np.max(np.abs(phiT.values)) > np.max(np.abs(phi0.values)):
        raise InvariantError("transported image exceeds the sup norm of the initial image")


def _write_manifest(path: Path, command: str, **fields) -> None:
    manifest = {"command": command, "version": __version__, "threads": thread_cap(), **fields}
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_register(args) -> int:
    try:
        cfg = RegistrationConfig.read(args.config)
    except FileNotFoundError:
        raise InputError(f"{args.config}: no such file") from None
    phi0, target = _load(args.phi0), _load(args.phi_tar)
    if phi0.grid != target.grid:
        raise InputError(f"{args.phi_tar}: grid {target.grid.dims} differs from {args.phi0} {phi0.grid.dims}")
    data = RegistrationData(phi0, target)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(
        out / "manifest.json", "register",
        config={k: getattr(cfg, k) for k in cfg.KEYS},
        inputs={"config": str(args.config), "phi0": str(args.phi0), "phi_tar": str(args.phi_tar)},
        out=str(out), seed=args.seed,
    )
    try:
        v, trace = continuation_solve(data, cfg)
    except GridError as exc:
        raise InputError(f"{args.config}: levels: {exc}") from None
    phiT = transported(v, data, cfg, trace.stages[-1].nsub)
    _check_max_principle(phi0, phiT)

    for j in range(v.grid.ndim):
        _write_checked(out / f"velocity.v{j}.fld", ScalarField(v.grid, v.components[j]))
    _write_checked(out / "phiT.fld", phiT)
    (out / "trace.csv").write_text(trace.to_csv())
    if not args.no_figures:
        from .report import plot_images, plot_trace

        plot_trace(trace, out / "trace.png")
        plot_images(phi0, target, phiT, v, out / "images.png")
    last = trace.stages[-1]
    print(f"stages={len(trace.stages)} f={last.f!r} j={last.j!r} status={last.status} out={out}")
    return EXIT_OK


def cmd_transport(args) -> int:
    phi0 = _load(args.initial)
    comps = [_load(p) for p in args.velocity]
    d = phi0.grid.ndim
    if len(comps) != d:
        raise InputError(f"--velocity: need {d} component files for a {d}-D image, got {len(comps)}")
    for path, c in zip(args.velocity, comps):
        if c.grid != phi0.grid:
            raise InputError(f"{path}: grid {c.grid.dims} differs from {args.initial} {phi0.grid.dims}")
    v = VectorField(phi0.grid, np.stack([c.values for c in comps]))
    if not v.is_admissible():
        raise InputError(f"{args.velocity[0]}: velocity must vanish on the boundary")
    if not (args.time > 0 and np.isfinite(args.time)):
        raise InputError(f"--time: must be positive, got {args.time}")
    nsub = args.nsub if args.nsub is not None else default_nsub(v, args.time)

    out = Path(args.out)
    _write_manifest(
        out.with_name(out.name + ".manifest.json"), "transport",
        inputs={"velocity": [str(p) for p in args.velocity], "initial": str(args.initial)},
        time=args.time, nsub=nsub, out=str(out), seed=None,
    )
    phiT = solve_forward(v, phi0, TransportSetup(args.time, nsub))
    _check_max_principle(phi0, phiT)
    _write_checked(out, phiT)
    return EXIT_OK


def psi0_relevant(u: ScalarField) -> float:
    """max(u) + max(-u): the gamma -> 0 limit of E(u) + E(-u)."""
    return float(np.max(u.values) + np.max(-u.values))


def norms_rows(u: ScalarField, gammas) -> list[str]:
    lux_exp = luxemburg_norm(u, PHI_EXP)
    lux_log = luxemburg_norm(u, PHI_LOG)
    p0 = psi0_relevant(u)
    rows = [NORMS_HEADER]
    for g in gammas:
        vals = [g, log_mean_exp(u, g), chi_gamma(u, g), p0, lux_exp, lux_log]
        rows.append(",".join(repr(float(x)) for x in vals))
    return rows


def cmd_norms(args) -> int:
    u = _load(args.input)
    gammas = []
    for tok in args.gamma:
        for s in tok.replace(",", " ").split():
            try:
                g = float(s)
            except ValueError:
                raise InputError(f"--gamma: cannot parse {s!r}") from None
            if not (g > 0 and np.isfinite(g)):
                raise InputError(f"--gamma: values must be positive, got {s!r}")
            gammas.append(g)
    if not gammas:
        raise InputError("--gamma: no values given")
    print("\n".join(norms_rows(u, sorted(gammas))))
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(args.scope, args.seed)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed (scope={args.scope}, seed={args.seed})")
    return EXIT_OK if failed == 0 else EXIT_INVARIANT


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entroreg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"entroreg {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-stage progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("register", help="run the continuation solve on an image pair")
    r.add_argument("config", help="key = value configuration file")
    r.add_argument("phi0", help="source image (FLD1 or PGM)")
    r.add_argument("phi_tar", help="target image (FLD1 or PGM)")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, default=DEFAULT_SEED, help="recorded in the manifest")
    r.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    r.set_defaults(func=cmd_register)

    t = sub.add_parser("transport", help="transport an image by a stationary velocity")
    t.add_argument("--velocity", nargs="+", required=True, help="one FLD1 file per velocity component")
    t.add_argument("--initial", required=True, help="initial image")
    t.add_argument("--time", type=float, default=1.0, help="final time T")
    t.add_argument("--nsub", type=int, default=None, help="RK4 substeps (default from the CFL rule)")
    t.add_argument("--out", required=True, help="output FLD1 file")
    t.set_defaults(func=cmd_transport)

    n = sub.add_parser("norms", help="print smoothed sup norms and Luxemburg norms as CSV")
    n.add_argument("--input", required=True, help="scalar field")
    n.add_argument("--gamma", nargs="+", required=True, help="smoothing parameters")
    n.set_defaults(func=cmd_norms)

    v = sub.add_parser("verify", help="run the property and oracle checks")
    v.add_argument("--scope", default="all", choices=("all",) + SCOPES)
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        thread_cap()
        return args.func(args)
    except (InputError, ConfigError) as exc:
        print(f"entroreg: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantError, CharacteristicBlowUp) as exc:
        print(f"entroreg: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
