"""Command-line front end: ``continue``, ``certify`` and ``sweep``.

Configuration comes from an optional flat ``key = value`` file and is
overridden by flags of the same name.  Solutions are stored as plain text
with a header of decimal strings and one line per Fourier mode of u.
"""

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path


from . import certifier as cert
from .bigreal import PrecisionTooLow, format_real, make_context
from .dsm import MapParams, embedding_from_u
from .fourier import PeriodicFunction
from .solver import ContinuationConfig, SolverError, continuation, full_residual

log = logging.getLogger("dsmkam")

FORMAT_VERSION = 1
RHO_TABLE = ["1e-5", "2e-5", "3e-5", "4e-5", "5e-5", "6e-5", "7e-5", "8e-5", "9e-5", "1e-4", "2e-4"]
DEFAULT_AXIS_VALUES = {
    "rho": RHO_TABLE,
    "modes": ["1024", "2048", "4096", "8192"],
    "digits": ["50", "60"],
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    lam: str = "0.9"
    rho0: str = "3e-5"
    delta_frac: str = "0.25"
    zeta: str = ""                # empty: same as rho0
    eps_target: str = "0"
    n_modes: int = 1024
    digits: int = 115
    tol: str = "1e-46"
    step: str = "0.05"
    min_step: str = "1e-8"
    max_step: str = "0.1"
    max_iter: int = 20
    out: str = "."

    def validate(self):
        n = self.n_modes
        if n < 8 or n & (n - 1):
            raise ConfigError(f"modes must be a power of two >= 8, got {n}")
        if self.digits < 50:
            raise ConfigError(f"digits must be >= 50, got {self.digits}")
        if float(self.rho0) <= 0:
            raise ConfigError("rho0 must be positive")
        if not 0 < float(self.delta_frac) < 1:
            raise ConfigError("delta-frac must lie in (0, 1)")
        if not 0 < float(self.lam):
            raise ConfigError("lambda must be positive")
        return self

    def continuation_config(self):
        return ContinuationConfig(lam=self.lam, n_modes=self.n_modes, digits=self.digits,
                                  tol=self.tol, eps_target=self.eps_target, step=self.step,
                                  min_step=self.min_step, max_step=self.max_step,
                                  max_iter=self.max_iter)


# flag name -> RunConfig attribute
_KEYS = {
    "lambda": "lam", "rho0": "rho0", "delta-frac": "delta_frac", "zeta": "zeta",
    "eps-target": "eps_target", "modes": "n_modes", "digits": "digits", "tol": "tol",
    "step": "step", "min-step": "min_step", "max-step": "max_step", "max-iter": "max_iter",
    "out": "out",
}


def _coerce(attr, value):
    kind = {f.name: f.type for f in fields(RunConfig)}[attr]
    if kind in (int, "int"):
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{attr} expects an integer, got {value!r}") from None
    return str(value).strip()


def read_config_file(path):
    """Parse a flat ``key = value`` file (``#`` starts a comment)."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("_", "-")
        if not sep or key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: cannot parse {raw!r}")
        values[_KEYS[key]] = _coerce(_KEYS[key], value.strip())
    return values


def build_config(args):
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for flag, attr in _KEYS.items():
        v = getattr(args, flag.replace("-", "_"), None)
        if v is not None:
            values[attr] = _coerce(attr, v)
    return RunConfig(**values).validate()


# solution files -----------------------------------------------------------


def _fixed_to_decimal(n, bits, places):
    """Exact rounding of n 2^-bits to ``places`` decimals, as a string."""
    scaled = n * 10 ** places
    q, r = divmod(abs(scaled), 1 << bits)
    if 2 * r >= 1 << bits:
        q += 1
    sign = "-" if n < 0 and q else ""
    digits = str(q).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def _decimal_to_fixed(s, bits):
    s = s.strip()
    neg = s.startswith("-")
    s = s.lstrip("+-")
    whole, _, frac = s.partition(".")
    if not (whole + frac).isdigit():
        raise ValueError(f"malformed fixed-point decimal {s!r}")
    m = int(whole + frac)
    q, r = divmod(m << bits, 10 ** len(frac))
    if 2 * r >= 10 ** len(frac):
        q += 1
    return -q if neg else q


@dataclass
class Solution:
    ctx: object
    lam: object
    eps: object
    mu: object
    omega: object
    rho0: object
    residual: object
    u: PeriodicFunction

    @property
    def K(self):
        return embedding_from_u(self.u, self.omega)

    @property
    def params(self):
        return MapParams(self.eps, self.lam, self.mu)


def save_solution(path, sol):
    ctx = sol.ctx
    d = ctx.decimal_digits
    n = sol.u.n_modes
    head = [
        ("format_version", str(FORMAT_VERSION)),
        ("digits", str(d)),
        ("n_modes", str(n)),
        ("lambda", format_real(sol.lam, ctx)),
        ("eps", format_real(sol.eps, ctx)),
        ("mu", format_real(sol.mu, ctx)),
        ("omega", format_real(sol.omega, ctx)),
        ("rho0", format_real(sol.rho0, ctx)),
        ("residual", format_real(sol.residual, ctx, 20)),
    ]
    lines = [f"# {k} = {v}" for k, v in head]
    lines.append("# k re(u_k) im(u_k); modes -k are complex conjugates")
    places = d + 10
    for k in range(n // 2):
        re = _fixed_to_decimal(int(sol.u.re[k]), ctx.prec, places)
        im = _fixed_to_decimal(int(sol.u.im[k]), ctx.prec, places)
        lines.append(f"{k} {re} {im}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_solution(path):
    header = {}
    body = []
    for raw in Path(path).read_text().splitlines():
        if raw.startswith("#"):
            key, sep, value = raw[1:].partition("=")
            if sep:
                header[key.strip()] = value.strip()
        elif raw.strip():
            body.append(raw.split())
    try:
        if int(header["format_version"]) != FORMAT_VERSION:
            raise ConfigError(f"unsupported solution format {header['format_version']}")
        ctx = make_context(int(header["digits"]))
        n = int(header["n_modes"])
    except KeyError as exc:
        raise ConfigError(f"solution header lacks {exc}") from None
    if len(body) != n // 2:
        raise ConfigError(f"expected {n // 2} coefficient lines, found {len(body)}")
    u = PeriodicFunction.zeros(n, ctx)
    for k, (idx, re, im) in enumerate(body):
        if int(idx) != k:
            raise ConfigError(f"coefficient lines out of order at k = {idx}")
        u.re[k] = _decimal_to_fixed(re, ctx.prec)
        u.im[k] = _decimal_to_fixed(im, ctx.prec)
        if k:
            u.re[n - k] = u.re[k]
            u.im[n - k] = -u.im[k]
    R = ctx.real
    return Solution(ctx, R(header["lambda"]), R(header["eps"]), R(header["mu"]),
                    R(header["omega"]), R(header["rho0"]), R(header["residual"]), u)


def write_branch_csv(path, history, ctx):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "mu", "residual", "iterations"])
        for eps, mu, res, its in history:
            w.writerow([format_real(eps, ctx, 20), format_real(mu, ctx, 20),
                        format_real(res, ctx, 6), its])


# commands ---------------------------------------------------------------


def cmd_continue(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    state = continuation(cfg.continuation_config())
    ctx = make_context(cfg.digits)
    K, mu = state.solution
    eps = state.eps_current
    residual = state.history[-1][2] if state.history else full_residual(K, MapParams(eps, ctx.real(cfg.lam), mu))
    sol = Solution(ctx, ctx.real(cfg.lam), eps, mu, K.omega, ctx.real(cfg.rho0), residual, K.u)
    save_solution(out / "solution.txt", sol)
    write_branch_csv(out / "branch.csv", state.history, ctx)
    print(f"eps = {ctx.mp.nstr(eps, 12)}  mu = {ctx.mp.nstr(mu, 12)}  "
          f"residual = {ctx.mp.nstr(residual, 4)}  ({state.message})")
    return 0 if state.reached_target else 1


def _s(x, digits=30):
    mp = x.context
    if not mp.isfinite(x):
        return str(x)
    return mp.nstr(x, digits, strip_zeros=False)


def certificate_json(c, sol, rho0, delta0, zeta):
    ctx = sol.ctx
    return {
        "format_version": FORMAT_VERSION,
        "eps": _s(sol.eps), "mu": _s(sol.mu), "lambda": _s(sol.lam),
        "n_modes": sol.u.n_modes, "digits": ctx.decimal_digits,
        "rho0": _s(rho0), "delta0": _s(delta0), "zeta": _s(zeta),
        "norms": {k: _s(v) for k, v in c.report.as_dict().items()},
        "ledger": {k: _s(v) for k, v in c.ledger.as_dict().items()},
        "conditions": [{"name": x.name, "lhs": _s(x.lhs), "rhs": _s(x.rhs),
                        "strict": x.strict, "pass": x.passed} for x in c.conditions.conditions],
        "overall": c.overall,
        "kemu": {"bound_K": _s(c.conditions.bound_K), "bound_mu": _s(c.conditions.bound_mu)},
        "agreement_percent": _s(cert.agreement_percent(sol.eps, ctx), 6),
    }


def format_certificate(c):
    mp = c.report.norm_M.context
    rows = [f"{k:<12} {mp.nstr(v, 20)}" for k, v in c.report.as_dict().items()]
    rows.append("")
    for x in c.conditions.conditions:
        op = "<" if x.strict else "<="
        rows.append(f"{x.name:<7} {mp.nstr(x.lhs, 8):>16} {op:>2} {mp.nstr(x.rhs, 8):<16} "
                    f"{'pass' if x.passed else 'FAIL'}")
    rows.append(f"overall: {'pass' if c.overall else 'FAIL'}")
    return "\n".join(rows)


def cmd_certify(path, cfg, out_json=None):
    sol = load_solution(path)
    ctx = sol.ctx
    tol = ctx.real(cfg.tol)
    recheck = full_residual(sol.K, sol.params)
    if recheck > 10 * tol:
        print(f"residual recheck failed: {ctx.mp.nstr(recheck, 4)} > 10 tol", file=sys.stderr)
        return 3
    rho0 = ctx.real(cfg.rho0)
    delta0 = rho0 * ctx.real(cfg.delta_frac)
    zeta = ctx.real(cfg.zeta) if cfg.zeta else rho0
    c = cert.certify(sol.K, sol.mu, sol.params, rho0, delta0, zeta)
    print(format_certificate(c))
    target = Path(out_json) if out_json else Path(path).with_suffix(".json")
    target.write_text(json.dumps(certificate_json(c, sol, rho0, delta0, zeta), indent=2) + "\n")
    return 0 if c.overall else 1


SWEEP_COLUMNS = {
    "rho": ["rho0", "eps_kam", "agreement_percent", "mu", "wall_time_s", "status"],
    "modes": ["n_modes", "eps_kam", "mu", "agreement_percent", "wall_time_s", "status"],
    "digits": ["digits", "eps_kam", "mu", "agreement_percent", "wall_time_s", "status"],
}


def sweep_row(cfg, axis, value):
    """Run one find_eps_kam and return the CSV row as a dict."""
    if axis == "modes":
        cfg = replace(cfg, n_modes=_coerce("n_modes", value))
    elif axis == "digits":
        cfg = replace(cfg, digits=_coerce("digits", value))
    elif axis == "rho":
        cfg = replace(cfg, rho0=str(value))
    key = {"rho": "rho0", "modes": "n_modes", "digits": "digits"}[axis]
    row = {key: value}
    t0 = time.perf_counter()
    try:
        cfg.validate()
        res = cert.find_eps_kam(cfg.continuation_config(), rho0=cfg.rho0,
                                delta_frac=cfg.delta_frac, zeta=cfg.zeta or None)
    except (cert.CertificationError, SolverError, ArithmeticError, ConfigError) as exc:
        row.update(eps_kam="", mu="", agreement_percent="", status=f"failed: {exc}")
    else:
        ctx = res.solution[0].ctx
        row.update(eps_kam=ctx.mp.nstr(res.eps_kam, 10), mu=ctx.mp.nstr(res.mu, 10),
                   agreement_percent=ctx.mp.nstr(res.agreement(), 4), status="ok")
    row["wall_time_s"] = f"{time.perf_counter() - t0:.2f}"
    return row


def cmd_sweep(cfg, axis, values=None, out_csv=None):
    values = values or DEFAULT_AXIS_VALUES[axis]
    if not values:
        raise ConfigError("sweep needs at least one axis value")
    target = Path(out_csv) if out_csv else Path(cfg.out) / f"sweep_{axis}.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    ok = True
    with open(target, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS[axis])
        w.writeheader()
        for v in values:
            row = sweep_row(cfg, axis, v)
            ok &= row["status"] == "ok"
            w.writerow(row)
            fh.flush()
            print(", ".join(f"{k}={row[k]}" for k in SWEEP_COLUMNS[axis]))
    return 0 if ok else 1


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--lambda", dest="lambda", help="dissipation factor (default 0.9)")
    common.add_argument("--rho0", help="strip width for the certificate (default 3e-5)")
    common.add_argument("--delta-frac", help="delta0 / rho0 (default 0.25)")
    common.add_argument("--zeta", help="distance to the domain boundary (default rho0)")
    common.add_argument("--modes", help="number of Fourier modes, a power of two")
    common.add_argument("--digits", help="working precision in decimal digits (default 115)")
    common.add_argument("--tol", help="Newton tolerance on the residual (default 1e-46)")
    common.add_argument("--eps-target", help="final eps of the continuation")
    common.add_argument("--step", help="initial continuation step")
    common.add_argument("--min-step", help="smallest continuation step")
    common.add_argument("--max-step", help="largest continuation step")
    common.add_argument("--max-iter", help="Newton iterations per eps")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dsmkam", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("continue", parents=[common], help="continue the attractor in eps")
    c = sub.add_parser("certify", parents=[common], help="check the KAM conditions for a solution")
    c.add_argument("solution")
    c.add_argument("--json", help="report path (default: solution path with .json)")
    s = sub.add_parser("sweep", parents=[common], help="eps_KAM over rho0, modes or digits")
    s.add_argument("axis", choices=sorted(SWEEP_COLUMNS))
    s.add_argument("--values", help="comma separated axis values")
    s.add_argument("--csv", help="output CSV path")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    try:
        cfg = build_config(args)
        if args.command == "continue":
            return cmd_continue(cfg)
        if args.command == "certify":
            return cmd_certify(args.solution, cfg, args.json)
        values = args.values.split(",") if args.values else None
        return cmd_sweep(cfg, args.axis, values, args.csv)
    except (ConfigError, PrecisionTooLow, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, cert.CertificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
