"""Command-line entry point: ``rmt <subcommand> [options]``.

Every subcommand writes a CSV (with a ``#`` metadata header) or a JSON
document. Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import NumericalError
from .potential import Potential


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"rmt: error: {message}\n")
        raise SystemExit(1)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _float_repr(o):
    """JSON text with 17 significant digits for floats."""
    if isinstance(o, float):
        return "%.17g" % o
    if isinstance(o, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_float_repr(v)}" for k, v in o.items()) + "}"
    if isinstance(o, list):
        return "[" + ", ".join(_float_repr(v) for v in o) + "]"
    return json.dumps(o)


def _parse_grid(text: str, flag: str):
    try:
        a, b, n = text.split(":")
        n = int(n)
        if n < 1:
            raise ValueError
        return np.linspace(float(a), float(b), n)
    except ValueError:
        raise UsageError(f"{flag}: expected a:b:n, got {text!r}") from None


def _parse_interval(text: str, flag: str):
    try:
        c, d = (float(s) for s in text.split(":"))
    except ValueError:
        raise UsageError(f"{flag}: expected c:d, got {text!r}") from None
    if not c < d:
        raise UsageError(f"{flag}: need c < d")
    return c, d


def _parse_potential(text: str) -> Potential:
    try:
        return Potential.parse(text)
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"--potential: {exc}") from None


def _config(args) -> dict:
    skip = {"func", "out", "format", "no_timestamp"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


class Output:
    """Collects a table and/or a report and writes it in the chosen format."""

    def __init__(self, args):
        self.args = args
        self.columns = None
        self.rows = []
        self.report = {}

    def table(self, columns, rows):
        self.columns = list(columns)
        self.rows = rows

    def meta(self) -> dict:
        m = {"tool": "rmtlab", "version": __version__, "config": _config(self.args)}
        if not self.args.no_timestamp:
            m["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        return m

    def render(self) -> str:
        meta = self.meta()
        if self.args.format == "json":
            doc = {"meta": meta}
            if self.report:
                doc["report"] = self.report
            if self.columns is not None:
                doc["columns"] = self.columns
                doc["rows"] = [list(r) for r in self.rows]
            return _float_repr(_jsonable(doc)) + "\n"
        lines = [f"# rmtlab {meta['version']}"]
        if "timestamp" in meta:
            lines.append(f"# timestamp: {meta['timestamp']}")
        lines.append("# config: " + json.dumps(_jsonable(meta["config"]), sort_keys=True))
        for k, v in self.report.items():
            if self.columns is not None:
                lines.append(f"# {k}: " + _float_repr(_jsonable(v)))
        if self.columns is not None:
            lines.append(",".join(self.columns))
            lines.extend(",".join(_fmt(v) for v in r) for r in self.rows)
        else:
            lines.append("key,value")
            for k, v in self.report.items():
                lines.append(f"{k},{_float_repr(_jsonable(v))}")
        return "\n".join(lines) + "\n"

    def write(self):
        text = self.render()
        if self.args.out in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(self.args.out, "w", encoding="utf-8") as fh:
                fh.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_eqdensity(args, out: Output):
    from .equilibrium import equilibrium_measure

    V = _parse_potential(args.potential)
    x = _parse_grid(args.grid, "--grid")
    m = equilibrium_measure(V, args.cuts)
    out.report = {"endpoints": list(m.support.endpoints), "lagrange_l": m.lagrange_l}
    out.table(["x", "density", "effective_potential_minus_l"], zip(x, m.density(x), m.effective_potential(x)))


def cmd_recurrence(args, out: Output):
    from .orthopoly import recurrence_from_weight

    V = _parse_potential(args.potential)
    tab = recurrence_from_weight(V, args.N, args.nmax)
    n = np.arange(tab.nmax + 1)
    out.table(["n", "gamma_sq", "beta", "log_h"], zip(n, tab.gamma_sq, tab.beta, tab.log_h))


def _branches(gsq: np.ndarray, n: np.ndarray, N: float, t: float, g: float):
    """R (upper) / L (lower) branch inside the two-cut range, bulk outside."""
    out = []
    for i, k in enumerate(n):
        if t < 0 and k / N < t * t / (4.0 * g):
            nb = [gsq[j] for j in (i - 1, i + 1) if 0 <= j < len(gsq)]
            out.append("R" if gsq[i] > np.mean(nb) else "L")
        else:
            out.append("bulk")
    return out


def cmd_string_min(args, out: Output):
    from .orthopoly import minimize_hamiltonian

    V = Potential.quartic(args.t, args.g)
    res = minimize_hamiltonian(V, args.N, args.M)
    n = np.arange(1, len(res.gamma_sq) + 1)
    br = _branches(res.gamma_sq, n, args.N, args.t, args.g)
    out.report = {"grad_norm": res.grad_norm, "iterations": res.iterations}
    out.table(["n", "n_over_N", "gamma_sq", "branch"], zip(n, n / args.N, res.gamma_sq, br))


def cmd_kernel(args, out: Output):
    x = _parse_grid(args.grid, "--grid")
    X, Y = np.meshgrid(x, x, indexing="ij")
    if args.mode == "finite-N":
        from .orthopoly import cd_kernel, recurrence_from_weight

        if args.potential is None or args.N is None:
            raise UsageError("--mode finite-N needs --potential and --N")
        V = _parse_potential(args.potential)
        tab = recurrence_from_weight(V, args.N, args.N + 1)
        K = cd_kernel(tab, V, args.N, X, Y)
    else:
        from .kernels import make_kernel

        K = make_kernel(args.kind, b=args.b)(X, Y)
    out.table(["x", "y", "K"], zip(X.ravel(), Y.ravel(), np.ravel(K)))


def cmd_gap(args, out: Output):
    from .kernels import fredholm_det, make_kernel

    c, d = _parse_interval(args.interval, "--interval")
    K = make_kernel(args.kind, b=args.b)
    det = fredholm_det(K, (c, d), tol=args.tol)
    out.report = {"kind": args.kind, "interval": [c, d], "gap_probability": det}


def cmd_tw_cdf(args, out: Output):
    from .painleve import hastings_mcleod, tracy_widom_cdf, tracy_widom_pdf

    x = _parse_grid(args.x, "--x")
    sol = hastings_mcleod()
    out.table(["x", "F", "pdf"], zip(x, tracy_widom_cdf(sol, x), tracy_widom_pdf(sol, x)))


def cmd_hm_solution(args, out: Output):
    from .painleve import hastings_mcleod

    sol = hastings_mcleod(args.y_min, args.y_max, args.nodes)
    out.report = {"collocation_residual": sol.residual}
    out.table(["y", "u", "uprime", "v"], zip(sol.grid, sol.u, sol.w, sol.v))


def cmd_free_energy(args, out: Output):
    from .partition import d2_identity_residual, free_energy, leading_free_energy

    V = _parse_potential(args.potential)
    rep = free_energy(V, args.N, args.method)
    try:
        F = leading_free_energy(V)
    except NumericalError:
        F = None  # the one-cut continuation does not reach this potential
    out.report = {
        "N": rep.N,
        "lnZ": rep.lnZ,
        "F_N": rep.F_N,
        "F_N_minus_gauss": rep.F_N_minus_gauss,
        "F": F,
        "method": rep.method,
        "residuals": {"d2_identity": d2_identity_residual(V, args.N)},
    }


def cmd_transition(args, out: Output):
    from .partition import energy_table, phase_transition_probe

    if args.family != "quartic":
        raise UsageError("--family: only 'quartic' is available")
    t = _parse_grid(args.t, "--t")
    if len(t) < 3:
        raise UsageError("--t: need at least 3 points")
    probe = phase_transition_probe(args.t_c, args.spacing)
    out.report = {"t_c": probe.t_c, "left": list(probe.left), "right": list(probe.right), "gaps": list(probe.gaps)}
    out.table(["t", "F", "dF", "d2F", "d3F"], energy_table(t).tolist())


def cmd_pastur(args, out: Output):
    from .extsource import pastur_density, pastur_roots

    x = _parse_grid(args.grid, "--grid")
    xi = pastur_roots(x, args.a)
    rows = [
        (xv, d, r[0].real, r[0].imag, r[1].real, r[1].imag, r[2].real, r[2].imag)
        for xv, d, r in zip(x, pastur_density(x, args.a), xi)
    ]
    out.table(["x", "density", "re_xi1", "im_xi1", "re_xi2", "im_xi2", "re_xi3", "im_xi3"], rows)


def cmd_mhp_density(args, out: Output):
    from .extsource import mhp_kernel_build, pastur_density, support

    if args.grid is None:
        edges = np.ravel(support(args.a))
        x = np.linspace(edges.min() - 0.5, edges.max() + 0.5, 201)
    else:
        x = _parse_grid(args.grid, "--grid")
    k = mhp_kernel_build(args.n, args.a)
    out.report = {"gram_condition": k.cond}
    out.table(["x", "density", "limit_density"], zip(x, k.density(x), pastur_density(x, args.a)))


def cmd_bridge(args, out: Output):
    from .extsource import branch_points, bridge_map, support

    a, scale = bridge_map(args.t)
    bp = branch_points(a)
    out.report = {
        "t": args.t,
        "a": a,
        "scale": scale,
        "branch_z1": bp.z1,
        "branch_z2": bp.z2,
        "z2_imaginary": bp.imaginary,
        "support": np.ravel(support(a)).tolist(),
        "support_bridge": (np.ravel(support(a)) / scale).tolist(),
    }


def cmd_sample(args, out: Output):
    from .sampler import RNG_ALGORITHM, LogGasChain, metropolis_run

    V = _parse_potential(args.potential)
    chain = LogGasChain(args.N, V, args.seed)
    samples = metropolis_run(chain, args.sweeps, thin=args.thin)
    counts, edges = np.histogram(samples, bins=args.bins)
    summary = {
        "acceptance_rate": chain.acceptance,
        "step": chain.step,
        "rng": RNG_ALGORITHM,
        "kept_sweeps": len(samples),
        "histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
    }
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(_float_repr(_jsonable({"meta": out.meta(), "summary": summary})) + "\n")
    out.report = {"acceptance_rate": chain.acceptance, "rng": RNG_ALGORITHM}
    burn = int(0.2 * args.sweeps)
    rows = (
        (burn + k * args.thin, i, samples[k, i]) for k in range(len(samples)) for i in range(args.N)
    )
    out.table(["sweep", "particle", "position"], rows)


def _identity_checks() -> list:
    from .orthopoly import dv_derivatives, recurrence_from_weight, string_residual
    from .partition import d2_identity_residual

    V = Potential.quartic(-1.0)
    N, n = 8, 5
    results = []
    # first-order deformation of ln h_n against a central difference in v_2
    eps = 1e-5
    tab = recurrence_from_weight(V, N, n + 8)
    dlnh = dv_derivatives(V, N, 2, n, tab)[0]
    fd = (
        recurrence_from_weight(V.shifted(2, eps), N, n + 2).log_h[n]
        - recurrence_from_weight(V.shifted(2, -eps), N, n + 2).log_h[n]
    ) / (2 * eps)
    rel = abs(dlnh - fd) / abs(fd)
    results.append(("dlnh_dv2", rel, rel < 1e-5))
    rel = d2_identity_residual(V, N)
    results.append(("d2_lnZ_dv2", rel, rel < 1e-4))
    worst = max(max(abs(r) for r in string_residual(V, tab, k)) for k in range(1, n + 1))
    results.append(("string_equations", worst, worst < 1e-9))
    return results


def cmd_check(args, out: Output):
    if args.suite not in ("identities", "all"):
        raise UsageError(f"--suite: unknown suite {args.suite!r}")
    results = _identity_checks()
    out.report = {name: {"value": val, "pass": ok} for name, val, ok in results}
    out.report["passed"] = all(ok for _, _, ok in results)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="-", help="output path ('-' for stdout)")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from metadata")
    common.add_argument("--threads", type=int, default=None, help="worker cap (fallback: RMT_THREADS)")

    p = _Parser(prog="rmt", description="Unitary-invariant random matrix toolkit")
    p.add_argument("--version", action="version", version=f"rmtlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help):
        s = sub.add_parser(name, parents=[common], help=help)
        s.set_defaults(func=func)
        return s

    s = add("eqdensity", cmd_eqdensity, "equilibrium density on a grid")
    s.add_argument("--potential", required=True)
    s.add_argument("--cuts", type=int, default=1)
    s.add_argument("--grid", default="-2:2:401")

    s = add("recurrence", cmd_recurrence, "recurrence coefficients of exp(-N V)")
    s.add_argument("--potential", required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--nmax", type=int, default=None)

    s = add("string-min", cmd_string_min, "quartic string equations by Hamiltonian minimisation")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--g", type=float, default=1.0)
    s.add_argument("--M", type=int, default=None)

    s = add("kernel", cmd_kernel, "correlation kernel on a grid")
    s.add_argument("--mode", choices=["limit", "finite-N"], default="limit")
    s.add_argument("--kind", choices=["sine", "airy", "pearcey"], default="sine")
    s.add_argument("--b", type=float, default=0.0)
    s.add_argument("--grid", default="-2:2:21")
    s.add_argument("--potential", default=None)
    s.add_argument("--N", type=int, default=None)

    s = add("gap", cmd_gap, "gap probability det(1 - K) on an interval")
    s.add_argument("--kind", choices=["sine", "airy", "pearcey"], default="sine")
    s.add_argument("--b", type=float, default=0.0)
    s.add_argument("--interval", required=True)
    s.add_argument("--tol", type=float, default=1e-8)

    s = add("tw-cdf", cmd_tw_cdf, "Tracy-Widom distribution")
    s.add_argument("--x", default="-4:2:61")

    s = add("hm-solution", cmd_hm_solution, "Hastings-McLeod solution on its grid")
    s.add_argument("--y-min", type=float, default=-12.0)
    s.add_argument("--y-max", type=float, default=8.0)
    s.add_argument("--nodes", type=int, default=160)

    s = add("free-energy", cmd_free_energy, "finite-N and leading free energy")
    s.add_argument("--potential", required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--method", choices=["product", "integral"], default="product")

    s = add("transition", cmd_transition, "third-order transition of the quartic family")
    s.add_argument("--family", default="quartic")
    s.add_argument("--t", default="-2.2:-1.8:81")
    s.add_argument("--t-c", type=float, default=-2.0)
    s.add_argument("--spacing", type=float, default=1e-2)

    s = add("pastur", cmd_pastur, "limiting density with an external source")
    s.add_argument("--a", type=float, required=True)
    s.add_argument("--grid", default="-3:3:301")

    s = add("mhp-density", cmd_mhp_density, "finite-n density with an external source")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--a", type=float, required=True)
    s.add_argument("--grid", default=None)

    s = add("bridge", cmd_bridge, "non-intersecting Brownian bridge parameters at time t")
    s.add_argument("--t", type=float, required=True)

    s = add("sample", cmd_sample, "Metropolis sampling of the eigenvalue gas")
    s.add_argument("--potential", required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--sweeps", type=int, default=100000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--thin", type=int, default=100)
    s.add_argument("--bins", type=int, default=20)
    s.add_argument("--summary", default=None, help="path for the JSON summary")

    s = add("check", cmd_check, "identity self-checks; nonzero exit on failure")
    s.add_argument("--suite", default="identities")
    return p


def _set_threads(n):
    if n is None:
        env = os.environ.get("RMT_THREADS")
        if not env:
            return
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"RMT_THREADS: not an integer: {env!r}") from None
    if n < 1:
        raise UsageError("--threads: must be >= 1")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _glue_negative_values(argv):
    """Attach values such as ``-2:2:401`` to their flag so they are not read as options."""
    out = []
    for tok in argv:
        if (
            out
            and out[-1].startswith("--")
            and "=" not in out[-1]
            and len(tok) > 1
            and tok[0] == "-"
            and (tok[1].isdigit() or tok[1] == ".")
        ):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_glue_negative_values(argv))
    if getattr(args, "nmax", 0) is None:
        args.nmax = args.N
    try:
        _set_threads(args.threads)
        out = Output(args)
        args.func(args, out)
        out.write()
    except UsageError as exc:
        sys.stderr.write(f"rmt: error: {exc}\n")
        return 1
    except NumericalError as exc:
        sys.stderr.write(f"rmt: numerical failure: {type(exc).__name__}: {exc}\n")
        return 2
    if args.command == "check" and not out.report.get("passed", False):
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
