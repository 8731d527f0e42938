"""Command line for the lattice ensemble laboratory.

Subcommands: sample, dos, minimize, relation, dynamics, verify,
free-energy.  Shared flags (--seed, --threads, --out, --format, --config)
attach to every subcommand; GGE_SEED in the environment supplies the seed
when --seed is absent.  A config file holds flat `key = value` lines and
fills in any option the command line left unset; explicit flags win.

Every output file embeds the effective seed and a hash of the effective
configuration, so reruns with the same inputs produce identical bytes.
Potentials are written as comma-separated coefficients: `c0=..,c1=..,s1=..`
builds a trigonometric polynomial on the torus, `t0=..,t1=..` a Chebyshev
polynomial on [-1, 1].
"""

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .cmv_core import (NumericalError, build_cmv, build_periodic_cmv,
                       eigen_angles)
from .dynamics import (FlowState, IntegratorParams, conservation_report,
                       integrate, lax_residual)
from .equilibrium import (ConvergenceError, SolverParams, free_energy_interval,
                          free_energy_torus, minimize_interval, minimize_torus)
from .ldp_lab import (check_coupling_lemma, check_dos_relation,
                      check_exp_moment, check_free_energy_relation,
                      estimate_free_energy)
from .potentials import Potential
from .sampling import (EnsembleSpec, McmcParams, make_rng, sample_al_gge,
                       sample_circular_beta, sample_jacobi_beta,
                       sample_schur_gge)
from .spectral_measures import (EmpiricalMeasure, IntervalEmpiricalMeasure,
                                fourier_coeffs)

__all__ = ["build_parser", "load_config", "main", "parse_potential"]


# --------------------------------------------------------------------------
# configuration plumbing


@dataclass(frozen=True)
class RunConfig:
    """Effective run parameters with their stable hash."""

    command: str
    params: tuple
    seed: int
    out: str
    fmt: str

    @property
    def hash(self):
        digest = hashlib.sha256(self.command.encode())
        for key, value in self.params:
            digest.update(f"{key}={value};".encode())
        return digest.hexdigest()[:12]


def parse_potential(text):
    """Parse `c0=..,c1=..,s1=..` (torus) or `t0=..,t1=..` (interval)."""
    if text is None or text.strip() in ("", "none"):
        return None
    cos, sin, cheb = {}, {}, {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ValueError(f"bad potential term {item!r}; expected key=value")
        key, _, value = item.partition("=")
        key = key.strip()
        kind, index = key[:1], key[1:]
        if kind not in ("c", "s", "t") or not index.isdigit():
            raise ValueError(f"bad potential key {key!r}; use c<k>, s<k> or t<k>")
        k = int(index)
        if kind == "s" and k == 0:
            raise ValueError("sine coefficients start at s1")
        try:
            coeff = float(value)
        except ValueError:
            raise ValueError(f"bad potential value {value!r} for {key}") from None
        {"c": cos, "s": sin, "t": cheb}[kind][k] = coeff
    if cheb and (cos or sin):
        raise ValueError("cannot mix torus (c/s) and interval (t) coefficients")
    if cheb:
        arr = np.zeros(max(cheb) + 1)
        for k, val in cheb.items():
            arr[k] = val
        return Potential("interval", cheb=arr)
    c_arr = np.zeros(max(cos, default=0) + 1)
    for k, val in cos.items():
        c_arr[k] = val
    s_arr = np.zeros(max(sin, default=0))
    for k, val in sin.items():
        s_arr[k - 1] = val
    return Potential("torus", cos=c_arr, sin=s_arr)


def load_config(path):
    """Read a flat key-value config file; `#` starts a comment."""
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line {raw.strip()!r}")
            key, _, value = line.partition("=")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


_CONFIG_INT = {"seed", "n", "samples", "bins", "frames", "burn_in", "thinning",
               "grid_size", "max_iterations", "threads", "k_max"}
_CONFIG_FLOAT = {"beta", "delta", "dt", "t_final", "rmax", "threshold",
                 "damping", "tolerance"}
_CONFIG_BOOL = {"angles"}


def _convert_config_value(key, raw):
    if key in _CONFIG_INT:
        return int(raw)
    if key in _CONFIG_FLOAT:
        return float(raw)
    if key in _CONFIG_BOOL:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"bad boolean {raw!r} for {key}")
    return raw


def _apply_config(args, data, parser):
    """Fill parser gaps from the config file; explicit flags keep priority."""
    for key, raw in data.items():
        if not hasattr(args, key) or key in ("func", "command", "config"):
            parser.error(f"unknown config key {key!r}")
        try:
            value = _convert_config_value(key, raw)
        except ValueError as exc:
            parser.error(f"config key {key}: {exc}")
        current = getattr(args, key)
        if current is None or (key in _CONFIG_BOOL and current is False):
            setattr(args, key, value)


_FALLBACKS = {
    "sample": {"ensemble": "al", "n": 32, "samples": 100},
    "dos": {"ensemble": "al", "n": 64, "samples": 200, "bins": 64, "k_max": 16},
    "minimize": {"domain": None},
    "relation": {"ensemble": "al", "n": 64, "samples": 500, "threshold": 0.02,
                 "k_max": 16},
    "dynamics": {"flow": "al", "n": 32, "dt": 1e-3, "t_final": 1.0,
                 "frames": 256, "init": "random", "rmax": 0.3},
    "verify": {},
    "free-energy": {"ensemble": "al", "n": 32, "samples": 200},
}

_NEEDS_BETA = {"sample", "dos", "minimize", "relation", "free-energy"}


def _finalize(args, parser):
    for key, value in _FALLBACKS.get(args.command, {}).items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    if args.out is None:
        args.out = "."
    if args.format is None:
        args.format = "csv"
    if args.command in _NEEDS_BETA and args.beta is None:
        parser.error(f"{args.command}: --beta is required")
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be positive")
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)


def _resolve_seed(args):
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get("GGE_SEED")
    if env is not None and env.strip():
        return int(env)
    return int(np.random.SeedSequence().entropy % (2**63))


def _run_config(args):
    skip = {"func", "command", "config", "out", "seed", "threads"}
    params = tuple(sorted((k, str(v)) for k, v in vars(args).items()
                          if k not in skip))
    return RunConfig(command=args.command, params=params,
                     seed=_resolve_seed(args), out=args.out, fmt=args.format)


# --------------------------------------------------------------------------
# output helpers


def _out_path(cfg, name):
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def _write_json(cfg, name, doc):
    if isinstance(doc, str):
        doc = json.loads(doc)
    doc["config_hash"] = cfg.hash
    doc["seed"] = cfg.seed
    path = _out_path(cfg, name)
    with open(path, "w") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(cfg, name, header, rows):
    path = _out_path(cfg, name)
    with open(path, "w") as fh:
        fh.write(f"# config_hash={cfg.hash}\n# seed={cfg.seed}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    return path


def _mcmc_from(args):
    return McmcParams(sweeps=args.samples, burn_in=args.burn_in,
                      thinning=args.thinning)


def _sample_batch(args, rng):
    """Draw one batch with EnsembleSpec semantics for beta and n."""
    v = parse_potential(args.potential)
    mcmc = _mcmc_from(args)
    kind = args.ensemble
    if kind == "al":
        return sample_al_gge(EnsembleSpec("al", args.n, args.beta, v), mcmc, rng)
    if kind == "schur":
        return sample_schur_gge(EnsembleSpec("schur", args.n, args.beta, v),
                                mcmc, rng)
    if kind == "circular":
        return sample_circular_beta(args.n, args.beta, v, mcmc, rng)
    return sample_jacobi_beta(args.n, args.beta, v, mcmc, rng)


def _batch_angles(batch):
    build = build_periodic_cmv if batch.kind in ("al", "schur") else build_cmv
    rows = np.empty((batch.n_samples, batch.size))
    for i in range(batch.n_samples):
        rows[i] = np.sort(eigen_angles(build(batch.alphas[i].astype(complex))))
    return rows


# --------------------------------------------------------------------------
# subcommands


def cmd_sample(args, cfg):
    """Draw coefficient vectors and optionally their eigen-angles."""
    rng = make_rng(cfg.seed)
    batch = _sample_batch(args, rng)
    a = batch.alphas.astype(complex)
    angle_rows = _batch_angles(batch) if args.angles else None

    if cfg.fmt == "csv":
        header = ["sample"]
        for j in range(1, batch.size + 1):
            header += [f"re_alpha_{j}", f"im_alpha_{j}"]
        rows = []
        for i in range(batch.n_samples):
            row = [float(i)]
            for j in range(batch.size):
                row += [a[i, j].real, a[i, j].imag]
            rows.append(row)
        paths = [_write_csv(cfg, "samples.csv", header, rows)]
        if angle_rows is not None:
            h2 = ["sample"] + [f"theta_{j}" for j in range(1, batch.size + 1)]
            paths.append(_write_csv(cfg, "angles.csv", h2,
                                    [[float(i)] + list(r)
                                     for i, r in enumerate(angle_rows)]))
    else:
        doc = {
            "ensemble": batch.kind,
            "beta": batch.beta,
            "n_samples": batch.n_samples,
            "size": batch.size,
            "acceptance_rate": batch.acceptance_rate,
            "alphas_re": a.real.tolist(),
            "alphas_im": a.imag.tolist(),
        }
        if angle_rows is not None:
            doc["angles"] = angle_rows.tolist()
        paths = [_write_json(cfg, "samples.json", doc)]

    acc = "exact" if batch.acceptance_rate is None else f"{batch.acceptance_rate:.3f}"
    print(f"sample: {batch.kind} n_samples={batch.n_samples} size={batch.size} "
          f"beta={batch.beta:g} acceptance={acc} mean_abs_sq="
          f"{float(np.mean(np.abs(a) ** 2)):.4f} seed={cfg.seed} -> "
          + ", ".join(paths))
    return 0


def cmd_dos(args, cfg):
    """Monte Carlo density of states: histogram plus Fourier coefficients."""
    rng = make_rng(cfg.seed)
    batch = _sample_batch(args, rng)
    angles = _batch_angles(batch).ravel()
    on_torus = batch.kind in ("al", "circular")
    if on_torus:
        pool = angles
        lo, hi = -np.pi, np.pi
        measure = EmpiricalMeasure(pool)
    else:
        # fixed boundary coefficients can pin eigenvalues at exactly +-1
        pool = np.clip(np.cos(angles), -1.0 + 1e-12, 1.0 - 1e-12)
        lo, hi = -1.0, 1.0
        measure = IntervalEmpiricalMeasure(pool)
    counts, edges = np.histogram(pool, bins=args.bins, range=(lo, hi),
                                 density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    coeffs = fourier_coeffs(measure, k_max=args.k_max).c

    if cfg.fmt == "csv":
        paths = [
            _write_csv(cfg, "dos_histogram.csv", ["center", "density"],
                       np.column_stack([centers, counts])),
            _write_csv(cfg, "dos_fourier.csv", ["k", "re", "im"],
                       [[float(k + 1), c.real, c.imag]
                        for k, c in enumerate(coeffs)]),
        ]
    else:
        doc = {
            "ensemble": batch.kind,
            "beta": batch.beta,
            "n_samples": batch.n_samples,
            "domain": "torus" if on_torus else "interval",
            "bin_centers": centers.tolist(),
            "density": counts.tolist(),
            "fourier_re": coeffs.real.tolist(),
            "fourier_im": coeffs.imag.tolist(),
        }
        paths = [_write_json(cfg, "dos.json", doc)]

    mass = float(np.sum(counts * np.diff(edges)))
    print(f"dos: {batch.kind} pooled {pool.size} points, histogram mass "
          f"{mass:.6f}, |c_1| = {abs(coeffs[0]):.4f} -> " + ", ".join(paths))
    return 0


def cmd_minimize(args, cfg):
    """Minimize the free-energy functional and write the density."""
    v = parse_potential(args.potential)
    domain = args.domain or (v.domain if v is not None else "torus")
    if v is not None and v.domain != domain:
        raise ValueError(f"potential lives on the {v.domain}, not {domain}")
    params = SolverParams(
        damping=args.damping if args.damping is not None else 0.5,
        tolerance=args.tolerance if args.tolerance is not None else 1e-10,
        max_iterations=(args.max_iterations
                        if args.max_iterations is not None else 20000),
        grid_size=args.grid_size if args.grid_size is not None else 1024,
    )
    if domain == "torus":
        rho = minimize_torus(v, args.beta, params=params)
        breakdown = free_energy_torus(rho, v, args.beta)
    else:
        rho = minimize_interval(v, args.beta, params=params)
        breakdown = free_energy_interval(rho, v, args.beta)

    report = {
        "domain": domain,
        "beta": args.beta,
        "potential": v.to_dict() if v is not None else None,
        "free_energy": {
            "interaction": breakdown.interaction,
            "potential": breakdown.potential,
            "entropy": breakdown.entropy,
            "total": breakdown.total,
        },
        "residual": rho.residual,
        "iterations": rho.iterations,
        "edge_masses": list(rho.edge_masses),
        "grid_size": params.grid_size,
    }
    if cfg.fmt == "csv":
        paths = [_write_json(cfg, "minimize.json", report),
                 _write_csv(cfg, "density.csv", ["node", "density", "weight"],
                            np.column_stack([rho.nodes, rho.values,
                                             rho.weights]))]
    else:
        report["nodes"] = rho.nodes.tolist()
        report["density"] = rho.values.tolist()
        report["weights"] = rho.weights.tolist()
        paths = [_write_json(cfg, "minimize.json", report)]
    print(f"minimize: {domain} beta={args.beta:g} total="
          f"{breakdown.total:.8f} residual={rho.residual:.3e} "
          f"iterations={rho.iterations} -> " + ", ".join(paths))
    return 0


def cmd_relation(args, cfg):
    """Density-of-states consistency check between sampler and solver."""
    v = parse_potential(args.potential)
    rep = check_dos_relation(args.ensemble, v, args.beta, args.n,
                             mcmc=_mcmc_from(args), delta=args.delta,
                             rng=make_rng(cfg.seed),
                             threshold=args.threshold, k_max=args.k_max)
    path = _write_json(cfg, "relation.json", rep.to_json())
    verdict = "pass" if rep.passed else "FAIL"
    print(f"relation: {args.ensemble} beta={args.beta:g} D={rep.d_value:.5f} "
          f"threshold={rep.threshold:g} {verdict} -> {path}")
    return 0


def cmd_dynamics(args, cfg):
    """Integrate one flow, write the trajectory and conservation report."""
    rng = make_rng(cfg.seed)
    n = args.n
    if args.init == "constant":
        if args.flow == "schur":
            a0 = np.full(n, float(args.rmax))
        else:
            a0 = np.full(n, complex(args.rmax))
    else:
        if args.flow == "schur":
            a0 = rng.uniform(-args.rmax, args.rmax, size=n)
        else:
            radius = args.rmax * np.sqrt(rng.uniform(size=n))
            a0 = radius * np.exp(2j * np.pi * rng.uniform(size=n))
    state = FlowState(a0)
    params = IntegratorParams(dt=args.dt, t_final=args.t_final)
    traj = integrate(state, args.flow, params, max_frames=args.frames)
    report = conservation_report(traj)
    residual = (float(lax_residual(traj.initial))
                if args.flow == "al" else None)

    tpath = _out_path(cfg, "trajectory.csv")
    traj.to_csv(tpath)
    with open(tpath) as fh:
        body = fh.read()
    with open(tpath, "w") as fh:
        fh.write(f"# config_hash={cfg.hash}\n# seed={cfg.seed}\n" + body)

    doc = report.to_json()
    if isinstance(doc, str):
        doc = json.loads(doc)
    doc["lax_residual"] = residual
    doc["t_final"] = args.t_final
    jpath = _write_json(cfg, "conservation.json", doc)
    lax = "n/a" if residual is None else f"{residual:.3e}"
    print(f"dynamics: {args.flow} n={n} dt={args.dt:g} T={args.t_final:g} "
          f"max_drift={report.max_drift:.3e} lax_residual={lax} -> "
          f"{tpath}, {jpath}")
    return 0


_VERIFY_SUITE = ("coupling", "exp_moment", "dos_al", "dos_schur",
                 "free_energy_relation")


def _verify_one(name, scale, rng):
    s = scale if scale is not None else 1
    if name == "coupling":
        return check_coupling_lemma(3.0, 0.5, 20000 * s, rng=rng)
    if name == "exp_moment":
        return check_exp_moment((0.1, 0.5, 0.9), 20000 * s, rng=rng)
    if name == "dos_al":
        return check_dos_relation("al", None, 1.0, 32,
                                  mcmc=McmcParams(sweeps=1000 * s), rng=rng)
    if name == "dos_schur":
        return check_dos_relation("schur", None, 1.0, 32,
                                  mcmc=McmcParams(sweeps=1000 * s), rng=rng)
    if name == "free_energy_relation":
        v = Potential("torus", cos=[0.0, 0.5])
        return check_free_energy_relation(v, 1.0, delta=0.1,
                                          mcmc=McmcParams(sweeps=400 * s),
                                          rng=rng, n=32)
    raise ValueError(f"unknown check {name!r}; choose from {_VERIFY_SUITE}")


def cmd_verify(args, cfg):
    """Run the statistical check suite; exit 0 only if everything passes."""
    names = (args.check,) if args.check else _VERIFY_SUITE
    if args.check and args.check not in _VERIFY_SUITE:
        raise ValueError(f"unknown check {args.check!r}; "
                         f"choose from {_VERIFY_SUITE}")
    rng = make_rng(cfg.seed)
    failures = []
    for name in names:
        rep = _verify_one(name, args.samples, rng)
        _write_json(cfg, f"{name}.json", rep.to_json())
        verdict = "PASS" if rep.passed else "FAIL"
        print(f"{name}: {verdict}")
        if not rep.passed:
            failures.append(name)
    if failures:
        print("failing checks: " + ", ".join(failures), file=sys.stderr)
        return 1
    return 0


def cmd_free_energy(args, cfg):
    """Thermodynamic-integration free energy of one ensemble."""
    v = parse_potential(args.potential)
    grid = None
    if args.s_grid:
        grid = tuple(float(x) for x in args.s_grid.split(","))
    fe = estimate_free_energy(args.ensemble, v, args.beta, s_grid=grid,
                              mcmc=_mcmc_from(args), rng=make_rng(cfg.seed),
                              n=args.n)
    path = _write_json(cfg, "free_energy.json", fe.to_json())
    print(f"free-energy: {args.ensemble} beta={args.beta:g} value="
          f"{fe.value:.6f} std_error={fe.std_error:.6f} -> {path}")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="random seed; GGE_SEED is the fallback")
    common.add_argument("--threads", type=int, default=None,
                        help="worker thread cap for numerical backends")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="data file format (default csv)")
    common.add_argument("--config", default=None,
                        help="flat key=value file merged under the flags")

    parser = argparse.ArgumentParser(
        prog="ggelab",
        description="Gibbs ensembles of unitary lattice Lax matrices.")
    sub = parser.add_subparsers(dest="command", required=True)

    def mcmc_opts(p):
        p.add_argument("--samples", type=int, default=None,
                       help="kept Monte Carlo states")
        p.add_argument("--burn-in", type=int, default=None)
        p.add_argument("--thinning", type=int, default=None)

    p = sub.add_parser("sample", parents=[common],
                       help="draw coefficient vectors from one ensemble")
    p.add_argument("--ensemble", choices=("al", "schur", "circular", "jacobi"),
                   default=None)
    p.add_argument("--n", type=int, default=None,
                   help="matrix size (al/schur/circular) or pairs (jacobi)")
    p.add_argument("--beta", type=float, default=None,
                   help="inverse temperature; per-site rate for circular")
    p.add_argument("--potential", default=None)
    p.add_argument("--angles", action="store_true", default=False,
                   help="also write sorted eigen-angles")
    mcmc_opts(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("dos", parents=[common],
                       help="Monte Carlo density of states")
    p.add_argument("--ensemble", choices=("al", "schur", "circular", "jacobi"),
                   default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--potential", default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--k-max", type=int, default=None)
    mcmc_opts(p)
    p.set_defaults(func=cmd_dos)

    p = sub.add_parser("minimize", parents=[common],
                       help="minimize a free-energy functional")
    p.add_argument("--domain", choices=("torus", "interval"), default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--potential", default=None)
    p.add_argument("--grid-size", type=int, default=None)
    p.add_argument("--damping", type=float, default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--max-iterations", type=int, default=None)
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("relation", parents=[common],
                       help="density-of-states consistency check")
    p.add_argument("--ensemble", choices=("al", "schur"), default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--potential", default=None)
    p.add_argument("--delta", type=float, default=None,
                   help="finite-difference step for the target")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--k-max", type=int, default=None)
    mcmc_opts(p)
    p.set_defaults(func=cmd_relation)

    p = sub.add_parser("dynamics", parents=[common],
                       help="integrate a flow and check conservation")
    p.add_argument("--flow", choices=("al", "schur"), default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--init", choices=("random", "constant"), default=None)
    p.add_argument("--rmax", type=float, default=None,
                   help="radius of the initial data")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("verify", parents=[common],
                       help="run the statistical check suite")
    p.add_argument("--check", default=None,
                   help="run a single named check instead of the suite")
    p.add_argument("--samples", type=int, default=None,
                   help="scale factor on per-check sample counts")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("free-energy", parents=[common],
                       help="thermodynamic-integration free energy")
    p.add_argument("--ensemble", choices=("al", "schur", "circular", "jacobi"),
                   default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--potential", default=None)
    p.add_argument("--s-grid", default=None,
                   help="comma-separated coupling nodes from 0 to 1")
    mcmc_opts(p)
    p.set_defaults(func=cmd_free_energy)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            data = load_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(f"config file: {exc}")
        _apply_config(args, data, parser)
    _finalize(args, parser)
    cfg = _run_config(args)
    try:
        return args.func(args, cfg)
    except ConvergenceError as exc:
        print(f"error: minimization did not converge: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
