"""Samplers for Verblunsky-coefficient ensembles.

Zero-potential laws are sampled exactly; a nonzero potential is handled
by Metropolis-within-Gibbs with fresh single-site proposals drawn from
the zero-potential marginals, so the acceptance probability reduces to
min(1, exp(-delta Tr V(E))) with the trace increment evaluated exactly
through power traces of the Lax matrix.
"""

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import cmv_core as cc
from .potentials import Potential

__all__ = [
    "ThetaParams",
    "CoupledPair",
    "CoupledFamily",
    "McmcParams",
    "EnsembleSpec",
    "SampleBatch",
    "SeededGenerator",
    "make_rng",
    "sample_theta",
    "sample_chi",
    "sample_coupled_pair",
    "sample_coupled_family",
    "sample_al_gge",
    "sample_schur_gge",
    "sample_circular_beta",
    "sample_jacobi_beta",
]

ENSEMBLE_KINDS = ("al", "schur", "circular", "jacobi")


class SeededGenerator(np.random.Generator):
    """PCG64 generator that remembers the integer seed it was built from.

    The recorded seed lets every emitted batch (and any file written from
    it) identify the stream it came from; within a batch the row index is
    the stream index.
    """

    def __init__(self, seed):
        seed = int(seed) & (2**64 - 1)
        super().__init__(np.random.PCG64(seed))
        self.seed_value = seed


def make_rng(seed=None):
    """Build the package generator; an existing generator passes through.

    Resolution order: explicit argument, the ``GGE_SEED`` environment
    variable, fresh OS entropy.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        env = os.environ.get("GGE_SEED")
        if env is not None:
            seed = int(env)
    if seed is None:
        seed = int.from_bytes(os.urandom(8), "little")
    return SeededGenerator(seed)


# --------------------------------------------------------------------------
# single-site laws


@dataclass(frozen=True)
class ThetaParams:
    """Parameters of the disk law with density ~ (1 - |z|^2)^((nu-3)/2).

    Attributes:
        nu: shape parameter, must exceed 1.
        method: "radial" draws |z|^2 ~ Beta(1, (nu-1)/2) with a uniform
            phase; "ratio" builds (X1 + i X2)/sqrt(X1^2 + X2^2 + Y^2)
            with Y a chi variable with nu - 1 degrees of freedom.
    """

    nu: float
    method: str = "radial"

    def __post_init__(self):
        if not self.nu > 1.0:
            raise ValueError(f"nu must exceed 1, got {self.nu}")
        if self.method not in ("radial", "ratio"):
            raise ValueError(f"unknown method {self.method!r}")


def sample_theta(params, rng, size=None):
    """Draw from the rotation-invariant disk law Theta_nu.

    `params` may be a ThetaParams or a bare nu value.  Both methods
    target the same distribution; the second moment is E|z|^2 = 2/(nu+1)
    and nu = 3 is the uniform law on the disk.
    """
    if not isinstance(params, ThetaParams):
        params = ThetaParams(float(params))
    nu = params.nu
    if params.method == "radial":
        r = np.sqrt(rng.beta(1.0, (nu - 1.0) / 2.0, size=size))
        phase = rng.uniform(0.0, 2.0 * np.pi, size=size)
        return _into_open_disk(r * np.exp(1j * phase))
    x1 = rng.standard_normal(size)
    x2 = rng.standard_normal(size)
    y = sample_chi(nu - 1.0, rng, size)
    return _into_open_disk((x1 + 1j * x2) / np.sqrt(x1**2 + x2**2 + y**2))


def _into_open_disk(z, bound=1.0 - 1e-15):
    """Pull boundary-grazing draws back to the largest usable modulus.

    For nu barely above 1 the radial law puts visible mass within one ulp
    of the unit circle, where rounding can push |z| to 1 or slightly past
    it; downstream factorizations need |z| < 1 strictly.
    """
    r = np.abs(z)
    hot = r >= bound
    if np.any(hot):
        z = np.where(hot, z * (bound / np.maximum(r, bound)), z)
    return z


def sample_chi(dof, rng, size=None):
    """Draw chi variables; fractional degrees of freedom are allowed."""
    if not dof > 0:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")
    return np.sqrt(rng.gamma(dof / 2.0, 2.0, size=size))


# --------------------------------------------------------------------------
# couplings between neighbouring shape parameters


@dataclass(frozen=True)
class CoupledPair:
    """Joint draw of (alpha_nu, alpha_{nu+h}) with its distance bound Z_h.

    Both marginals are exact Theta laws and every sample satisfies
    |alpha_nu - alpha_nu_h| <= z_h as well as the same bound for the
    complementary radii sqrt(1 - |alpha|^2).  Z_h has density h w^(h-1)
    on (0, 1).
    """

    alpha_nu: np.ndarray
    alpha_nu_h: np.ndarray
    z_h: np.ndarray
    nu: float
    h: float


@dataclass(frozen=True)
class CoupledFamily:
    """Monotone coupling of Theta draws across several increments h.

    z[:, k] is the bound variable for h_values[k]; columns are pointwise
    nondecreasing because the underlying chi variables are built by
    accumulating independent increments.
    """

    alpha_nu: np.ndarray
    alphas: np.ndarray
    z: np.ndarray
    nu: float
    h_values: tuple


def _check_h(h):
    if not 0.0 < h < 1.0:
        raise ValueError(f"h must lie in (0, 1), got {h}")


def sample_coupled_pair(nu, h, rng, size=None):
    """Couple Theta_nu and Theta_(nu+h) on common Gaussian data."""
    ThetaParams(nu)
    _check_h(h)
    x1 = rng.standard_normal(size)
    x2 = rng.standard_normal(size)
    s = x1**2 + x2**2
    y = sample_chi(nu - 1.0, rng, size)
    y_h = sample_chi(h, rng, size)
    w = x1 + 1j * x2
    return CoupledPair(
        alpha_nu=w / np.sqrt(s + y**2),
        alpha_nu_h=w / np.sqrt(s + y**2 + y_h**2),
        z_h=y_h / np.sqrt(s + y_h**2),
        nu=float(nu),
        h=float(h),
    )


def sample_coupled_family(nu, h_values, rng, size=None):
    """Couple Theta_(nu+h) across a strictly increasing grid of h.

    The chi variables for successive h share their lower increments, so
    z columns are monotone in h sample by sample.
    """
    ThetaParams(nu)
    h = np.asarray(h_values, float)
    if h.ndim != 1 or h.size == 0:
        raise ValueError("h_values must be a nonempty 1d sequence")
    for val in h:
        _check_h(val)
    if np.any(np.diff(h) <= 0):
        raise ValueError("h_values must be strictly increasing")
    shape = () if size is None else (size,)
    x1 = rng.standard_normal(shape)
    x2 = rng.standard_normal(shape)
    s = x1**2 + x2**2
    y = sample_chi(nu - 1.0, rng, shape)
    w = x1 + 1j * x2
    alpha_nu = w / np.sqrt(s + y**2)
    z = np.empty(shape + (h.size,))
    alphas = np.empty(shape + (h.size,), complex)
    yh_sq = np.zeros(shape)
    prev = 0.0
    for k, hk in enumerate(h):
        yh_sq = yh_sq + sample_chi(hk - prev, rng, shape) ** 2
        prev = hk
        z[..., k] = np.sqrt(yh_sq / (s + yh_sq))
        alphas[..., k] = w / np.sqrt(s + y**2 + yh_sq)
    return CoupledFamily(alpha_nu=alpha_nu, alphas=alphas, z=z,
                         nu=float(nu), h_values=tuple(float(v) for v in h))


# --------------------------------------------------------------------------
# ensemble specifications


@dataclass(frozen=True)
class McmcParams:
    """Chain controls for the Metropolis samplers.

    Attributes:
        sweeps: number of kept states to emit (>= 1).  At the default
            thinning one full sweep separates kept states, hence the name.
        burn_in: sweeps discarded before recording; None means 10 N.
        thinning: site updates between kept states; None means N, i.e.
            one sweep.  N is the matrix dimension in both defaults.
        seed: optional 64-bit seed; when set it overrides the generator
            passed to the sampler so runs are reproducible from the
            parameter block alone.
    """

    sweeps: int = 1000
    burn_in: Optional[int] = None
    thinning: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if int(self.sweeps) < 1:
            raise ValueError("sweeps must be at least 1")
        if self.burn_in is not None and int(self.burn_in) < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.thinning is not None and int(self.thinning) < 1:
            raise ValueError("thinning must be at least 1")
        if self.seed is not None and not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class EnsembleSpec:
    """Which Gibbs ensemble to draw from.

    Attributes:
        kind: one of "al", "schur", "circular", "jacobi".
        n: matrix size for al/schur/circular; number of spectral pairs
           for jacobi (the coefficient vector then has length 2n).
        beta: inverse temperature, positive.  For circular this is the
           per-site rate beta_tilde, for jacobi the exponent scale.
        potential: optional Potential tilting the law by exp(-Tr V(E)).
    """

    kind: str
    n: int
    beta: float
    potential: Optional[Potential] = None

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.kind in ("al", "schur"):
            if self.n < 2 or self.n % 2:
                raise ValueError("al/schur need even size >= 2")
        elif self.kind == "circular":
            if self.n < 2:
                raise ValueError("circular needs size >= 2")
        elif self.n < 1:
            raise ValueError("jacobi needs at least one pair")

    @property
    def size(self):
        """Length of the coefficient vector."""
        return 2 * self.n if self.kind == "jacobi" else self.n


@dataclass
class SampleBatch:
    """Kept states of one sampling run.

    alphas has shape (samples, size); row i is stream index i of the
    generator identified by `seed`.  acceptance_rate is None for exact
    (potential-free) sampling.
    """

    alphas: np.ndarray
    kind: str
    beta: float
    boundary: cc.BoundaryMode
    acceptance_rate: Optional[float] = None
    seed: Optional[int] = None
    potential: Optional[Potential] = None

    @property
    def n_samples(self):
        return self.alphas.shape[0]

    @property
    def size(self):
        return self.alphas.shape[1]


_BOUNDARY = {
    "al": cc.BoundaryMode.ALL_INTERIOR,
    "schur": cc.BoundaryMode.ALL_INTERIOR,
    "circular": cc.BoundaryMode.LAST_ON_CIRCLE,
    "jacobi": cc.BoundaryMode.LAST_MINUS_ONE,
}


# --------------------------------------------------------------------------
# zero-potential draws


def _real_interior(rng, a, b, size=None):
    """Beta draw mapped to (-1, 1), kept strictly inside the interval.

    Tiny shape parameters pile mass onto the endpoints, where rounding can
    produce exactly +-1; the clip keeps downstream factorizations valid.
    """
    vals = 2.0 * rng.beta(a, b, size=size) - 1.0
    return np.clip(vals, -1.0 + 1e-15, 1.0 - 1e-15)


def _exact_rows(kind, size_n, beta_param, rng, rows):
    """Draw `rows` independent coefficient vectors from the V = 0 law."""
    if kind == "al":
        return sample_theta(ThetaParams(2.0 * beta_param + 1.0), rng,
                            size=(rows, size_n))
    if kind == "schur":
        return _real_interior(rng, beta_param, beta_param, size=(rows, size_n))
    if kind == "circular":
        out = np.empty((rows, size_n), complex)
        for j in range(size_n - 1):
            nu_j = beta_param * (size_n - 1 - j) + 1.0
            out[:, j] = sample_theta(ThetaParams(nu_j), rng, size=rows)
        out[:, -1] = np.exp(2j * np.pi * rng.uniform(size=rows))
        return out
    out = np.empty((rows, size_n))
    half = size_n // 2
    for j in range(1, size_n):
        s_j = beta_param * (1.0 - j / (2.0 * half))
        out[:, j - 1] = _real_interior(rng, s_j, s_j, size=rows)
    out[:, -1] = -1.0
    return out


def _site_proposal(kind, size_n, beta_param, j, rng):
    """Fresh draw of site j (0-based) from its V = 0 marginal."""
    if kind == "al":
        return sample_theta(ThetaParams(2.0 * beta_param + 1.0), rng)
    if kind == "schur":
        return _real_interior(rng, beta_param, beta_param)
    if kind == "circular":
        if j == size_n - 1:
            return np.exp(2j * np.pi * rng.uniform())
        return sample_theta(ThetaParams(beta_param * (size_n - 1 - j) + 1.0), rng)
    s_j = beta_param * (1.0 - (j + 1) / size_n)
    return _real_interior(rng, s_j, s_j)


def _batch_proposal(kind, beta_param, count, rng):
    """Site proposals for the colour path; al/schur marginals are uniform
    across sites so one call covers a whole colour class."""
    if kind == "al":
        return sample_theta(ThetaParams(2.0 * beta_param + 1.0), rng, size=count)
    return _real_interior(rng, beta_param, beta_param, size=count)


# --------------------------------------------------------------------------
# Metropolis machinery


def _weight_vector(potential):
    """Complex weights w_k with delta Tr V = Re(w . delta tr).

    Torus: Tr V = c_0 N + sum c_k Re tr_k + s_k Im tr_k.
    Interval: Tr V = t_0 N/2 + sum t_k Re tr_k / 2 (paired spectrum).
    Constants drop out of differences.
    """
    deg = potential.degree
    w = np.zeros(deg, complex)
    if potential.domain == "torus":
        for k in range(1, deg + 1):
            c_k = potential.cos[k] if k < potential.cos.size else 0.0
            s_k = potential.sin[k - 1] if k - 1 < potential.sin.size else 0.0
            w[k - 1] = c_k - 1j * s_k
    else:
        for k in range(1, deg + 1):
            w[k - 1] = 0.5 * potential.cheb[k]
    return w


def _trace_vector(alpha, periodic, deg):
    """Power traces tr_1 .. tr_deg of the CMV matrix built from alpha."""
    if deg == 0:
        return np.zeros(0, complex)
    if periodic and alpha.size >= 6:
        return cc.batch_trace_powers(alpha[None, :], deg)[0]
    m = cc.build_periodic_cmv(alpha) if periodic else cc.build_cmv(alpha)
    return np.array([cc.trace_power(m, k) for k in range(1, deg + 1)], complex)


def _color_spacing(n):
    """Spacing s dividing n with s >= 3, so same-colour sites do not share
    neighbours; None when no such divisor exists (n = 2)."""
    for s in (8, 4, 3, 5, 6, 7):
        if s <= n and n % s == 0:
            return s
    for s in range(9, n + 1):
        if n % s == 0:
            return s
    return None


def _run_color_chain(kind, size_n, beta_param, potential, wc, spacing,
                     burn, thin, n_keep, rng):
    """Vectorised sweeps for periodic matrices and degree <= 1 torus V.

    A degree-1 trace increment at site j only involves alpha_{j-1} and
    alpha_{j+1}, so sites of a common residue class mod `spacing` update
    independently and one numpy call handles the whole class.
    """
    alpha = _exact_rows(kind, size_n, beta_param, rng, 1)[0]
    w1 = wc[0] if wc.size else 0.0
    stride = max(1, -(-thin // size_n))
    kept = np.empty((n_keep, size_n), dtype=alpha.dtype)
    accepted = 0
    proposed = 0
    sweep = 0
    k_idx = 0
    offsets = [np.arange(off, size_n, spacing) for off in range(spacing)]
    while k_idx < n_keep:
        for sites in offsets:
            prop = _batch_proposal(kind, beta_param, sites.size, rng)
            d = prop - alpha[sites]
            dtr = -(alpha[(sites - 1) % size_n] * np.conj(d)
                    + d * np.conj(alpha[(sites + 1) % size_n]))
            dv = (w1 * dtr).real
            acc = np.log(rng.uniform(size=sites.size)) < -dv
            alpha[sites[acc]] = prop[acc]
            accepted += int(acc.sum())
            proposed += sites.size
        sweep += 1
        if sweep > burn and (sweep - burn) % stride == 0:
            kept[k_idx] = alpha
            k_idx += 1
    return kept, accepted / proposed


def _run_site_chain(kind, size_n, beta_param, potential, wc, mutable,
                    periodic, burn, thin, n_keep, rng):
    """Sequential single-site chain, exact for any potential degree.

    The trace increment is recomputed from the full state, which keeps
    the update exact for open topologies and short rings at the price of
    O(N) work per site; the colour path covers the large-N workloads.
    """
    deg = wc.size
    alpha = _exact_rows(kind, size_n, beta_param, rng, 1)[0]
    tr_cur = _trace_vector(alpha, periodic, deg)
    kept = np.empty((n_keep, size_n), dtype=alpha.dtype)
    burn_updates = burn * mutable
    accepted = 0
    updates = 0
    k_idx = 0
    while k_idx < n_keep:
        j = updates % mutable
        prop = _site_proposal(kind, size_n, beta_param, j, rng)
        old = alpha[j]
        alpha[j] = prop
        tr_new = _trace_vector(alpha, periodic, deg)
        dv = float(np.real(wc @ (tr_new - tr_cur)))
        if np.log(rng.uniform()) < -dv:
            tr_cur = tr_new
            accepted += 1
        else:
            alpha[j] = old
        updates += 1
        if updates > burn_updates and (updates - burn_updates) % thin == 0:
            kept[k_idx] = alpha
            k_idx += 1
    return kept, accepted / updates


def _sample(kind, size_n, beta_param, potential, mcmc, rng, force_path):
    if mcmc.seed is not None:
        rng = make_rng(mcmc.seed)
    elif rng is None:
        rng = make_rng(None)
    seed = getattr(rng, "seed_value", None)
    n_keep = int(mcmc.sweeps)

    if potential is None or potential.is_zero:
        if force_path is not None:
            raise ValueError("force_path applies to Metropolis runs only")
        alphas = _exact_rows(kind, size_n, beta_param, rng, n_keep)
        rate = None
    else:
        periodic = kind in ("al", "schur")
        if potential.domain == "interval" and size_n % 2:
            raise ValueError("interval potentials need an even matrix size")
        wc = _weight_vector(potential)
        burn = int(mcmc.burn_in) if mcmc.burn_in is not None else 10 * size_n
        thin = int(mcmc.thinning) if mcmc.thinning is not None else size_n
        mutable = size_n - 1 if kind == "jacobi" else size_n
        spacing = _color_spacing(size_n) if periodic else None
        use_color = (periodic and potential.domain == "torus"
                     and wc.size <= 1 and spacing is not None)
        if force_path == "site":
            use_color = False
        elif force_path == "color" and not use_color:
            raise ValueError("colour path needs a periodic matrix, degree <= 1 "
                             "torus potential, and a valid spacing")
        elif force_path not in (None, "color", "site"):
            raise ValueError(f"unknown path {force_path!r}")
        if use_color:
            alphas, rate = _run_color_chain(kind, size_n, beta_param, potential,
                                            wc, spacing, burn, thin, n_keep, rng)
        else:
            alphas, rate = _run_site_chain(kind, size_n, beta_param, potential,
                                           wc, mutable, periodic, burn, thin,
                                           n_keep, rng)
    return SampleBatch(alphas=alphas, kind=kind, beta=float(beta_param),
                       boundary=_BOUNDARY[kind], acceptance_rate=rate,
                       seed=seed, potential=potential)


# --------------------------------------------------------------------------
# public samplers


def sample_al_gge(spec, mcmc, rng=None, force_path=None):
    """Sample the Gibbs ensemble of the Ablowitz-Ladik chain.

    With zero potential each alpha_j is an exact i.i.d. Theta_(2 beta + 1)
    draw; otherwise the Metropolis chain targets the exp(-Tr V(E)) tilt.
    Returns a SampleBatch of `mcmc.sweeps` kept states.
    """
    if spec.kind != "al":
        raise ValueError(f"spec is for {spec.kind!r}, expected 'al'")
    return _sample("al", spec.n, spec.beta, spec.potential, mcmc, rng,
                   force_path)


def sample_schur_gge(spec, mcmc, rng=None, force_path=None):
    """Sample the Schur-flow ensemble; entries are real in (-1, 1) with
    (1 + alpha_j)/2 ~ Beta(beta, beta) when the potential vanishes."""
    if spec.kind != "schur":
        raise ValueError(f"spec is for {spec.kind!r}, expected 'schur'")
    return _sample("schur", spec.n, spec.beta, spec.potential, mcmc, rng,
                   force_path)


def sample_circular_beta(n, beta_tilde, potential, mcmc, rng=None,
                         force_path=None):
    """Sample the circular ensemble through its coefficient law.

    Site j (1-based) follows Theta_(beta_tilde (n - j) + 1) and the last
    entry is uniform on the unit circle, so the open CMV matrix carries
    the ensemble's eigen-angles.
    """
    if n < 2:
        raise ValueError("need at least two sites")
    if not beta_tilde > 0:
        raise ValueError("beta_tilde must be positive")
    return _sample("circular", int(n), float(beta_tilde), potential, mcmc,
                   rng, force_path)


def sample_jacobi_beta(n, beta, potential, mcmc, rng=None, force_path=None):
    """Sample the Jacobi-type ensemble on 2n coefficients.

    (1 + alpha_j)/2 ~ Beta(s_j, s_j) with s_j = beta (1 - j/(2n)) for
    j < 2n, and alpha_2n = -1 exactly; eigenvalues come in conjugate
    pairs cos(theta) on [-1, 1].
    """
    if n < 1:
        raise ValueError("need at least one pair")
    if not beta > 0:
        raise ValueError("beta must be positive")
    return _sample("jacobi", 2 * int(n), float(beta), potential, mcmc, rng,
                   force_path)
