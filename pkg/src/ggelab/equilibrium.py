"""Free-energy functionals on the torus and interval, their minimizers, and beta-derivatives.

Torus functional (angle densities rho on [-pi, pi)):

    f_beta^V(mu) = beta sum_{k>=1} |mu_k|^2 / k + beta log 2
                   + int V dmu + int log rho dmu + log 2pi.

The double-log kernel satisfies log|e^{i theta} - e^{i phi}| = log 2
- sum_{k>=1} cos(k(theta-phi))/k, so -beta IInt log|e^{i th}-e^{i ph}| equals
beta sum |mu_k|^2/k - beta log 2; the displayed beta log 2 restores the
normalization making the V = 0 minimal value exactly beta log 2.  Both log 2
contributions are carried explicitly in free_energy_torus.

Interval functional (probability densities on [-1, 1]):

    q_beta^V(mu) = int (V + ln(1+x) + ln(1-x)) dmu
                   - beta IInt ln|x-y| dmu dmu + int ln(dmu/dx) dmu.

Derivation note for the interaction coefficient: the ensemble density
prod_{i<j} |x_i - x_j|^{2 beta / n} gives interaction exponent
(2 beta/n) sum_{i<j} ln|x_i-x_j| = (beta/n) sum_{i != j} ~ n * beta IInt, so at
large-deviation speed n the rate functional carries -beta IInt and the first
variation yields the Euler-Lagrange fixed point

    rho_x(x) ∝ (1-x^2)^{-1} exp(-V(x) + 2 beta U[rho](x)),
    U[rho](x) = int ln|x-y| rho(y) dy,

i.e. a 4 beta L factor in angle form.  (A -2 beta IInt normalization would
instead produce the minimizer family at doubled beta; the V = 0 minimizers of
the normalization used here reproduce the independently computed density of
states of the corresponding Gibbs chains across beta.)

Interval minimizers develop boundary layers at x = +-1: writing
t = ln tan(theta/2), x = -tanh t, the transported density P(t) =
sigma(theta) sin(theta) is smooth and slowly varying with universal power
tails P(t) ~ 2 beta / (2 beta |t| + c)^2.  The solver therefore works on a
uniform t-grid truncated at +-T and carries the two tails analytically: the
layer tail-mass function G(t) obeys G' = -2 beta G^2, so the mass beyond an
end node with density P_end is exactly G = sqrt(P_end / (2 beta)) under the
matched profile.  Interval densities are stored in these coordinates together
with their two analytic edge masses.
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .cmv_core import NumericalError
from .potentials import Potential
from .spectral_measures import FourierCoeffs

__all__ = [
    "ConvergenceError",
    "EndpointSingularityError",
    "SolverParams",
    "FreeEnergyBreakdown",
    "GridDensity",
    "free_energy_torus",
    "minimize_torus",
    "free_energy_interval",
    "minimize_interval",
    "beta_derivative_measure",
]


class ConvergenceError(NumericalError):
    """Fixed-point iteration failed to reach tolerance; carries the last residual."""


class EndpointSingularityError(NumericalError):
    """Interval iterate too singular at an endpoint for the tail model.

    The ``exponent`` attribute reports the measured local exponent
    d ln sigma / d ln theta of the angle density at the offending edge.
    """

    def __init__(self, message, exponent=None):
        super().__init__(message)
        self.exponent = exponent


@dataclass(frozen=True)
class SolverParams:
    """Damped fixed-point controls shared by both minimizers."""

    damping: float = 0.5
    tolerance: float = 1e-10
    max_iterations: int = 20000
    grid_size: int = 1024

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.grid_size < 16:
            raise ValueError(f"grid_size must be >= 16, got {self.grid_size}")


@dataclass(frozen=True)
class FreeEnergyBreakdown:
    """Additive pieces of a free-energy value; total is always their sum."""

    interaction: float
    potential: float
    entropy: float
    total: float

    @classmethod
    def assemble(cls, interaction, potential, entropy):
        return cls(float(interaction), float(potential), float(entropy),
                   float(interaction) + float(potential) + float(entropy))


def _potential_callable(v, domain):
    if v is None:
        return lambda arr: np.zeros_like(arr)
    if isinstance(v, Potential):
        if v.domain != domain:
            raise ValueError(f"potential domain {v.domain!r} does not match {domain!r}")
        return v
    if callable(v):
        return v
    raise TypeError(f"potential must be None, Potential, or callable, got {type(v).__name__}")


def _log_cosh(t):
    a = np.abs(t)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


class GridDensity:
    """Probability density sampled on a fixed grid.

    Torus: values rho(theta_i) on the equispaced midpoint grid of [-pi, pi).
    Interval: values P(t_i) = sigma(theta) sin(theta) on a uniform grid in
    t = ln tan(theta/2) in [-T, T], plus the two analytic edge masses
    (near x = +1 and x = -1).  ``signed`` marks finite-difference outputs,
    which may carry small negative values.
    """

    def __init__(self, domain, nodes, values, weights, edge_masses=(0.0, 0.0),
                 residual=None, iterations=None, beta=None, potential=None,
                 signed=False):
        if domain not in ("torus", "interval"):
            raise ValueError(f"unknown domain {domain!r}")
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if nodes.shape != values.shape or nodes.shape != weights.shape:
            raise ValueError("nodes, values, weights must share a shape")
        if not np.all(np.isfinite(values)):
            raise ValueError("density values must be finite")
        if not signed:
            if np.any(values < -1e-12):
                raise ValueError(f"negative density value {values.min()}")
            values = np.clip(values, 0.0, None)
        self.domain = domain
        self.nodes = nodes
        self.values = values
        self.weights = weights
        self.edge_masses = (float(edge_masses[0]), float(edge_masses[1]))
        self.residual = residual
        self.iterations = iterations
        self.beta = beta
        self.potential = potential
        self.signed = signed
        self._fcache = {}
        m = self.mass()
        assert abs(m - 1.0) < 1e-10, f"density mass {m} is not 1"

    # -- constructors ----------------------------------------------------

    @classmethod
    def torus(cls, values, **meta):
        values = np.asarray(values, dtype=float)
        m = values.size
        h = 2 * np.pi / m
        theta = -np.pi + (np.arange(m) + 0.5) * h
        return cls("torus", theta, values, np.full(m, h), **meta)

    @classmethod
    def uniform_torus(cls, grid_size=1024):
        return cls.torus(np.full(grid_size, 1.0 / (2 * np.pi)))

    @classmethod
    def interval(cls, t_nodes, p_values, edge_masses, **meta):
        t_nodes = np.asarray(t_nodes, dtype=float)
        m = t_nodes.size
        h = t_nodes[1] - t_nodes[0]
        w = np.full(m, h)
        w[0] = w[-1] = h / 2
        return cls("interval", t_nodes, p_values, w, edge_masses=edge_masses, **meta)

    @classmethod
    def interval_arcsine(cls, grid_size=1024):
        """The arcsine law 1/(pi sqrt(1-x^2)): P(t) = sech(t)/pi, no edge mass."""
        t, _, _ = _interval_grid(grid_size)
        p = 1.0 / (np.pi * np.cosh(t))
        p /= _interval_mass(t, p, (0.0, 0.0))
        return cls.interval(t, p, (0.0, 0.0))

    # -- geometry --------------------------------------------------------

    @property
    def grid_size(self):
        return self.nodes.size

    @property
    def theta(self):
        if self.domain == "torus":
            return self.nodes
        return 2.0 * np.arctan(np.exp(self.nodes))

    @property
    def x(self):
        if self.domain != "interval":
            raise AttributeError("x is defined for interval densities only")
        return -np.tanh(self.nodes)

    def density_x(self):
        """Density with respect to dx: rho_x(x_i) = P_i cosh^2(t_i)."""
        if self.domain != "interval":
            raise AttributeError("density_x is defined for interval densities only")
        return self.values * np.cosh(self.nodes) ** 2

    # -- measure interface ----------------------------------------------

    def mass(self):
        return float(self.weights @ self.values) + self.edge_masses[0] + self.edge_masses[1]

    def integrate(self, f):
        """Quadrature of f against the density (f takes theta on the torus, x on the interval)."""
        if self.domain == "torus":
            return float(self.weights @ (self.values * f(self.nodes)))
        gm, gp = self.edge_masses
        body = float(self.weights @ (self.values * f(self.x)))
        return body + gm * float(f(1.0)) + gp * float(f(-1.0))

    def x_moment(self, p):
        if self.domain != "interval":
            raise AttributeError("x_moment is defined for interval densities only")
        gm, gp = self.edge_masses
        return float(self.weights @ (self.values * self.x ** p)) + gm + gp * (-1.0) ** p

    def fourier(self, k_max):
        """FourierCoeffs of the measure; interval densities use the symmetrized lift."""
        if k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {k_max}")
        if k_max not in self._fcache:
            k = np.arange(1, k_max + 1)
            if self.domain == "torus":
                c = np.exp(1j * k[:, None] * self.nodes[None, :]) @ (self.weights * self.values)
            else:
                gm, gp = self.edge_masses
                th = self.theta
                c = np.cos(k[:, None] * th[None, :]) @ (self.weights * self.values)
                c = c + gm + gp * np.cos(k * np.pi)
                c = c.astype(complex)
            tol = 1e-3 if self.signed else 1e-9
            worst = float(np.max(np.abs(c)))
            assert worst <= 1.0 + tol, f"|mu_k| = {worst} exceeds 1"
            self._fcache[k_max] = FourierCoeffs(np.clip(np.abs(c), None, 1.0) * np.exp(1j * np.angle(c)))
        return self._fcache[k_max]

    # -- exports ---------------------------------------------------------

    def to_csv(self, path):
        vals = np.clip(self.values, 0.0, None) if self.signed else self.values
        with open(path, "w", newline="") as fh:
            if self.domain == "torus":
                fh.write("theta,rho\n")
                for th, r in zip(self.nodes, vals):
                    fh.write(f"{float(th)!r},{float(r)!r}\n")
            else:
                # rows cover the resolvable interior; past |x| = 1 - 1e-12 the
                # x-coordinate degenerates in floats and the layer lives in the
                # edge masses of the sidecar instead
                rho_x = vals * np.cosh(self.nodes) ** 2
                xs = self.x
                keep = np.abs(xs) < 1.0 - 1e-12
                fh.write("x,rho\n")
                for xv, r in zip(xs[keep][::-1], rho_x[keep][::-1]):
                    fh.write(f"{float(xv)!r},{float(r)!r}\n")

    def sidecar_json(self):
        pot = self.potential.to_dict() if isinstance(self.potential, Potential) else None
        grid = {"domain": self.domain, "size": int(self.grid_size)}
        if self.domain == "interval":
            grid["t_span"] = float(self.nodes[-1])
            grid["edge_masses"] = list(self.edge_masses)
        return json.dumps({
            "beta": self.beta,
            "potential": pot,
            "grid": grid,
            "residual": self.residual,
            "iterations": self.iterations,
        })


# -- torus solver --------------------------------------------------------


def _torus_L(values, h, phase, kk):
    """Log-potential field L[rho](theta_i) = -sum_k Re(mu_k e^{-ik theta})/k via FFT."""
    m = values.size
    muh = h * phase * (np.fft.ifft(values) * m)
    c = np.zeros(m, complex)
    c[1:kk.size + 1] = (muh[1:kk.size + 1] / kk) * np.conj(phase[1:kk.size + 1])
    return -np.real(np.fft.fft(c))


def minimize_torus(v, beta, params=None, init_values=None):
    """Minimize f_beta^V by damped log-space fixed-point iteration.

    The Euler-Lagrange condition is rho ∝ exp(-V + 2 beta L[rho]) with
    L[rho](theta) = -sum_k Re(mu_k e^{-ik theta})/k computed by FFT.  Updates
    are damped per Fourier mode, gamma_k = gamma / (1 + 2 beta / k), which
    keeps the iteration contractive for all beta (a mode-independent damping
    corresponds to the update rho ρ_{n+1} = normalize(rho_n^{1-gamma} target^gamma)
    and destabilizes low modes once 2 beta > 1).  Returns the density with
    Euler-Lagrange residual and iteration count attached.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    params = params or SolverParams()
    m = params.grid_size
    h = 2 * np.pi / m
    theta = -np.pi + (np.arange(m) + 0.5) * h
    vfun = _potential_callable(v, "torus")
    vv = np.asarray(vfun(theta), dtype=float)
    if vv.shape == ():
        vv = np.full(m, float(vv))
    k = np.arange(m)
    kfold = np.abs(((k + m // 2) % m) - m // 2).astype(float)
    damp = params.damping / (1.0 + 2.0 * beta / np.maximum(kfold, 1.0))
    phase = np.exp(1j * k * (-np.pi + h / 2))
    kk = np.arange(1, m // 2)
    if init_values is not None:
        lnr = np.log(np.maximum(np.asarray(init_values, dtype=float), 1e-300))
        lnr -= np.log(np.sum(np.exp(lnr)) * h)
    else:
        lnr = np.full(m, -np.log(2 * np.pi))
    delta = np.inf
    for it in range(params.max_iterations):
        rho = np.exp(lnr)
        target = -vv + 2 * beta * _torus_L(rho, h, phase, kk)
        diff = target - lnr
        diff -= diff.mean()
        step = np.real(np.fft.fft(np.fft.ifft(diff) * damp))
        lnr = lnr + step
        lnr -= np.log(np.sum(np.exp(lnr)) * h)
        delta = float(np.max(np.abs(step)))
        if delta < params.tolerance:
            break
    else:
        raise ConvergenceError(
            f"torus minimizer: no convergence in {params.max_iterations} iterations "
            f"(last update {delta:.3e})", residual=delta)
    rho = np.exp(lnr)
    res = lnr + vv - 2 * beta * _torus_L(rho, h, phase, kk)
    residual = float(np.max(np.abs(res - res.mean())))
    pot_meta = v if isinstance(v, Potential) else None
    return GridDensity.torus(rho, residual=residual, iterations=it + 1, beta=beta,
                             potential=pot_meta)


def free_energy_torus(rho, v, beta):
    """Evaluate f_beta^V(mu) for a torus grid density.

    interaction = beta sum_{k>=1} |mu_k|^2/k + beta log 2 (the kernel identity
    -beta IInt log|e^{i th} - e^{i ph}| = beta sum |mu_k|^2/k - beta log 2 plus
    the displayed +beta log 2 of the functional; the two log 2 terms are what
    make the V = 0 minimal value equal beta log 2).  entropy uses 0 log 0 = 0.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if rho.domain != "torus":
        raise ValueError("free_energy_torus expects a torus density")
    if np.any(rho.values < 0):
        raise ValueError("negative density")
    vfun = _potential_callable(v, "torus")
    kmax = rho.grid_size // 2 - 1
    c = rho.fourier(kmax).c
    k = np.arange(1, kmax + 1)
    interaction = beta * float(np.sum(np.abs(c) ** 2 / k)) + beta * np.log(2.0)
    potential = rho.integrate(vfun)
    vals = rho.values
    logs = np.where(vals > 0, np.log(np.maximum(vals, 1e-300)), 0.0)
    entropy = float(rho.weights @ (vals * logs)) + np.log(2 * np.pi)
    return FreeEnergyBreakdown.assemble(interaction, potential, entropy)


# -- interval solver -----------------------------------------------------


_INTERVAL_CACHE = {}


def _interval_grid(m):
    """Uniform t-grid with endpoint nodes at +-T, T = max(36, 0.04 m)."""
    t_span = max(36.0, 0.04 * m)
    t = np.linspace(-t_span, t_span, m)
    return t, t_span, t[1] - t[0]


def _hat_log_weights(m, h):
    """Product-integration of ln|t_i - s| against hat functions on the uniform grid."""
    def stack(d):
        with np.errstate(divide="ignore", invalid="ignore"):
            f0 = np.where(d == 0, 0.0, d * (np.log(np.abs(np.where(d == 0, 1.0, d))) - 1.0))
            f1 = np.where(d == 0, 0.0, 0.5 * d * d * np.log(np.abs(np.where(d == 0, 1.0, d))) - 0.25 * d * d)
        return f0, f1

    d = np.arange(-(m - 1), m) * h
    f0m, f1m = stack(d - h)
    f00, f10 = stack(d)
    f0p, f1p = stack(d + h)
    # left half of the hat: support [t_j, t_j + h], integrand (1 - v/h) ln|d - v|
    lh = (1 - d / h) * (f00 - f0m) + (f10 - f1m) / h
    # right half: support [t_j - h, t_j], integrand (1 + v/h) ln|d - v|
    rh = (1 + d / h) * (f0p - f00) - (f1p - f10) / h
    return lh + rh, lh, rh


def _interval_operator(m):
    """Cached quadrature data for the interval problem at grid size m."""
    if m in _INTERVAL_CACHE:
        return _INTERVAL_CACHE[m]
    t, t_span, h = _interval_grid(m)
    lc = _log_cosh(t)
    full, lh, rh = _hat_log_weights(m, h)
    pos = np.rint((t[:, None] - t[None, :]) / h).astype(int) + m - 1
    q_log = full[pos]
    q_log[:, 0] = lh[pos[:, 0]]
    q_log[:, -1] = rh[pos[:, -1]]
    dd = 0.5 * (t[:, None] - t[None, :])
    add = np.abs(dd)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = add + np.log1p(-np.exp(-2.0 * add)) - np.log(4.0 * add)
    np.fill_diagonal(ratio, -np.log(2.0))
    half_lc = 0.5 * (lc[:, None] + lc[None, :])
    r_smooth = np.log(2.0) + ratio - half_lc
    b_kernel = np.log(2.0) + _log_cosh(dd) - half_lc
    w = np.full(m, h)
    w[0] = w[-1] = h / 2
    q = q_log + (r_smooth + b_kernel) * w[None, :]
    k0 = 0.5 * np.log(2.0) + 0.5 * t - 0.5 * lc
    kpi = 0.5 * np.log(2.0) - 0.5 * t - 0.5 * lc
    theta = 2.0 * np.arctan(np.exp(t))
    data = dict(t=t, t_span=t_span, h=h, w=w, q=q, k0=k0, kpi=kpi, theta=theta)
    _INTERVAL_CACHE[m] = data
    return data


def _interval_mass(t, p, charges):
    h = t[1] - t[0]
    w = np.full(t.size, h)
    w[0] = w[-1] = h / 2
    return float(w @ p) + charges[0] + charges[1]


def _charges(p, beta):
    return np.sqrt(max(p[0], 0.0) / (2 * beta)), np.sqrt(max(p[-1], 0.0) / (2 * beta))


def _interval_normalize(ln_p, w, beta):
    """Scale exp(ln_p) so grid mass plus both sqrt-scaling edge masses is 1."""
    p = np.exp(ln_p)
    body = float(w @ p)
    tail = np.sqrt(p[0] / (2 * beta)) + np.sqrt(p[-1] / (2 * beta))
    s = 1.0 / (body + tail)
    for _ in range(80):
        f = s * body + np.sqrt(s) * tail - 1.0
        if abs(f) < 1e-15:
            break
        s -= f / (body + 0.5 * tail / np.sqrt(s))
    return ln_p + np.log(s)


def _edge_exponent(ln_p, h, end):
    """Local exponent d ln sigma / d ln theta at an edge of the t-grid."""
    if end == 0:
        slope = (ln_p[1] - ln_p[0]) / h
        return slope - 1.0
    slope = (ln_p[-1] - ln_p[-2]) / h
    return -slope - 1.0


def minimize_interval(v, beta, params=None, init_values=None):
    """Minimize q_beta^V via the Euler-Lagrange fixed point in t-coordinates.

    The iterate is ln P = -V(x(t)) + 2 beta W[P] + const with
    W(theta) = int (ln|2 sin((theta-phi)/2)| + ln|2 sin((theta+phi)/2)|) sigma(phi) dphi
    (U[rho](x) = -ln 2 + W(theta)), evaluated by hat-function product
    integration of the log kernel on the t-grid plus the point fields of the
    two analytic edge masses.  Same damping and termination contract as
    minimize_torus.  Raises EndpointSingularityError when an edge mass grows
    beyond what the tail model resolves (beta too small).
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    params = params or SolverParams()
    op = _interval_operator(params.grid_size)
    t, h, w, q = op["t"], op["h"], op["w"], op["q"]
    x = -np.tanh(t)
    vfun = _potential_callable(v, "interval")
    vv = np.asarray(vfun(x), dtype=float)
    if vv.shape == ():
        vv = np.full(t.size, float(vv))
    if init_values is not None:
        ln_p = np.log(np.maximum(np.asarray(init_values, dtype=float), 1e-300))
    else:
        ln_p = -np.log(np.pi * np.cosh(t))
    ln_p = _interval_normalize(ln_p, w, beta)
    freq = np.fft.rfftfreq(t.size, d=h) * 2 * np.pi
    damp = params.damping / (1.0 + np.pi * beta / np.maximum(freq, freq[1]))
    delta = np.inf
    for it in range(params.max_iterations):
        p = np.exp(ln_p)
        gm, gp = _charges(p, beta)
        if max(gm, gp) > 0.25:
            end = 0 if gm >= gp else 1
            expo = _edge_exponent(ln_p, h, end)
            raise EndpointSingularityError(
                f"edge mass {max(gm, gp):.3f} exceeds the resolvable tail "
                f"(beta = {beta} too small); local angle-density exponent {expo:.3f}",
                exponent=expo)
        field = q @ p + 2 * gm * op["k0"] + 2 * gp * op["kpi"]
        target = -vv + 2 * beta * field
        diff = target - ln_p
        diff -= diff.mean()
        step = np.fft.irfft(np.fft.rfft(diff) * damp, t.size)
        ln_p = _interval_normalize(ln_p + step, w, beta)
        delta = float(np.max(np.abs(step)))
        if delta < params.tolerance:
            break
    else:
        raise ConvergenceError(
            f"interval minimizer: no convergence in {params.max_iterations} iterations "
            f"(last update {delta:.3e})", residual=delta)
    p = np.exp(ln_p)
    gm, gp = _charges(p, beta)
    field = q @ p + 2 * gm * op["k0"] + 2 * gp * op["kpi"]
    res = ln_p + vv - 2 * beta * field
    residual = float(np.max(np.abs(res - res.mean())))
    pot_meta = v if isinstance(v, Potential) else None
    return GridDensity.interval(t, p, (gm, gp), residual=residual, iterations=it + 1,
                                beta=beta, potential=pot_meta)


def free_energy_interval(rho, v, beta):
    """Evaluate q_beta^V(mu) for an interval grid density.

    potential = int V dmu; interaction = -beta IInt ln|x-y| dmu dmu;
    entropy = int (ln rho_x + ln(1-x^2)) dmu, i.e. the confining logs folded
    into the relative entropy with reference dx/(1-x^2), which keeps the
    term finite on minimizers (the separate pieces diverge at the edges).
    In t-coordinates that combination is just int P ln P dt.  Edge masses
    enter through the matched tail profile: mass G per edge with analytic
    entropy G (ln 2 beta - 2 ln Y - 2), Y = 1/G, and pair self-energy
    G^2 ln 2 - (2/beta)(1/Y - (Y - 2 beta T)/(2 Y^2)).
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if rho.domain != "interval":
        raise ValueError("free_energy_interval expects an interval density")
    if np.any(rho.values < 0):
        raise ValueError("negative density")
    op = _interval_operator(rho.grid_size)
    if abs(op["h"] - (rho.nodes[1] - rho.nodes[0])) > 1e-12:
        raise ValueError("density grid does not match the interval operator grid")
    t, w, q = op["t"], op["w"], op["q"]
    p = rho.values
    gm, gp = rho.edge_masses
    vfun = _potential_callable(v, "interval")
    x = -np.tanh(t)
    vv = np.asarray(vfun(x), dtype=float)
    if vv.shape == ():
        vv = np.full(t.size, float(vv))
    potential = float(w @ (p * vv)) + gm * float(vfun(np.array(1.0))) + gp * float(vfun(np.array(-1.0)))
    # IInt ln|x-y| mu mu = grid x grid + 2 grid x charges + charge terms
    wfield = q @ p
    s_gg = float(w @ (p * (-np.log(2.0) + wfield)))
    s_gc = float(w @ (p * (gm * (-np.log(2.0) + 2 * op["k0"]) + gp * (-np.log(2.0) + 2 * op["kpi"]))))
    s_cc = 2 * gm * gp * np.log(2.0) + _tail_self_energy(gm, beta, op["t_span"]) \
        + _tail_self_energy(gp, beta, op["t_span"])
    interaction = -beta * (s_gg + 2 * s_gc + s_cc)
    logs = np.where(p > 0, np.log(np.maximum(p, 1e-300)), 0.0)
    entropy = float(w @ (p * logs)) + _tail_entropy(gm, beta) + _tail_entropy(gp, beta)
    return FreeEnergyBreakdown.assemble(interaction, potential, entropy)


def _tail_self_energy(g, beta, t_span):
    if g <= 0:
        return 0.0
    y = 1.0 / g
    return g * g * np.log(2.0) - (2.0 / beta) * (1.0 / y - (y - 2 * beta * t_span) / (2 * y * y))


def _tail_entropy(g, beta):
    if g <= 0:
        return 0.0
    y = 1.0 / g
    return g * (np.log(2 * beta) - 2 * np.log(y) - 2.0)


# -- beta derivative -----------------------------------------------------


def _fd_combine(plus, minus, beta, delta):
    """Central difference [(b+d) mu_{b+d} - (b-d) mu_{b-d}] / (2d) on a shared grid."""
    vals = ((beta + delta) * plus.values - (beta - delta) * minus.values) / (2 * delta)
    gm = ((beta + delta) * plus.edge_masses[0] - (beta - delta) * minus.edge_masses[0]) / (2 * delta)
    gp = ((beta + delta) * plus.edge_masses[1] - (beta - delta) * minus.edge_masses[1]) / (2 * delta)
    worst = float(vals.min()) if vals.size else 0.0
    if worst < -1e-6:
        warnings.warn(f"beta-derivative density dips to {worst:.3e}; clipping applies only on export")
    if plus.domain == "torus":
        out = GridDensity("torus", plus.nodes, vals, plus.weights, signed=True,
                          beta=plus.beta, potential=plus.potential)
    else:
        out = GridDensity("interval", plus.nodes, vals, plus.weights, edge_masses=(gm, gp),
                          signed=True, beta=plus.beta, potential=plus.potential)
    if plus.residual is not None and minus.residual is not None:
        out.residual = max(plus.residual, minus.residual)
    return out


def beta_derivative_measure(v, beta, delta=None, params=None, domain=None):
    """nu = d/dbeta (beta mu_beta^V) by central finite difference.

    Solves at beta +- delta on the shared grid and combines pointwise; the
    result has mass exactly 1 because d/dbeta (beta * 1) = 1.  delta defaults
    to 0.05 beta.  The domain comes from the potential when present, else the
    ``domain`` argument ("torus" by default).
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if delta is None:
        delta = 0.05 * beta
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if delta >= beta:
        raise ValueError(f"delta = {delta} must be smaller than beta = {beta}")
    if isinstance(v, Potential):
        dom = v.domain
    else:
        dom = domain or "torus"
    solver = minimize_torus if dom == "torus" else minimize_interval
    plus = solver(v, beta + delta, params)
    minus = solver(v, beta - delta, params)
    out = _fd_combine(plus, minus, beta, delta)
    out.beta = beta
    return out
