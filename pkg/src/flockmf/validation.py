"""Oracle and invariant checks behind ``flockmf validate`` and the acceptance suite.

Each check returns a :class:`CheckResult`. Oracles here are coded
independently of the library paths they check (plain ``math`` loops,
mpmath quadrature, tensor Gauss-Legendre grids).
"""
from dataclasses import dataclass, field
import math
import time

import mpmath
import numpy as np
from scipy.integrate import quad

from .coupling import coupled_paths, coupled_run, sweep, worst_particle_curves, xi_schedule
from .diagnostics import (entropy_functional, flocking_order, moments, ou_oracle_check)
from .initial import InitialLaw, sample_initial
from .kernels import mollifier, verify_kernel_bounds
from .mckean_vlasov import field_alignment, field_interaction, mollified_density
from .noise import NoisePlan
from .particles import Params, PhaseEnsemble, Xi, alignment_field, drift, interaction_forces, simulate


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.elapsed:.2f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.elapsed = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# -- independent oracles ---------------------------------------------------

def oracle_bump_mass(d):
    """Integral of exp(-1/(1-|x|^2)) over the unit ball, by mpmath."""
    mpmath.mp.dps = 30
    f = lambda r: r ** (d - 1) * mpmath.exp(-1 / (1 - r * r))
    sphere = 2 * mpmath.pi ** (mpmath.mpf(d) / 2) / mpmath.gamma(mpmath.mpf(d) / 2)
    if d == 1:
        sphere = 2
    return float(sphere * mpmath.quad(f, [0, 0.5, 0.9, 1]))


def oracle_fields(x, pos, vel, eps, delta, nu):
    """Brute-force (density, alignment, force) at point ``x`` against samples."""
    d = len(x)
    cd = math.gamma(d / 2 + 1) / ((d - 2) * math.pi ** (d / 2))
    z = oracle_bump_mass(d)
    m = len(pos)
    dens = 0.0
    num = [0.0] * d
    force = [0.0] * d
    for j in range(m):
        diff = [x[k] - pos[j][k] for k in range(d)]
        r2 = sum(c * c for c in diff)
        for k in range(d):
            force[k] += -(d - 2) * cd * diff[k] * (eps + r2) ** (-d / 2)
        if r2 < eps * eps:
            phi = math.exp(-1.0 / (1.0 - r2 / (eps * eps))) / (z * eps ** d)
            s = delta * math.sqrt(sum(c * c for c in vel[j]))
            if s <= 1:
                cut = 1.0
            elif s >= 2:
                cut = 0.0
            else:
                t = s - 1
                cut = 1 - (6 * t ** 5 - 15 * t ** 4 + 10 * t ** 3)
            dens += phi
            for k in range(d):
                num[k] += vel[j][k] * cut * phi
    dens /= m
    align = [c / m / (dens + nu) for c in num]
    return dens, np.array(align), np.array(force) / m


# -- checks ------------------------------------------------------------------

@_timed
def check_kernel_bounds(d=3, eps_values=(0.1, 0.5, 1.0), grid=4096):
    """Grid max of |grad W_eps| vs closed form, and its eps^(-(d-1)/2) scaling."""
    reps = [verify_kernel_bounds(e, d, grid) for e in eps_values]
    worst = max(r.relative_error for r in reps)
    scaled = [r.numeric_max * r.eps ** ((d - 1) / 2) for r in reps]
    spread = max(scaled) / min(scaled) - 1.0
    unit = verify_kernel_bounds(1.0, d, grid).analytic_max
    under_bound = all(r.numeric_max <= unit * r.eps ** (-d / 2) * (1 + 1e-12) for r in reps)
    ok = worst <= 0.01 and spread <= 0.02 and under_bound
    return CheckResult("kernel bounds", ok,
                       f"max rel err {worst:.2e} (<=1e-2), scaling spread {spread:.2e} (<=2e-2), "
                       f"eps^(-d/2) bound held={under_bound}",
                       data={"relative_errors": [r.relative_error for r in reps],
                             "spread": spread})


@_timed
def check_mollifier_mass(eps=0.7, n_random=10 ** 6, seed=0):
    """Unit mass in d=1 (adaptive quad) and d=3 (160^3 Gauss-Legendre grid); support."""
    m1, _ = quad(lambda s: mollifier(np.array([s]), eps), -eps, eps, epsabs=1e-13, limit=200)
    x, w = np.polynomial.legendre.leggauss(160)
    g = x * eps
    pts = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1)
    wts = (w[:, None, None] * w[None, :, None] * w[None, None, :]) * eps ** 3
    m3 = float(np.sum(mollifier(pts, eps) * wts))
    rng = np.random.default_rng(seed)
    violations = 0
    for d in (1, 3):
        p = rng.uniform(-2 * eps, 2 * eps, size=(n_random // 2, d))
        outside = np.linalg.norm(p, axis=1) >= eps
        vals = mollifier(p, eps)
        violations += int(np.count_nonzero(vals[outside] != 0.0))
        violations += int(np.count_nonzero(vals < 0))
    ok = abs(m1 - 1) <= 1e-4 and abs(m3 - 1) <= 1e-4 and violations == 0
    return CheckResult("mollifier normalization", ok,
                       f"mass d=1 {m1:.10f}, d=3 {m3:.10f} (1 +- 1e-4), support violations "
                       f"{violations}", data={"m1": m1, "m3": m3, "violations": violations})


@_timed
def check_free_transport(n=100, T=1.0, dt=1e-2, seed=0):
    p = Params(gamma=0.0, lam=0.0, beta=0.0, sigma=0.0, xi=Xi(0.5, 0.5, 1.0), d=3)
    init = sample_initial(InitialLaw(), n, 3, seed)
    traj = simulate(init, p, T, dt, NoisePlan(seed, 3, dt))
    exact = init.positions + T * init.velocities
    rel = float(np.max(np.abs(traj.positions[-1] - exact)) / np.max(np.abs(exact)))
    vel_same = bool(np.array_equal(traj.velocities[-1], init.velocities))
    ok = rel <= 1e-12 and vel_same
    return CheckResult("free transport", ok, f"max relative deviation {rel:.2e} (<=1e-12)",
                       data={"relative": rel})


@_timed
def check_ou(seeds=20, n=10 ** 4, T=1.0, dt=1e-3, min_fraction=0.95):
    p = Params(gamma=1.0, lam=0.0, beta=0.0, sigma=1.0, xi=Xi(0.5, 0.5, 1.0), d=3)
    reports = [ou_oracle_check(p, T, dt, n, s) for s in range(seeds)]
    passed = sum(r.passed for r in reports)
    ok = passed >= math.ceil(min_fraction * seeds)
    zs = [r.z for r in reports]
    return CheckResult("OU oracle", ok,
                       f"{passed}/{seeds} seeds within 3 SE of {reports[0].target:.5f}; "
                       f"max |z| {max(map(abs, zs)):.2f}", data={"z": zs})


def _random_config(rng, n_max=512):
    n = int(rng.integers(2, n_max + 1))
    scale = rng.uniform(0.2, 2.0)
    ens = PhaseEnsemble(scale * rng.standard_normal((n, 3)),
                        rng.uniform(0.3, 3.0) * rng.standard_normal((n, 3)))
    xi = Xi(rng.uniform(0.3, 2.0), rng.uniform(0.2, 2.0), 10 ** rng.uniform(-3, 0))
    return ens, xi


@_timed
def check_structural(configs=100, seed=0, n_max=512, m_oracle=16):
    """Force cancellation, alignment bound, permutation equivariance, field oracles."""
    rng = np.random.default_rng(seed)
    worst_cancel = 0.0
    bound_violations = 0
    perm_failures = 0
    worst_oracle = 0.0
    for _ in range(configs):
        ens, xi = _random_config(rng, n_max)
        p = Params(gamma=rng.uniform(0, 2), lam=rng.uniform(0, 2), beta=rng.uniform(0, 2),
                   sigma=1.0, xi=xi, d=3)
        total = (ens.n * interaction_forces(ens, xi.eps)).sum(axis=0)
        worst_cancel = max(worst_cancel, float(np.max(np.abs(total))))
        u = alignment_field(ens, xi)
        bound_violations += int(np.count_nonzero(np.linalg.norm(u, axis=1) > 2 / xi.delta))
        perm = rng.permutation(ens.n)
        dx, dv = drift(ens, p)
        px, pv = drift(ens.permuted(perm), p)
        if not (np.array_equal(px, dx[perm]) and np.array_equal(pv, dv[perm])):
            perm_failures += 1
        m = int(rng.integers(1, m_oracle + 1))
        sub = ens.subset(min(m, ens.n))
        q = sub.positions[0] + 0.3 * xi.eps * rng.standard_normal(3)
        dens, align, force = oracle_fields(q, sub.positions.tolist(), sub.velocities.tolist(),
                                           xi.eps, xi.delta, xi.nu)
        errs = [abs(mollified_density(q, sub, xi.eps) - dens) / max(1.0, abs(dens)),
                np.max(np.abs(field_alignment(q, sub, xi) - align)) / max(1.0, np.max(np.abs(align))),
                np.max(np.abs(field_interaction(q, sub, xi.eps) - force))
                / max(1.0, np.max(np.abs(force)))]
        worst_oracle = max(worst_oracle, float(max(errs)))
    metric_failures = _metric_permutation_failures(rng, trials=configs)
    ok = (worst_cancel <= 1e-10 and bound_violations == 0 and perm_failures == 0
          and metric_failures == 0 and worst_oracle <= 1e-12)
    return CheckResult(
        "structural invariants", ok,
        f"cancellation {worst_cancel:.1e} (<=1e-10), |u|>2/delta violations {bound_violations}, "
        f"drift permutation failures {perm_failures}, error-metric permutation failures "
        f"{metric_failures}, oracle error {worst_oracle:.1e} (<=1e-12)",
        data={"cancel": worst_cancel, "oracle": worst_oracle})


def _metric_permutation_failures(rng, trials):
    p = Params(xi=Xi(0.5, 0.5, 0.1))
    paths = coupled_paths(24, 96, p, 0.1, 1e-2, seed=int(rng.integers(1 << 31)))
    base = worst_particle_curves(paths)
    fails = 0
    for _ in range(trials):
        perm = rng.permutation(24)
        for traj in (paths.particles, paths.reference):
            traj.positions = traj.positions[:, perm]
            traj.velocities = traj.velocities[:, perm]
        got = worst_particle_curves(paths)
        fails += not all(np.array_equal(a, b) for a, b in zip(base, got))
    return fails


@_timed
def check_schedule_identity(samples=1000, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        n = int(10 ** rng.uniform(np.log10(2), 9))
        alpha = rng.uniform(1e-3, 1.0)
        d = int(rng.integers(3, 11))
        for caps in ((None, None), tuple(rng.uniform(0.05, 1.0, size=2))):
            s = xi_schedule(n, alpha, d, *caps)
            worst = max(worst, s.identity_residual)
    return CheckResult("schedule identity", worst <= 1e-12,
                       f"max |delta^2 nu^4 eps^(4d+2) alpha ln N - 1| = {worst:.1e} (<=1e-12)",
                       data={"worst": worst})


@_timed
def check_coupling_degeneracies(n=32, m=128, T=0.2, dt=1e-2, seeds=(0, 1)):
    rep = coupled_run(n, m, Params(xi=Xi(0.5, 0.5, 0.1)), T, dt, list(seeds))
    zero0 = rep.err_x[0] == 0.0 and rep.err_v[0] == 0.0
    free = coupled_run(n, m, Params(lam=0.0, beta=0.0, xi=Xi(0.5, 0.5, 0.1)), T, dt,
                       list(seeds))
    flat = float(np.max(free.err))
    ok = bool(zero0) and flat == 0.0 and rep.sup_error > 0
    return CheckResult("coupling degeneracies", ok,
                       f"err(0)=({rep.err_x[0]}, {rep.err_v[0]}); beta=lambda=0 max err {flat}; "
                       f"interacting sup-error {rep.sup_error:.2e}")


MEAN_FIELD = dict(n_list=(64, 128, 256, 512), alpha=0.05, reps=10, T=0.5, dt=2e-3,
                  eps_max=0.5, delta_max=0.5, m_multiplier=8)
QUICK_MEAN_FIELD = dict(MEAN_FIELD, n_list=(64, 128, 256), reps=5)


@_timed
def check_mean_field_decay(preset=None, params=None, progress=None):
    cfg = dict(MEAN_FIELD if preset is None else preset)
    p = params or Params()
    rep = sweep(cfg["n_list"], cfg["alpha"], cfg["reps"], p, cfg["T"], cfg["dt"],
                m_multiplier=cfg["m_multiplier"], eps_max=cfg["eps_max"],
                delta_max=cfg["delta_max"], progress=progress)
    ok = (not rep.degenerate) and rep.slope <= -0.5
    sups = ", ".join(f"N={c.n}: {c.sup_error:.3e}" for c in rep.cells)
    return CheckResult("mean-field decay", ok,
                       f"slope {rep.slope:.3f} +- {rep.half_width:.3f} (<= -0.5); {sups}",
                       data={"report": rep})


@_timed
def check_reference_bias(n=128, base_cell=None, params=None):
    """Repeat one decay cell with M = 16N; the sup-error shift must stay inside
    the cell's Monte Carlo half-width."""
    cfg = MEAN_FIELD
    p = params or Params()
    sched = xi_schedule(n, cfg["alpha"], p.d, cfg["eps_max"], cfg["delta_max"])
    p = p.replace(xi=sched.xi)
    seeds = list(range(cfg["reps"]))
    if base_cell is None:
        base_cell = coupled_run(n, 8 * n, p, cfg["T"], cfg["dt"], seeds, schedule=sched)
    big = coupled_run(n, 16 * n, p, cfg["T"], cfg["dt"], seeds, schedule=sched)
    shift = abs(big.sup_error - base_cell.sup_error)
    hw = base_cell.half_width
    return CheckResult("reference bias", shift < hw,
                       f"N={n}: M=8N {base_cell.sup_error:.4e}, M=16N {big.sup_error:.4e}, "
                       f"shift {shift:.2e} < half-width {hw:.2e}",
                       data={"shift": shift, "half_width": hw})


FLOCK_XI = Xi(1.0, 0.2, 1e-3)


@_timed
def check_diagnostics(n=256, seed=0, every=50, flock_seeds=10, k=4):
    """Moment growth and entropy functional on the default coupled run, plus
    flocking trend for strong alignment."""
    from .config import Config
    cfg = Config(n=n, seed=seed)
    p = cfg.params()
    paths = coupled_paths(n, cfg.m, p, cfg.t_final, cfg.dt, seed)
    traj = paths.particles
    idx = list(range(0, len(traj), every))
    if idx[-1] != len(traj) - 1:
        idx.append(len(traj) - 1)
    mom = np.array([moments(traj[i])[:2] for i in idx])
    growth = float(np.max(mom / mom[0]))
    f0 = entropy_functional(traj[0], p, k)
    f1 = entropy_functional(traj[-1], p, k)
    x2 = np.sum(traj.positions ** 2, axis=-1).mean(axis=1)
    v2 = np.sum(traj.velocities ** 2, axis=-1).mean(axis=1)
    budget = float(np.trapezoid(x2 + v2, dx=traj.dt))
    # k-NN entropy noise at this N, and O(1) constant on the right-hand side
    tol = 0.05 * abs(f0)
    entropy_ok = f1 <= f0 + budget + tol

    trends = []
    flock_p = Params(gamma=1.0, lam=0.1, beta=5.0, sigma=0.1, xi=FLOCK_XI, d=3)
    law = InitialLaw(velocity_mean=1.0)
    for s in range(flock_seeds):
        init = sample_initial(law, n, 3, 1000 + s)
        tr = simulate(init, flock_p, 1.0, 1e-2, NoisePlan(1000 + s, 3, 1e-2))
        order = np.array([flocking_order(tr[i]) for i in range(len(tr))])
        trends.append(float(np.polyfit(tr.times, order, 1)[0]))
    flock_ok = all(t > 0 for t in trends)
    ok = growth < 10 and entropy_ok and flock_ok
    return CheckResult(
        "diagnostics sanity", ok,
        f"moment growth {growth:.2f} (<10); entropy functional {f0:.3f} -> {f1:.3f} "
        f"(<= {f0 + budget + tol:.3f}); flocking trend min {min(trends):.3f} (>0) over "
        f"{flock_seeds} seeds",
        data={"growth": growth, "f0": f0, "f1": f1, "budget": budget, "trends": trends})


QUICK_CHECKS = (check_kernel_bounds, check_mollifier_mass, check_free_transport, check_ou,
                check_structural, check_schedule_identity, check_coupling_degeneracies,
                check_diagnostics)


def run_checks(full=False, echo=print):
    results = []
    for fn in QUICK_CHECKS:
        res = fn()
        echo(res.line())
        results.append(res)
    if full:
        decay = check_mean_field_decay()
        echo(decay.line())
        results.append(decay)
        base = next(c for c in decay.data["report"].cells if c.n == 128)
        bias = check_reference_bias(128, base_cell=base)
        echo(bias.line())
        results.append(bias)
    return results
