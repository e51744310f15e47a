"""Distance latent space model: logit p_ij = alpha - ||z_i - z_j||.

Fitting is two-stage: classical MDS of hop distances gives starting
positions, then full-batch gradient ascent with Armijo backtracking
refines the intercept and positions jointly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .netgen import Graph, shortest_paths

log = logging.getLogger(__name__)

LATENT_DIM = 2


@dataclass
class FitConfig:
    tol_grad: float = 1e-5
    max_iter: int = 2000
    armijo: float = 1e-4
    shrink: float = 0.5
    alpha_max: float = 30.0
    eps_pos: float = 1e-8
    min_step: float = 1e-14


@dataclass
class Embedding:
    alpha: float
    positions: np.ndarray
    converged: bool = False
    final_grad_norm: float = 0.0
    log_lik: float = 0.0
    n_iter: int = field(default=0, compare=False)

    @property
    def n(self) -> int:
        return len(self.positions)


def _edge_indicator(g: Graph) -> np.ndarray:
    return g.adjacency().astype(np.float64)


@njit(cache=True)
def _loglik_kernel(a, alpha, z, eps_pos):
    n = z.shape[0]
    ll = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = z[i, 0] - z[j, 0]
            dy = z[i, 1] - z[j, 1]
            eta = alpha - np.sqrt(dx * dx + dy * dy)
            # softplus(eta), branch keeps exp() bounded
            if eta > 0.0:
                sp = eta + np.log1p(np.exp(-eta))
            else:
                sp = np.log1p(np.exp(eta))
            ll += a[i, j] * eta - sp
    return ll


@njit(cache=True)
def _grad_kernel(a, alpha, z, eps_pos):
    n = z.shape[0]
    ll = 0.0
    ga = 0.0
    gz = np.zeros((n, 2))
    floored = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = z[i, 0] - z[j, 0]
            dy = z[i, 1] - z[j, 1]
            d = np.sqrt(dx * dx + dy * dy)
            eta = alpha - d
            # the likelihood is continuous at d = 0; only the direction needs the floor
            if d < eps_pos:
                d = eps_pos
                floored += 1
            if eta > 0.0:
                e = np.exp(-eta)
                sp = eta + np.log1p(e)
                sig = 1.0 / (1.0 + e)
            else:
                e = np.exp(eta)
                sp = np.log1p(e)
                sig = e / (1.0 + e)
            ll += a[i, j] * eta - sp
            r = a[i, j] - sig
            ga += r
            # d eta / d z_i = -(z_i - z_j) / d
            c = -r / d
            gz[i, 0] += c * dx
            gz[i, 1] += c * dy
            gz[j, 0] -= c * dx
            gz[j, 1] -= c * dy
    return ll, ga, gz, floored


def _loglik(a, alpha, z, eps_pos):
    return float(_loglik_kernel(a, float(alpha), z, eps_pos))


def _loglik_and_grad(a, alpha, z, eps_pos):
    ll, ga, gz, floored = _grad_kernel(a, float(alpha), z, eps_pos)
    if floored:
        log.debug("%d coincident latent pairs floored at %g", floored, eps_pos)
    return float(ll), float(ga), gz


def log_likelihood(g: Graph, e: Embedding, eps_pos: float = 1e-8) -> float:
    """Bernoulli log-likelihood of ``g`` under the embedding, summed over i < j."""
    if e.n != g.n:
        raise ValueError("embedding size does not match graph")
    if g.n < 2:
        return 0.0
    return _loglik(_edge_indicator(g), e.alpha, np.ascontiguousarray(e.positions, dtype=float), eps_pos)


def log_lik_gradient(g: Graph, e: Embedding, eps_pos: float = 1e-8):
    """Return ``(d ll / d alpha, d ll / d Z)`` with ``d ll / d Z`` of shape ``(n, 2)``."""
    if e.n != g.n:
        raise ValueError("embedding size does not match graph")
    z = np.ascontiguousarray(e.positions, dtype=float)
    if g.n < 2:
        return 0.0, np.zeros_like(z)
    _, ga, gz = _loglik_and_grad(_edge_indicator(g), e.alpha, z, eps_pos)
    return ga, gz


def _fix_signs(vecs):
    for c in range(vecs.shape[1]):
        col = vecs[:, c]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if len(nz) and col[nz[0]] < 0:
            vecs[:, c] = -col
    return vecs


def classical_mds(dist: np.ndarray, dim: int = LATENT_DIM) -> np.ndarray:
    """Classical (Torgerson) scaling of a distance matrix into ``dim`` dimensions."""
    d2 = np.asarray(dist, float) ** 2
    n = len(d2)
    j = np.eye(n) - 1.0 / n
    b = -0.5 * j @ d2 @ j
    b = 0.5 * (b + b.T)
    vals, vecs = np.linalg.eigh(b)
    order = np.argsort(vals)[::-1][:dim]
    vals, vecs = vals[order], _fix_signs(vecs[:, order].copy())
    out = vecs * np.sqrt(np.clip(vals, 0.0, None))
    if out.shape[1] < dim:
        out = np.hstack([out, np.zeros((n, dim - out.shape[1]))])
    return out


def imputed_hops(g: Graph) -> np.ndarray:
    """Hop distances with unreachable pairs set to (largest finite hop) + 1."""
    d = shortest_paths(g)
    finite = np.isfinite(d)
    fill = (d[finite].max() if finite.any() else 0.0) + 1.0
    return np.where(finite, d, fill)


def mds_init(g: Graph) -> np.ndarray:
    if g.n == 1:
        return np.zeros((1, LATENT_DIM))
    if g.n == 2:
        return np.array([[0.0, 0.0], [1.0, 0.0]])
    return classical_mds(imputed_hops(g))


def _initial_alpha(g: Graph, alpha_max: float) -> float:
    n = g.n
    dens = g.num_edges / (n * (n - 1) / 2)
    q = min(max(dens, 1.0 / (n * (n - 1))), 1.0 - 1.0 / (n * (n - 1)))
    return float(np.clip(np.log(q / (1.0 - q)), -alpha_max, alpha_max))


def fit_lsm(g: Graph, cfg: FitConfig | None = None) -> Embedding:
    """Maximum likelihood fit of the latent space model in two dimensions."""
    cfg = cfg or FitConfig()
    if g.n < 3:
        raise ValueError("fit_lsm needs at least 3 nodes")
    y = _edge_indicator(g)
    z = np.ascontiguousarray(mds_init(g), dtype=np.float64)
    npairs = g.n * (g.n - 1) // 2

    if g.num_edges in (0, npairs):
        # likelihood has no maximiser in alpha
        alpha = cfg.alpha_max if g.num_edges else -cfg.alpha_max
        ll, ga, gz = _loglik_and_grad(y, alpha, z, cfg.eps_pos)
        log.info("degenerate graph (density %s); alpha clamped", "1" if g.num_edges else "0")
        gnorm = max(abs(ga), float(np.abs(gz).max()))
        return Embedding(alpha, z, False, gnorm, ll, 0)

    alpha = _initial_alpha(g, cfg.alpha_max)
    ll, ga, gz = _loglik_and_grad(y, alpha, z, cfg.eps_pos)
    step = 1.0 / npairs
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        gnorm = max(abs(ga), float(np.abs(gz).max()))
        if gnorm < cfg.tol_grad:
            converged = True
            it -= 1
            break
        sq = ga * ga + float(np.sum(gz * gz))
        t = step
        while True:
            a_new = alpha + t * ga
            z_new = z + t * gz
            # the gradient costs little beyond the likelihood, so take both per trial
            ll_new, ga_new, gz_new = _loglik_and_grad(y, a_new, z_new, cfg.eps_pos)
            if ll_new >= ll + cfg.armijo * t * sq:
                break
            t *= cfg.shrink
            if t < cfg.min_step:
                break
        if t < cfg.min_step:
            log.debug("line search stalled at iteration %d", it)
            break
        # Barzilai-Borwein trial step for the next line search
        s_a, s_z = a_new - alpha, z_new - z
        y_a, y_z = ga_new - ga, gz_new - gz
        sy = abs(s_a * y_a + float(np.sum(s_z * y_z)))
        ss = s_a * s_a + float(np.sum(s_z * s_z))
        step = ss / sy if sy > 0 else 2.0 * t
        alpha, z, ll, ga, gz = a_new, z_new, ll_new, ga_new, gz_new
    gnorm = max(abs(ga), float(np.abs(gz).max()))
    converged = converged or gnorm < cfg.tol_grad
    return Embedding(alpha, z, converged, gnorm, ll, it)


def write_embedding(e: Embedding, path) -> None:
    lines = [f"alpha={e.alpha!r},loglik={e.log_lik!r},converged={int(e.converged)}"]
    lines += [f"{x!r},{y!r}" for x, y in np.asarray(e.positions, float).tolist()]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_embedding(path) -> Embedding:
    rows = Path(path).read_text().splitlines()
    meta = dict(kv.split("=", 1) for kv in rows[0].split(","))
    pos = np.array([[float(v) for v in r.split(",")] for r in rows[1:] if r.strip()])
    return Embedding(
        alpha=float(meta["alpha"]),
        positions=pos.reshape(-1, 2),
        converged=meta.get("converged", "0") == "1",
        log_lik=float(meta.get("loglik", "nan")),
    )
