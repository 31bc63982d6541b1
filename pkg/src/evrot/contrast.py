"""Contrast-maximisation baseline for batch angular-velocity estimation.

Each event ray is rotated back to the batch start under a candidate angular
velocity and re-projected; the accumulated image of warped events (IWE)
becomes sharper as the candidate approaches the true motion, so its
per-pixel variance serves as the objective to maximise.
"""

import math
from dataclasses import dataclass

import numba
import numpy as np

from .camera import pixel_to_ray, project
from .errors import OptimizationFailureError
from .synth import rotate_rays


@dataclass(frozen=True)
class CmConfig:
    """Kernel and optimiser settings for contrast maximisation."""

    sigma: float = 1.0          # kernel bandwidth, px
    truncation: float = 3.0     # kernel support half-width, in sigmas
    max_iters: int = 100
    rel_tol: float = 1e-6       # relative objective change
    fd_step: float = 1e-4       # central-difference step, rad/s
    restart_every: int = 3      # steepest-descent restart period
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 20
    init_step: float = 0.1      # first trial step along the unit direction, rad/s


@dataclass
class Iwe:
    """Image of warped events on a pixel grid."""

    image: np.ndarray
    sigma: float

    @property
    def pixel_count(self):
        return self.image.size

    @property
    def total_mass(self):
        return float(self.image.sum())


@dataclass
class CmResult:
    omega: np.ndarray
    contrast: float
    iterations: int
    n_evals: int
    converged: bool
    objective_path: np.ndarray  # contrast after each accepted step


@numba.njit(cache=True)
def _splat(px, py, image, sigma, trunc):
    # truncation is per axis, so the support is a (2*trunc*sigma)^2 box;
    # the square box keeps ~99.5% of the kernel mass at trunc=3
    height, width = image.shape
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    r = trunc * sigma
    wx = np.empty(int(2.0 * r) + 3)
    for i in range(px.shape[0]):
        x = px[i]
        y = py[i]
        xl = int(math.ceil(x - r))
        xh = int(math.floor(x + r))
        yl = int(math.ceil(y - r))
        yh = int(math.floor(y + r))
        if xl < 0:
            xl = 0
        if yl < 0:
            yl = 0
        if xh > width - 1:
            xh = width - 1
        if yh > height - 1:
            yh = height - 1
        if xh < xl or yh < yl:
            continue
        for j in range(xh - xl + 1):
            dx = x - (xl + j)
            wx[j] = np.exp(-dx * dx * inv2s2)
        for yy in range(yl, yh + 1):
            dy = y - yy
            wy = np.exp(-dy * dy * inv2s2)
            for j in range(xh - xl + 1):
                image[yy, xl + j] += wy * wx[j]


def warp_events(batch, omega, intrinsics, rays=None):
    """Event pixels motion-compensated to the batch start.

    Rotates each event ray backwards through the motion accumulated since
    the window opened, then re-projects. Returns (pixels, valid); rays that
    leave the forward hemisphere are flagged invalid.
    """
    if rays is None:
        rays = pixel_to_ray(batch.xy, intrinsics)
    warped = rotate_rays(rays, np.asarray(omega, dtype=float),
                         batch.t_start - batch.t)
    return project(warped, intrinsics)


def accumulate_iwe(batch, omega, intrinsics, sigma=1.0, resolution=None,
                   rays=None, truncation=3.0):
    """Accumulate the image of warped events under a candidate velocity.

    Each valid warped event adds a truncated Gaussian kernel around its
    (continuous) warped position; out-of-frame warps contribute only their
    in-frame support. ``resolution`` overrides the grid size, defaulting to
    the sensor.
    """
    if sigma <= 0.0:
        raise ValueError("kernel bandwidth must be positive")
    if resolution is None:
        resolution = (intrinsics.width, intrinsics.height)
    width, height = int(resolution[0]), int(resolution[1])
    pixels, valid = warp_events(batch, omega, intrinsics, rays=rays)
    image = np.zeros((height, width))
    if np.any(valid):
        _splat(np.ascontiguousarray(pixels[valid, 0]),
               np.ascontiguousarray(pixels[valid, 1]),
               image, float(sigma), float(truncation))
    return Iwe(image=image, sigma=float(sigma))


def contrast(iwe):
    """Variance of the IWE over all pixels."""
    return float(np.var(iwe.image))


def cm_objective(batch, omega, intrinsics, sigma=1.0, resolution=None,
                 rays=None):
    """Contrast of the IWE accumulated under ``omega``."""
    return contrast(accumulate_iwe(batch, omega, intrinsics, sigma=sigma,
                                   resolution=resolution, rays=rays))


def _fd_gradient(fun, x, h):
    g = np.empty(3)
    for c in range(3):
        e = np.zeros(3)
        e[c] = h
        g[c] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


def cm_solve(batch, intrinsics, config=None, omega0=None, resolution=None,
             rays=None):
    """Maximise IWE contrast over angular velocity.

    Nonlinear conjugate gradient (Polak-Ribiere, steepest-descent restart
    every few iterations) on central-difference gradients, with Armijo
    backtracking along unit directions. Stops on relative objective change
    below ``rel_tol`` or a vanishing gradient.
    """
    config = config or CmConfig()
    if rays is None:
        rays = pixel_to_ray(batch.xy, intrinsics)
    x = np.zeros(3) if omega0 is None else np.asarray(omega0, dtype=float).copy()

    n_evals = 0

    def f(w):
        # negated contrast: the loop below minimises
        nonlocal n_evals
        n_evals += 1
        value = cm_objective(batch, w, intrinsics, sigma=config.sigma,
                             resolution=resolution, rays=rays)
        if not np.isfinite(value):
            raise OptimizationFailureError(
                f"contrast objective is not finite at omega={w}"
            )
        return -value

    fx = f(x)
    path = [-fx]
    g = _fd_gradient(f, x, config.fd_step)
    d = -g
    step = config.init_step
    iterations = 0
    converged = False
    for it in range(config.max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm < 1e-14:
            converged = True
            break
        if float(np.dot(d, g)) >= 0.0:
            d = -g  # safeguard: fall back to steepest descent
        u = d / np.linalg.norm(d)
        slope = float(np.dot(g, u))
        t = step
        f_new = fx
        accepted = False
        for _ in range(config.max_backtracks):
            f_try = f(x + t * u)
            if f_try <= fx + config.armijo_c * t * slope:
                f_new = f_try
                accepted = True
                break
            t *= config.backtrack
        if not accepted:
            # no measurable progress along a descent direction
            converged = True
            break
        x = x + t * u
        rel = (fx - f_new) / max(abs(fx), 1e-300)
        fx = f_new
        path.append(-fx)
        iterations += 1
        g_new = _fd_gradient(f, x, config.fd_step)
        if (it + 1) % config.restart_every == 0:
            beta = 0.0
        else:
            denom = float(np.dot(g, g))
            beta = max(0.0, float(np.dot(g_new, g_new - g)) / max(denom, 1e-300))
        d = -g_new + beta * d
        g = g_new
        step = max(2.0 * t, 1e-6)
        if rel < config.rel_tol:
            converged = True
            break
    return CmResult(
        omega=x,
        contrast=-fx,
        iterations=iterations,
        n_evals=n_evals,
        converged=converged,
        objective_path=np.asarray(path),
    )
