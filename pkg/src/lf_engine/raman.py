"""Power evolution of a WDM comb plus Raman pumps along one fiber span.

The coupled equations solved here are, for every component ``l``::

    rho_l * dP_l/dz = [sum_i zeta(f_l / f_i) * C_R(f_i - f_l) * P_i] * P_l - 2 * alpha_l * P_l

with ``rho_l = +1`` for co-propagating components and ``-1`` for
counter-propagating pumps.  Integration is classic fixed-step RK4; counter
propagating pumps turn the problem into a two-point boundary value problem
that is solved by shooting.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError, DomainError, ShootingError, StepSizeError

FORWARD = 1
BACKWARD = -1


def zeta(x: float) -> float:
    """Photon-energy ratio factor of the Raman coupling term.

    Returns ``x`` for ``x > 1``, ``0`` for ``x == 1`` and ``1`` for ``x < 1``.
    """
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"zeta is defined for positive finite ratios, got {x!r}")
    if x > 1:
        return float(x)
    if x == 1:
        return 0.0
    return 1.0


@dataclass(frozen=True)
class RamanGainProfile:
    """Tabulated Raman gain coefficient C_R(u) in 1/(W m).

    Only non-negative offsets are stored; negative offsets are served by the
    odd extension ``C_R(-u) = -C_R(u)``.  Between samples the table is
    interpolated linearly, beyond the last sample the gain is zero, and the
    point ``(0, 0)`` is implied when the table starts above zero.
    """

    offsets_hz: np.ndarray
    gain_per_w_per_m: np.ndarray

    def __post_init__(self):
        u = np.array(self.offsets_hz, dtype=float).ravel()
        g = np.array(self.gain_per_w_per_m, dtype=float).ravel()
        if u.shape != g.shape or u.size == 0:
            raise DomainError("Raman gain table needs matching, non-empty offset and gain arrays")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(g))):
            raise DomainError("Raman gain table contains non-finite values")
        if np.any(u < 0):
            raise DomainError("Raman gain offsets must be non-negative (the odd extension is implied)")
        if np.any(np.diff(u) <= 0):
            raise DomainError("Raman gain offsets must be strictly increasing")
        if np.any(g < 0):
            raise DomainError("Raman gain must be non-negative for positive offsets")
        if u[0] == 0 and g[0] != 0:
            raise DomainError("Raman gain must vanish at zero offset")
        if u[0] > 0:
            u = np.concatenate(([0.0], u))
            g = np.concatenate(([0.0], g))
        u.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "offsets_hz", u)
        object.__setattr__(self, "gain_per_w_per_m", g)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        mag = np.interp(np.abs(u), self.offsets_hz, self.gain_per_w_per_m, right=0.0)
        out = np.sign(u) * mag
        return float(out) if out.ndim == 0 else out

    @property
    def is_zero(self) -> bool:
        return not np.any(self.gain_per_w_per_m)

    @classmethod
    def zero(cls) -> "RamanGainProfile":
        return cls(np.array([0.0, 1.0]), np.array([0.0, 0.0]))


# Normalized silica Raman gain shape (offset in THz, relative gain), peak near 13.2 THz.
_SILICA_SHAPE = np.array([
    (0.0, 0.0), (0.5, 0.02), (1.0, 0.04), (2.0, 0.10), (3.0, 0.18), (4.0, 0.25),
    (5.0, 0.32), (6.0, 0.38), (7.0, 0.44), (8.0, 0.50), (9.0, 0.56), (10.0, 0.66),
    (11.0, 0.78), (12.0, 0.90), (13.0, 0.99), (13.2, 1.00), (14.0, 0.88), (14.5, 0.74),
    (15.0, 0.60), (16.0, 0.35), (17.0, 0.30), (17.5, 0.31), (18.0, 0.32), (19.0, 0.30),
    (20.0, 0.22), (21.0, 0.16), (22.0, 0.12), (24.0, 0.09), (25.0, 0.08), (28.0, 0.04),
    (30.0, 0.02), (35.0, 0.0),
])


def silica_raman_gain(peak_per_w_per_m: float = 4.0e-4) -> RamanGainProfile:
    """Typical standard single-mode fiber Raman gain curve scaled to ``peak``."""
    return RamanGainProfile(_SILICA_SHAPE[:, 0] * 1e12, _SILICA_SHAPE[:, 1] * peak_per_w_per_m)


@dataclass(frozen=True)
class SpectralComponent:
    """A WDM channel or Raman pump.

    ``power_w`` is the launch power at z = 0 for forward components and the
    boundary power at z = L for backward pumps.  ``alpha_per_m`` is the field
    loss, so power decays as ``exp(-2 * alpha * z)``.
    """

    frequency_hz: float
    power_w: float
    alpha_per_m: float
    direction: int = FORWARD
    kind: str = "channel"

    def __post_init__(self):
        if not (math.isfinite(self.frequency_hz) and self.frequency_hz > 0):
            raise DomainError(f"frequency must be positive, got {self.frequency_hz!r}")
        if not (math.isfinite(self.power_w) and self.power_w >= 0):
            raise DomainError(f"power must be non-negative, got {self.power_w!r}")
        if not (math.isfinite(self.alpha_per_m) and self.alpha_per_m >= 0):
            raise DomainError(f"loss must be non-negative, got {self.alpha_per_m!r}")
        if self.direction not in (FORWARD, BACKWARD):
            raise DomainError(f"direction must be +1 or -1, got {self.direction!r}")
        if self.kind not in ("channel", "pump"):
            raise DomainError(f"kind must be 'channel' or 'pump', got {self.kind!r}")
        if self.kind == "channel" and self.direction != FORWARD:
            raise DomainError("WDM channels always propagate forward")


@dataclass(frozen=True)
class PowerProfileSet:
    """Sampled channel powers on a uniform z grid.

    ``power_w`` and ``rho`` have shape ``(len(z_m), n_channels)``.  Pump
    profiles are kept in ``pump_power_w`` for diagnostics only.
    """

    z_m: np.ndarray
    frequencies_hz: np.ndarray
    power_w: np.ndarray
    rho: np.ndarray
    pump_frequencies_hz: np.ndarray = field(default_factory=lambda: np.empty(0))
    pump_power_w: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    shooting_iterations: int = 0
    shooting_residual: float = 0.0

    def __post_init__(self):
        for name in ("z_m", "frequencies_hz", "power_w", "rho", "pump_frequencies_hz", "pump_power_w"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def length_m(self) -> float:
        return float(self.z_m[-1])

    @property
    def dz_m(self) -> float:
        return float(self.z_m[1] - self.z_m[0])

    @property
    def rho_end(self) -> np.ndarray:
        return self.rho[-1]

    def to_csv(self, path) -> None:
        n = len(self.frequencies_hz)
        header = ["z_m"] + [f"ch_{k}_P_W" for k in range(n)] + [f"ch_{k}_rho" for k in range(n)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i, z in enumerate(self.z_m):
                w.writerow([repr(float(z))]
                           + [repr(float(v)) for v in self.power_w[i]]
                           + [repr(float(v)) for v in self.rho[i]])


def coupling_matrix(frequencies: np.ndarray, gain: RamanGainProfile | None) -> np.ndarray:
    """Matrix K with K[l, i] = zeta(f_l / f_i) * C_R(f_i - f_l)."""
    f = np.asarray(frequencies, dtype=float)
    n = f.size
    if gain is None or gain.is_zero:
        return np.zeros((n, n))
    ratio = f[:, None] / f[None, :]
    z = np.where(ratio > 1, ratio, np.where(ratio == 1, 0.0, 1.0))
    return z * gain(f[None, :] - f[:, None])


def raman_rhs(z, powers, components: Sequence[SpectralComponent], gain: RamanGainProfile | None):
    """dP/dz for every component at position ``z`` (W/m)."""
    p = np.asarray(powers, dtype=float)
    if p.shape != (len(components),):
        raise ContractError(f"got {p.size} powers for {len(components)} components")
    if np.any(p < 0):
        raise ContractError("powers must be non-negative")
    f = np.array([c.frequency_hz for c in components])
    alpha = np.array([c.alpha_per_m for c in components])
    direction = np.array([c.direction for c in components], dtype=float)
    K = coupling_matrix(f, gain)
    return ((K @ p) * p - 2.0 * alpha * p) / direction


def _grid(length: float, dz: float) -> np.ndarray:
    if not (dz > 0 and dz <= length):
        raise ContractError(f"dz must satisfy 0 < dz <= L, got dz={dz!r}, L={length!r}")
    n = max(1, math.ceil(length / dz - 1e-9))
    return np.linspace(0.0, length, n + 1)


def _rk4(p0, K, alpha2, direction, h, nsteps, active):
    """Integrate forward in z from p0; returns the (nsteps+1, n) trajectory.

    Entries where ``active`` is false are small-signal probes: they carry the
    normalized power of a zero-power channel and do not act on the others.
    """
    out = np.empty((nsteps + 1, p0.size))
    out[0] = p = p0
    inv = 1.0 / direction
    mask = active.astype(float)

    def f(q):
        return ((K @ (q * mask)) - alpha2) * q * inv

    half = 0.5 * h
    for i in range(1, nsteps + 1):
        k1 = f(p)
        k2 = f(p + half * k1)
        k3 = f(p + half * k2)
        k4 = f(p + h * k3)
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise StepSizeError(
                f"negative or non-finite power at z={i * h:.6g} m; reduce dz (currently {h:.6g} m)")
        out[i] = p
    return out


def solve_power_evolution(span, launch: Sequence[SpectralComponent], dz: float = 10.0,
                          tol: float = 1e-8, max_iter: int = 50) -> PowerProfileSet:
    """Solve the Raman equations over one span.

    ``span`` must provide ``length_m``, ``raman_gain`` (or ``None``) and
    ``pumps``.  ``launch`` holds the channels (and optionally extra pumps).
    Backward pumps trigger a damped-Newton shooting iteration on their
    unknown z = 0 powers until the relative boundary residual at z = L drops
    below ``tol``.
    """
    comps = list(launch) + list(getattr(span, "pumps", ()) or ())
    if not comps:
        raise ContractError("nothing to propagate")
    z = _grid(float(span.length_m), dz)
    h = z[1] - z[0]
    nsteps = z.size - 1
    f = np.array([c.frequency_hz for c in comps])
    alpha2 = 2.0 * np.array([c.alpha_per_m for c in comps])
    direction = np.array([c.direction for c in comps], dtype=float)
    K = coupling_matrix(f, getattr(span, "raman_gain", None))
    p0 = np.array([c.power_w for c in comps])
    is_ch = np.array([c.kind == "channel" for c in comps])
    probe = is_ch & (p0 == 0)
    p0[probe] = 1.0

    back = np.flatnonzero(direction < 0)
    back = back[p0[back] > 0]  # zero-power pumps stay at zero
    iterations, residual = 0, 0.0
    if back.size == 0:
        traj = _rk4(p0, K, alpha2, direction, h, nsteps, ~probe)
    else:
        traj, iterations, residual = _shoot(p0, back, K, alpha2, direction, h, nsteps, float(z[-1]),
                                            tol, max_iter, ~probe)

    rho = traj / p0
    power = np.where(probe, 0.0, traj)
    return PowerProfileSet(
        z, f[is_ch], power[:, is_ch], rho[:, is_ch],
        pump_frequencies_hz=f[~is_ch], pump_power_w=traj[:, ~is_ch],
        shooting_iterations=iterations, shooting_residual=residual)


def _shoot(p_spec, back, K, alpha2, direction, h, nsteps, length, tol, max_iter, active):
    target = p_spec[back]

    def run(logx):
        p = p_spec.copy()
        p[back] = np.exp(logx)
        traj = _rk4(p, K, alpha2, direction, h, nsteps, active)
        return traj, traj[-1, back] / target - 1.0

    x = np.log(target) - alpha2[back] * length
    traj, r = run(x)
    for it in range(1, max_iter + 1):
        err = float(np.max(np.abs(r)))
        if err < tol:
            return traj, it - 1, err
        # finite-difference Jacobian of the residual in log-power coordinates
        J = np.empty((back.size, back.size))
        step = 1e-6
        for j in range(back.size):
            xp = x.copy()
            xp[j] += step
            J[:, j] = (run(xp)[1] - r) / step
        dx = np.linalg.solve(J, -r)
        lam = 1.0
        while True:
            try:
                t_new, r_new = run(x + lam * dx)
            except StepSizeError:
                t_new, r_new = None, None
            if r_new is not None and np.max(np.abs(r_new)) < err:
                break
            lam *= 0.5
            if lam < 1e-4:
                raise ShootingError(f"shooting line search stalled (residual {err:.3e})", err, it)
        x = x + lam * dx
        traj, r = t_new, r_new
    err = float(np.max(np.abs(r)))
    if err < tol:
        return traj, max_iter, err
    raise ShootingError(f"shooting did not converge in {max_iter} iterations (residual {err:.3e})",
                        err, max_iter)
