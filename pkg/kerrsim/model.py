"""
model.py - Physical parameters, run configuration and the semiclassical steady state.

All frequencies are in units of g (the inverse density of states of the bath),
times in units of 1/g.
"""
import cmath
import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

log = logging.getLogger(__name__)

# Relative tolerance on the quadratic discriminant below which two roots merge.
TANGENCY_TOL = 1e-8


@dataclass(frozen=True)
class SystemParams:
    delta: float           # detuning Δ
    chi2: float            # anharmonicity χ″
    gamma: float           # dissipation rate γ
    drive: complex = 0j    # drive amplitude E (frame of the drive)
    cutoff: float = 60.0   # bath hard cutoff ω_c = g·x_max

    def __post_init__(self):
        object.__setattr__(self, "drive", complex(self.drive))
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.cutoff > 0:
            raise ValueError(f"cutoff must be > 0, got {self.cutoff}")
        if self.cutoff < 5 * self.gamma:
            log.warning(
                "cutoff %.4g is below 5*gamma (%.4g); the flat-band chain is a poor bath",
                self.cutoff, 5 * self.gamma,
            )

    @property
    def drive_abs(self) -> float:
        return abs(self.drive)

    @property
    def drive_phase(self) -> float:
        return cmath.phase(self.drive)

    @property
    def is_linear(self) -> bool:
        return self.chi2 == 0

    def with_drive(self, drive: complex) -> "SystemParams":
        return replace(self, drive=complex(drive))


@dataclass(frozen=True)
class InitialState:
    """Coherent initial field α(0) = amplitude·e^{i·phase}."""

    amplitude: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        folded = math.remainder(self.phase, 2 * math.pi)
        if folded <= -math.pi:
            folded = math.pi
        object.__setattr__(self, "phase", folded)

    @classmethod
    def from_pi(cls, amplitude: float, phase_in_pi: float) -> "InitialState":
        """Build from a phase given in units of π, e.g. [2.5, -0.37] for 2.5·e^{-0.37πi}."""
        return cls(amplitude=amplitude, phase=phase_in_pi * math.pi)

    @property
    def alpha(self) -> complex:
        return cmath.rect(self.amplitude, self.phase)


@dataclass(frozen=True)
class SimulationConfig:
    n_sites: int = 61        # total chain length, system at site 0
    local_dim: int = 20      # Fock truncation M
    bond_dim: int = 36       # Schmidt rank χ
    dt: float = 0.01
    t_total: float = 2.0
    snapshot_stride: int = 1

    def __post_init__(self):
        problems = []
        if self.n_sites < 2:
            problems.append(f"n_sites must be >= 2, got {self.n_sites}")
        if self.local_dim < 2:
            problems.append(f"local_dim must be >= 2, got {self.local_dim}")
        if self.bond_dim < 1:
            problems.append(f"bond_dim must be >= 1, got {self.bond_dim}")
        if not self.dt > 0:
            problems.append(f"dt must be > 0, got {self.dt}")
        # t_total == 0 is the "initial snapshot only" run
        elif self.t_total != 0 and self.t_total < self.dt:
            problems.append(f"t_total must be 0 or >= dt, got {self.t_total}")
        if self.t_total < 0:
            problems.append(f"t_total must be >= 0, got {self.t_total}")
        if self.snapshot_stride < 1:
            problems.append(f"snapshot_stride must be >= 1, got {self.snapshot_stride}")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def n_steps(self) -> int:
        if self.t_total == 0:
            return 0
        return math.ceil(self.t_total / self.dt - 1e-9)


def semiclassical_drive_for_field(params: SystemParams, n: float) -> float:
    """|E|² needed to hold a stationary mean field with photon number n."""
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    return n * ((params.delta + 2 * params.chi2 * n) ** 2 + params.gamma ** 2 / 4)


def _cubic(params: SystemParams, drive_sq: float) -> tuple[float, float, float, float]:
    chi, delta = params.chi2, params.delta
    return (
        4 * chi * chi,
        4 * delta * chi,
        delta * delta + params.gamma ** 2 / 4,
        -drive_sq,
    )


def _one_real_root(a: float, b: float, c: float, d: float) -> float:
    """A real root of a·n³ + b·n² + c·n + d by Cardano / trigonometric form."""
    b, c, d = b / a, c / a, d / a
    shift = b / 3
    p = c - b * b / 3
    q = 2 * b ** 3 / 27 - b * c / 3 + d
    disc = (q / 2) ** 2 + (p / 3) ** 3
    if disc >= 0:
        s = math.sqrt(disc)
        t = np.cbrt(-q / 2 + s) + np.cbrt(-q / 2 - s)
    else:
        r = math.sqrt(-p / 3)
        arg = max(-1.0, min(1.0, -q / (2 * r ** 3)))
        t = 2 * r * math.cos(math.acos(arg) / 3)
    return float(t - shift)


def _polish(coeffs: tuple[float, ...], root: float, iterations: int = 4) -> float:
    a, b, c, d = coeffs
    for _ in range(iterations):
        f = ((a * root + b) * root + c) * root + d
        df = (3 * a * root + 2 * b) * root + c
        if df == 0:
            break
        step = f / df
        root -= step
        if abs(step) <= 1e-15 * max(1.0, abs(root)):
            break
    return root


def semiclassical_branches(params: SystemParams, drive_sq: float) -> list[float]:
    """Non-negative photon numbers of the stationary mean field, ascending.

    One or three roots; two when the drive sits on a turning point.
    """
    if drive_sq < 0:
        raise ValueError(f"drive_sq must be >= 0, got {drive_sq}")
    a, b, c, d = coeffs = _cubic(params, drive_sq)
    if a == 0:
        return [drive_sq / c]

    first = _polish(coeffs, _one_real_root(a, b, c, d))
    # deflate: a·n² + B·n + C
    big_b = b + a * first
    big_c = c + big_b * first
    disc = big_b * big_b - 4 * a * big_c
    roots = [first]
    scale = big_b * big_b + abs(4 * a * big_c)
    if abs(disc) <= TANGENCY_TOL * scale:
        roots.append(-big_b / (2 * a))
    elif disc > 0:
        s = math.sqrt(disc)
        # numerically stable quadratic roots
        qq = -0.5 * (big_b + math.copysign(s, big_b))
        roots.extend([qq / a, big_c / qq if qq != 0 else -big_b / a])

    roots = sorted(_polish(coeffs, r) for r in roots)
    merged: list[float] = []
    for r in roots:
        if r < 0:
            if r > -1e-12 * max(1.0, abs(first)):
                r = 0.0
            else:
                continue
        if merged and abs(r - merged[-1]) <= math.sqrt(TANGENCY_TOL) * max(1.0, abs(r)):
            continue
        merged.append(r)
    return merged


def is_bistable(params: SystemParams) -> bool:
    """True when the semiclassical cubic has a three-root drive interval.

    For χ″ > 0 this is Δ < −γ·√3/2, with the boundary itself excluded. The cubic
    depends on Δ and χ″ only through Δ·χ″ and χ″², so for χ″ < 0 the condition is
    Δ > γ·√3/2. With χ″ = 0 the response is linear and never bistable.
    """
    if params.chi2 == 0:
        return False
    detuning = params.delta if params.chi2 > 0 else -params.delta
    return detuning < -params.gamma * math.sqrt(3.0) / 2.0


def turning_points(params: SystemParams) -> tuple[float, float] | None:
    """Photon numbers at the top of the lower branch and the bottom of the upper branch."""
    if not is_bistable(params):
        return None
    root = math.sqrt(params.delta ** 2 - 3 * params.gamma ** 2 / 4)
    n1 = (-2 * params.delta - root) / (6 * params.chi2)
    n2 = (-2 * params.delta + root) / (6 * params.chi2)
    low, high = sorted((n1, n2))
    return low, high


def bistable_drive_interval(params: SystemParams) -> tuple[float, float] | None:
    """Drive amplitudes |E| bounding the three-root interval."""
    points = turning_points(params)
    if points is None:
        return None
    e1, e2 = (math.sqrt(semiclassical_drive_for_field(params, n)) for n in points)
    return min(e1, e2), max(e1, e2)


def mean_field_rhs(t: float, y: np.ndarray, params: SystemParams) -> np.ndarray:
    """dα/dt = −iΔα − 2iχ″|α|²α − (γ/2)α + E on the packed [Re α, Im α] vector."""
    alpha = complex(y[0], y[1])
    d_alpha = (
        -1j * params.delta * alpha
        - 2j * params.chi2 * abs(alpha) ** 2 * alpha
        - 0.5 * params.gamma * alpha
        + params.drive
    )
    return np.array([d_alpha.real, d_alpha.imag])


def semiclassical_trajectory(
    params: SystemParams,
    alpha0: complex,
    times: np.ndarray,
) -> np.ndarray:
    """Integrate the noise-free mean-field equation; returns α at each requested time."""
    times = np.asarray(times, dtype=float)
    sol = solve_ivp(
        mean_field_rhs,
        t_span=(float(times[0]), float(times[-1])),
        y0=[complex(alpha0).real, complex(alpha0).imag],
        t_eval=times,
        args=(params,),
        method="RK45",
        rtol=1e-9,
        atol=1e-12,
    )
    if not sol.success:
        raise RuntimeError(f"mean-field integration failed: {sol.message}")
    return sol.y[0] + 1j * sol.y[1]


def linear_cavity_field(params: SystemParams, alpha0: complex, t) -> np.ndarray:
    """Closed-form ⟨a⟩(t) of the χ″ = 0 cavity: dα/dt = (−iΔ − γ/2)α + E."""
    rate = -1j * params.delta - 0.5 * params.gamma
    steady = params.drive / (1j * params.delta + 0.5 * params.gamma)
    t = np.asarray(t, dtype=float)
    return steady + (complex(alpha0) - steady) * np.exp(rate * t)
