"""
Oriented Gabor filter bank tuned to vessel thickness.

Every kernel is an anisotropic Gaussian modulated by a cosine across the
orientation axis:

    g(x, y) = exp(-pi * (x_p**2 / sigma_x**2 + y_p**2 / sigma_y**2)) * cos(2 * pi * f * x_p)
    x_p =  x cos(theta) + y sin(theta)
    y_p = -x sin(theta) + y cos(theta)

with x pointing right, y pointing down and theta in degrees
counterclockwise from the x axis. The bank response is the per-pixel
maximum over all orientations.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from vesselseg.raster import as_real, convolve2d

logger = logging.getLogger(__name__)

DEFAULT_THICKNESS = 6
DEFAULT_BETA = 0.5
DEFAULT_ORIENTATION_STEP = 15
DEFAULT_KERNEL_SIGMAS = 3.0

# sqrt(2 ln 2 / pi), the half-amplitude bandwidth constant.
LAMBDA = math.sqrt(2.0 * math.log(2.0) / math.pi)
ELONGATION = 0.85


@dataclass(frozen=True)
class GaborParams:
    t: float
    beta: float
    f: float
    lam: float
    sigma_x: float
    sigma_y: float


@dataclass(frozen=True, eq=False)
class GaborKernel:
    theta: float
    radius: int
    samples: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.radius + 1


@dataclass(frozen=True)
class OrientationSet:
    angles: Tuple[float, ...] = field(
        default_factory=lambda: tuple(float(a) for a in range(0, 180, DEFAULT_ORIENTATION_STEP))
    )

    @classmethod
    def evenly_spaced(cls, step: int) -> "OrientationSet":
        if step < 1 or step > 180 or 180 % step != 0:
            raise ValueError(f"Orientation step must divide 180 degrees, got {step}")
        return cls(tuple(float(a) for a in range(0, 180, step)))

    def __len__(self) -> int:
        return len(self.angles)

    def __iter__(self):
        return iter(self.angles)


def derive_params(t: float = DEFAULT_THICKNESS, beta: float = DEFAULT_BETA) -> GaborParams:
    """Filter parameters from the expected vessel thickness ``t`` (pixels)."""
    if t < 1:
        raise ValueError(f"Vessel thickness t must be >= 1 pixel, got {t}")
    if not 0.5 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0.5, 1], got {beta}")
    sigma_x = LAMBDA * t / (0.75 * math.pi)
    return GaborParams(
        t=float(t),
        beta=float(beta),
        f=beta / t,
        lam=LAMBDA,
        sigma_x=sigma_x,
        sigma_y=ELONGATION * sigma_x,
    )


def kernel_half_extent(params: GaborParams, sigmas: float = DEFAULT_KERNEL_SIGMAS) -> int:
    """Half-extent that truncates the envelope at ``sigmas`` standard deviations of sigma_x."""
    if sigmas <= 0:
        raise ValueError(f"Kernel extent in sigmas must be positive, got {sigmas}")
    return max(1, int(math.ceil(sigmas * params.sigma_x)))


def make_kernel(params: GaborParams, theta: float, radius: int) -> GaborKernel:
    if radius < 1:
        raise ValueError(f"Kernel half-extent must be >= 1, got {radius}")
    # Reduce modulo 180 so that theta and theta + 180 sample identical values.
    rad = math.radians(theta % 180.0)
    cos_t = math.cos(rad)
    sin_t = math.sin(rad)

    y, x = np.mgrid[-radius:radius + 1, -radius:radius + 1].astype(np.float64)
    x_p = x * cos_t + y * sin_t
    y_p = -x * sin_t + y * cos_t
    envelope = np.exp(-math.pi * (x_p ** 2 / params.sigma_x ** 2 + y_p ** 2 / params.sigma_y ** 2))
    carrier = np.cos(2.0 * math.pi * params.f * x_p)
    samples = envelope * carrier
    samples.setflags(write=False)
    return GaborKernel(theta=float(theta), radius=radius, samples=samples)


def build_bank(params: GaborParams, orients: OrientationSet, radius: int) -> Tuple[GaborKernel, ...]:
    return tuple(make_kernel(params, theta, radius) for theta in orients)


def _check_orients(orients: OrientationSet) -> None:
    if len(orients) == 0:
        raise ValueError("Orientation set is empty")


def apply_bank(
    img: np.ndarray,
    params: GaborParams,
    orients: OrientationSet,
    radius: Optional[int] = None,
) -> np.ndarray:
    _check_orients(orients)
    image = as_real(img)
    if radius is None:
        radius = kernel_half_extent(params)
    logger.debug("gabor bank: %d orientations, kernel %dx%d", len(orients), 2 * radius + 1, 2 * radius + 1)

    max_response = None
    for kernel in build_bank(params, orients, radius):
        response = convolve2d(image, kernel.samples)
        if max_response is None:
            max_response = response
        else:
            np.maximum(max_response, response, out=max_response)
    return max_response


@dataclass(frozen=True)
class GaborConfig:
    t: int = DEFAULT_THICKNESS
    beta: float = DEFAULT_BETA
    orientation_step: int = DEFAULT_ORIENTATION_STEP
    kernel_sigmas: float = DEFAULT_KERNEL_SIGMAS

    def __post_init__(self) -> None:
        # Delegate range checks to the constructors that own them.
        derive_params(self.t, self.beta)
        OrientationSet.evenly_spaced(self.orientation_step)
        if self.kernel_sigmas <= 0:
            raise ValueError(f"kernel_sigmas must be positive, got {self.kernel_sigmas}")

    @property
    def params(self) -> GaborParams:
        return derive_params(self.t, self.beta)

    @property
    def orientations(self) -> OrientationSet:
        return OrientationSet.evenly_spaced(self.orientation_step)

    @property
    def radius(self) -> int:
        return kernel_half_extent(self.params, self.kernel_sigmas)
