"""Pinhole projection, radial distortion and the distorted-point statistic.

Note on the distortion polynomial: here ``d`` is the *squared* normalized
radius, ``d = x_n**2 + y_n**2``, and the correction factor is
``1 + k1*d**2 + k2*d**4``.  This is quartic/octic in the radius, unlike the
common ``1 + k1*r**2 + k2*r**4`` model; it is implemented as written because
the calibrated coefficients below were reported against that form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")


# calibrated 1920x1080 camera (central estimates)
REFERENCE_CAMERA = CameraIntrinsics(fx=4386.76, fy=4374.34, cx=971.65, cy=503.64,
                                    k1=4.30, k2=28.74, s=0.0)
REFERENCE_RESOLUTION = (1920, 1080)


@dataclass(frozen=True)
class CameraExtrinsics:
    R: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64)
        tau = np.asarray(self.tau, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise ValueError("R must be 3x3")
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("R must be a proper rotation (det = +1)")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def identity(cls) -> "CameraExtrinsics":
        return cls(np.eye(3), np.zeros(3))


def rotation_xyz(rx_deg: float, ry_deg: float, rz_deg: float) -> np.ndarray:
    """Rotation matrix ``Rz @ Ry @ Rx`` from angles in degrees."""
    a, b, c = np.radians([rx_deg, ry_deg, rz_deg])
    Rx = np.array([[1, 0, 0], [0, np.cos(a), -np.sin(a)], [0, np.sin(a), np.cos(a)]])
    Ry = np.array([[np.cos(b), 0, np.sin(b)], [0, 1, 0], [-np.sin(b), 0, np.cos(b)]])
    Rz = np.array([[np.cos(c), -np.sin(c), 0], [np.sin(c), np.cos(c), 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


@dataclass(frozen=True)
class PlanarTarget:
    """Checkerboard corners on the world plane ``z = 0``."""

    points: np.ndarray
    spacing: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if len(pts) >= 3:
            centered = pts - pts.mean(axis=0)
            if np.linalg.svd(centered, compute_uv=False)[-1] > 1e-9 * max(1.0, np.abs(pts).max()):
                raise ValueError("target points are not coplanar")
        object.__setattr__(self, "points", pts)

    @classmethod
    def grid(cls, nx: int, ny: int, spacing: float = 2.0, centered: bool = True) -> "PlanarTarget":
        ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        pts = np.stack([ii.ravel() * spacing, jj.ravel() * spacing, np.zeros(ii.size)], axis=1)
        if centered:
            pts[:, :2] -= pts[:, :2].mean(axis=0)
        return cls(pts, spacing)


def world_to_camera(p, ext: CameraExtrinsics) -> np.ndarray:
    """``q = R^T (p - tau)`` for one point ``(3,)`` or a batch ``(N, 3)``."""
    p = np.asarray(p, dtype=np.float64)
    return (p - ext.tau) @ ext.R


def project(q, intr: CameraIntrinsics) -> np.ndarray:
    """Perspective divide followed by the intrinsics, column-vector convention."""
    q = np.asarray(q, dtype=np.float64)
    qk = q[..., 2]
    if np.any(qk <= 0):
        raise ValueError("point behind the camera (q_k <= 0)")
    xn = q[..., 0] / qk
    yn = q[..., 1] / qk
    rx = intr.fx * xn + intr.s * yn + intr.cx
    ry = intr.fy * yn + intr.cy
    return np.stack([rx, ry], axis=-1)


def normalize(pixel, intr: CameraIntrinsics) -> np.ndarray:
    """Pixel coordinates to normalized coordinates about the optical center."""
    pixel = np.asarray(pixel, dtype=np.float64)
    yn = (pixel[..., 1] - intr.cy) / intr.fy
    xn = (pixel[..., 0] - intr.cx - intr.s * yn) / intr.fx
    return np.stack([xn, yn], axis=-1)


def distort(pixel, intr: CameraIntrinsics) -> np.ndarray:
    """Distorted normalized coordinates of a pixel (or an ``(N, 2)`` batch)."""
    n = normalize(pixel, intr)
    d = n[..., 0] ** 2 + n[..., 1] ** 2
    factor = 1.0 + intr.k1 * d ** 2 + intr.k2 * d ** 4
    return n * factor[..., None]


def distortion_displacement(pixel, intr: CameraIntrinsics) -> np.ndarray:
    """Pixel-space displacement ``distorted - original`` for each pixel."""
    pixel = np.asarray(pixel, dtype=np.float64)
    nd = distort(pixel, intr)
    rx = intr.fx * nd[..., 0] + intr.s * nd[..., 1] + intr.cx
    ry = intr.fy * nd[..., 1] + intr.cy
    return np.stack([rx, ry], axis=-1) - pixel


def target_displacements(target: PlanarTarget, ext: CameraExtrinsics,
                         intr: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Projected pixels and displacement norms for every target point."""
    pix = project(world_to_camera(target.points, ext), intr)
    disp = distortion_displacement(pix, intr)
    return pix, np.hypot(disp[:, 0], disp[:, 1])


def distorted_fraction(target: PlanarTarget, ext: CameraExtrinsics,
                       intr: CameraIntrinsics, threshold: float = 1.0) -> float:
    """Percentage of target points displaced by more than `threshold` pixels."""
    if len(target.points) == 0:
        raise ValueError("empty target")
    _, norms = target_displacements(target, ext, intr)
    return 100.0 * np.count_nonzero(norms > threshold) / len(norms)
