"""Search-space description and alignment results."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import RigidOffset

# One record threaded through every volume so a sign flip cannot go unnoticed.
CONVENTIONS = {
    "score": "R[i, p, q] = sum_x Dm(x) * Db(round(Rot(-i*dphi) (x - (p, q))))",
    "shift_sign": "map(x) aligns with batch(x - dt): a map impulse at (7, 8) and a batch "
    "impulse at (5, 5) peak at (p, q) = (+2, +3)",
    "rotation_center": "batch anchor: final odometric position, grid cell (0, 0)",
    "theta_hat": "correction taking anchored V-frame coordinates onto the map: "
    "x_W - t_k = Rot(dphi) (x_V - t_k) + (dx, dy)",
    "rounding": "nearest grid point, ties away from zero",
    "tie_break": "smallest |i|, then smallest p^2 + q^2, then lexicographic (i, p, q)",
}


@dataclass(frozen=True)
class SearchSpec:
    """Discretised search space.

    ``n_l`` is the full width of the translation window in cells (even), so
    shifts run over ``-n_l/2 .. n_l/2``; rotations run over ``-m .. m`` steps
    of ``delta_phi``.
    """

    delta_t: float = 0.10
    delta_phi: float = math.radians(1.0)
    n_l: int = 120
    m: int = 18

    def __post_init__(self):
        if not self.delta_t > 0 or not self.delta_phi > 0:
            raise ValueError("delta_t and delta_phi must be > 0")
        if self.n_l < 0 or self.m < 0:
            raise ValueError("n_l and m must be >= 0")
        if self.n_l % 2:
            raise ValueError("n_l must be even")

    @classmethod
    def from_prior(cls, sigma_t, sigma_phi, delta_t=0.10, delta_phi=math.radians(1.0)):
        """Window of +-3 sigma in translation and rotation."""
        h = int(round(3.0 * sigma_t / delta_t))
        m = int(round(3.0 * sigma_phi / delta_phi))
        return cls(delta_t=delta_t, delta_phi=delta_phi, n_l=2 * h, m=m)

    @property
    def h(self) -> int:
        return self.n_l // 2

    @property
    def angles(self) -> np.ndarray:
        return np.arange(-self.m, self.m + 1) * self.delta_phi

    @property
    def shape(self) -> tuple[int, int, int]:
        return (2 * self.m + 1, self.n_l + 1, self.n_l + 1)


def select_peak(scores: np.ndarray) -> tuple[int, int, int]:
    """Array index of the maximum, with the deterministic tie-break of ``CONVENTIONS``."""
    if not np.all(np.isfinite(scores)):
        raise ValueError("non-finite correlation scores")
    m = scores.shape[0] // 2
    h = scores.shape[1] // 2
    cand = np.argwhere(scores == scores.max())
    i, p, q = cand[:, 0] - m, cand[:, 1] - h, cand[:, 2] - h
    order = np.lexsort((q, p, i, p * p + q * q, np.abs(i)))
    return tuple(int(v) for v in cand[order[0]])


@dataclass
class CorrelationVolume:
    scores: np.ndarray
    spec: SearchSpec
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))

    def __post_init__(self):
        if self.scores.shape != self.spec.shape:
            raise ValueError(f"volume shape {self.scores.shape} != {self.spec.shape}")

    def offset_at(self, index) -> RigidOffset:
        ii, pp, qq = index
        s = self.spec
        return RigidOffset((pp - s.h) * s.delta_t, (qq - s.h) * s.delta_t, (ii - s.m) * s.delta_phi)

    def peak_index(self) -> tuple[int, int, int]:
        return select_peak(self.scores)

    def rotation_slice(self, step: int) -> np.ndarray:
        """Translation surface at rotation step ``step`` (``-m .. m``)."""
        return self.scores[step + self.spec.m]


@dataclass
class AlignmentResult:
    theta_hat: RigidOffset
    peak_score: float
    peak_index: tuple[int, int, int]
    runtime: float = 0.0
    volume: CorrelationVolume | None = None

    def prior_frame_offset(self) -> RigidOffset:
        """Estimated displacement of the prior-belief frame from the world frame.

        Expressed the way :func:`radarloc.batch.inject_rigid_offset` draws it
        (rotation about the true batch end, then translation), which makes it
        the component-wise negation of ``theta_hat``.
        """
        return -self.theta_hat

    @classmethod
    def from_volume(cls, volume: CorrelationVolume, runtime=0.0, keep_volume=True):
        idx = volume.peak_index()
        return cls(
            theta_hat=volume.offset_at(idx),
            peak_score=float(volume.scores[idx]),
            peak_index=idx,
            runtime=runtime,
            volume=volume if keep_volume else None,
        )
