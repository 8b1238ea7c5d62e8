# ---- UTILITIES ----
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from Utilities.errors import ParseError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Grid:
    """Node grid of the computational strip.

    Field arrays are stored row-major with shape (n2, n1): axis 0 runs along x2
    (bottom to top), axis 1 along x1.

    Grating: x1_j = j*h1 on [0, 2pi), Bloch-periodic.
    Waveguide: x1_i = (i+1)*h1 on (0, B], Dirichlet at 0 and Neumann at B.
    """
    x1: np.ndarray
    x2: np.ndarray
    h1: float
    h2: float
    w1: np.ndarray
    periodic: bool
    alpha: float = 0.0

    @property
    def n1(self) -> int:
        return self.x1.size

    @property
    def n2(self) -> int:
        return self.x2.size

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n2, self.n1)

    @property
    def line_weights(self) -> np.ndarray:
        """Quadrature weights for integrals along x1 (already multiplied by h1)."""
        return self.h1 * self.w1

    @property
    def cell_area(self) -> np.ndarray:
        """Per-node area weights, shape (n2, n1)."""
        return np.broadcast_to(self.h2 * self.line_weights, self.shape)

    def row(self, x2: float) -> int:
        """Index of the grid row sitting on x2; raises if x2 is not a node."""
        j = int(round((x2 - self.x2[0]) / self.h2))
        if j < 0 or j >= self.n2 or abs(self.x2[j] - x2) > 1e-9 * max(1.0, abs(x2)):
            raise ParseError(f"x2={x2} is not a grid row", {"h2": self.h2})
        return j

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2)

    @classmethod
    def grating(cls, n1: int, h2: float, bottom: float, top: float, alpha: float = 0.0) -> "Grid":
        h1 = TWO_PI / n1
        x1 = h1 * np.arange(n1)
        return cls(
            x1=x1,
            x2=_rows(bottom, top, h2),
            h1=h1,
            h2=h2,
            w1=np.ones(n1),
            periodic=True,
            alpha=alpha,
        )

    @classmethod
    def waveguide(cls, width: float, n1: int, h2: float, bottom: float, top: float) -> "Grid":
        h1 = width / n1
        return cls(
            x1=h1 * np.arange(1, n1 + 1),
            x2=_rows(bottom, top, h2),
            h1=h1,
            h2=h2,
            w1=waveguide_weights(n1),
            periodic=False,
        )


def _rows(bottom: float, top: float, h: float) -> np.ndarray:
    steps = (top - bottom) / h
    count = int(round(steps))
    if abs(steps - count) > 1e-8 * max(1.0, steps):
        raise ParseError(
            f"strip [{bottom}, {top}] is not a whole number of steps h2={h}",
            {"bottom": bottom, "top": top, "h2": h},
        )
    return bottom + h * np.arange(count + 1)


def waveguide_weights(n1: int) -> np.ndarray:
    """Trapezoid weights on the nodes (h, 2h, ..., B); the node x1=0 carries a zero field."""
    w = np.ones(n1)
    w[-1] = 0.5
    return w


def is_multiple(value: float, step: float) -> bool:
    ratio = value / step
    return abs(ratio - round(ratio)) < 1e-8 * max(1.0, abs(ratio))


def one_sided_derivative(top: np.ndarray, below1: np.ndarray, below2: np.ndarray, h: float) -> np.ndarray:
    """Second-order derivative at a row from that row and the two rows beneath it."""
    return (3.0 * top - 4.0 * below1 + below2) / (2.0 * h)


def complex_to_pair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def pair_to_complex(pair) -> complex:
    if isinstance(pair, (int, float)):
        return complex(pair)
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ParseError(f"expected [re, im] pair, got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def grid_to_pairs(a: np.ndarray) -> list:
    """Row-major nested list of [re, im] pairs."""
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def pairs_to_grid(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ParseError("complex grid must end in [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def sha256_bytes(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def relative_l2(a: np.ndarray, b: np.ndarray, weights: np.ndarray | None = None) -> float:
    """||a - b|| / ||b|| with optional quadrature weights; 0 when both vanish."""
    a = np.asarray(a)
    b = np.asarray(b)
    w = 1.0 if weights is None else weights
    num = math.sqrt(float(np.sum(w * np.abs(a - b) ** 2)))
    den = math.sqrt(float(np.sum(w * np.abs(b) ** 2)))
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den
