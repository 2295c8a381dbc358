"""
Short Weierstrass curve parameters and affine points.

P-256 constants are vendored in data/p256.yaml. A toy curve of prime order 269
ships alongside it so the signing algebra can be checked exhaustively.
"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, Optional

import yaml
from pydantic import BaseModel, ConfigDict, model_validator

from leaklab.errors import ConfigError

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"


class CurvePoint(BaseModel):
    """Affine point; both coordinates None encode the identity."""
    model_config = ConfigDict(frozen=True)

    x: Optional[int] = None
    y: Optional[int] = None

    @model_validator(mode="after")
    def check_coordinates(self) -> "CurvePoint":
        if (self.x is None) != (self.y is None):
            raise ValueError("identity needs both coordinates unset")
        return self

    @classmethod
    def identity(cls) -> "CurvePoint":
        return cls()

    @property
    def is_identity(self) -> bool:
        return self.x is None


class CurveParams(BaseModel):
    """Domain parameters y^2 = x^3 + ax + b over F_p with generator (gx, gy) of order n."""
    model_config = ConfigDict(frozen=True)

    name: str
    p: int
    a: int
    b: int
    gx: int
    gy: int
    n: int
    h: int = 1

    @model_validator(mode="after")
    def check_generator(self) -> "CurveParams":
        if not self.contains(self.G):
            raise ValueError(f"generator of {self.name} is not on the curve")
        return self

    @property
    def G(self) -> CurvePoint:
        return CurvePoint(x=self.gx, y=self.gy)

    @property
    def bit_length(self) -> int:
        """Bit length of the group order, i.e. of nonces and keys."""
        return self.n.bit_length()

    @property
    def byte_length(self) -> int:
        return (self.p.bit_length() + 7) // 8

    def contains(self, point: CurvePoint) -> bool:
        if point.is_identity:
            return True
        x, y = point.x, point.y
        assert x is not None and y is not None
        if not (0 <= x < self.p and 0 <= y < self.p):
            return False
        return (y * y - (x * x * x + self.a * x + self.b)) % self.p == 0


def load_curve(path: Path) -> CurveParams:
    """Load curve parameters from a YAML file with hex or decimal integers."""
    with open(path, "r") as f:
        raw = yaml.safe_load(f)
    try:
        values = {
            key: int(str(raw[key]), 0)
            for key in ("p", "a", "b", "gx", "gy", "n", "h")
        }
    except (KeyError, ValueError) as e:
        raise ConfigError(f"Malformed curve file {path}: {e}") from e
    return CurveParams(name=raw.get("name", path.stem), **values)


@lru_cache(maxsize=None)
def p256() -> CurveParams:
    return load_curve(DATA_DIR / "p256.yaml")


# y^2 = x^3 + 6x + 9 over F_263, generator (0, 3) of prime order 269
TOY_CURVE = CurveParams(name="toy-269", p=263, a=6, b=9, gx=0, gy=3, n=269, h=1)


def get_curve(name: str) -> CurveParams:
    curves: Dict[str, CurveParams] = {"P-256": p256(), TOY_CURVE.name: TOY_CURVE}
    aliases = {"p256": "P-256", "secp256r1": "P-256", "nist-256p": "P-256"}
    key = aliases.get(name.lower(), name)
    if key not in curves:
        raise ConfigError(f"Unknown curve '{name}'. Available: {', '.join(curves)}")
    return curves[key]
