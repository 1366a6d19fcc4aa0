"""Sign/log-magnitude carrier for determinants and partition functions."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class LogValue:
    """A real number stored as sign and natural log of its magnitude.

    sign is -1, 0 or +1; ln_magnitude is -inf exactly when sign is 0.
    Determinant entries like I_0(J) grow as e^J, so all amplitude-level
    quantities are carried in this form and exponentiated only on demand.
    """

    sign: int
    ln_magnitude: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if (self.sign == 0) != (self.ln_magnitude == -math.inf):
            raise ValueError("sign = 0 iff ln_magnitude = -inf")
        if self.sign != 0 and not math.isfinite(self.ln_magnitude):
            raise ValueError("non-zero LogValue needs finite ln_magnitude")

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(0, -math.inf)

    @classmethod
    def from_value(cls, x: float) -> "LogValue":
        if x == 0.0:
            return cls.zero()
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def from_log(cls, ln_magnitude: float, sign: int = 1) -> "LogValue":
        if ln_magnitude == -math.inf or sign == 0:
            return cls.zero()
        return cls(sign, float(ln_magnitude))

    def value(self) -> float:
        """Exponentiate; may overflow to +-inf for large ln_magnitude."""
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.ln_magnitude)

    def __mul__(self, other: "LogValue") -> "LogValue":
        if self.sign == 0 or other.sign == 0:
            return LogValue.zero()
        return LogValue(self.sign * other.sign,
                        self.ln_magnitude + other.ln_magnitude)

    def __truediv__(self, other: "LogValue") -> "LogValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by zero LogValue")
        if self.sign == 0:
            return LogValue.zero()
        return LogValue(self.sign * other.sign,
                        self.ln_magnitude - other.ln_magnitude)

    def abs_squared_log(self) -> float:
        """ln |x|^2, useful for echoes; -inf for zero."""
        return 2.0 * self.ln_magnitude
