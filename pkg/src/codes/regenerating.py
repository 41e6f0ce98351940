"""
Regenerating Code Parameters
Storage per node (alpha) and repair traffic (gamma) at the MBR and MSR points
"""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from numbers import Integral, Rational
from typing import Iterable, List, Union

from loguru import logger

from src.exceptions import InvalidParameterError

Quantity = Union[Fraction, float]

# the analytic model assumes n << N; flag anything above this share of N
POPULATION_SHARE_LIMIT = Fraction(1, 10)


class CodeFlavor(str, Enum):
    MBR = "mbr"
    MSR = "msr"


@dataclass(frozen=True)
class CodeParams:
    """
    (n, k, d) regenerating code on n storage nodes

    Attributes:
        n: Number of storage nodes
        k: Reconstruction degree (nodes contacted to rebuild the file)
        d: Repair degree (helpers contacted to regenerate a lost block)
    """

    n: int
    k: int
    d: int

    def __post_init__(self):
        for name in ("n", "k", "d"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, Integral):
                raise InvalidParameterError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not 1 <= self.k <= self.d <= self.n - 1:
            raise InvalidParameterError(
                f"1 <= k <= d <= n-1 required, got n={self.n}, k={self.k}, d={self.d}"
            )


@dataclass(frozen=True)
class CodePoint:
    """Per-node storage alpha and per-failure repair traffic gamma, in units of B"""

    alpha: Quantity
    gamma: Quantity
    flavor: CodeFlavor

    def __post_init__(self):
        if not (self.alpha > 0 and self.gamma > 0):
            raise InvalidParameterError(f"alpha > 0 and gamma > 0 required, got ({self.alpha}, {self.gamma})")
        if self.flavor is CodeFlavor.MBR and self.alpha != self.gamma:
            raise InvalidParameterError("MBR point requires alpha = gamma")


def _file_size(B) -> Quantity:
    if isinstance(B, bool) or not B > 0:
        raise InvalidParameterError(f"B > 0 required, got B={B!r}")
    return Fraction(B) if isinstance(B, Rational) else float(B)


def mbr_point(B, code: CodeParams) -> CodePoint:
    """
    Minimum bandwidth point: alpha = gamma = 2Bd / (2kd - k^2 + k)

    Args:
        B: File size (int/Fraction keeps exact rationals)
        code: Code parameters

    Returns:
        CodePoint with flavor MBR
    """
    size = _file_size(B)
    k, d = code.k, code.d
    value = 2 * size * d / (2 * k * d - k * k + k)
    return CodePoint(alpha=value, gamma=value, flavor=CodeFlavor.MBR)


def msr_point(B, code: CodeParams) -> CodePoint:
    """
    Minimum storage point: alpha = B/k, gamma = Bd / (k(d - k + 1))

    With d = k this is classical MDS repair (gamma = B).
    """
    size = _file_size(B)
    k, d = code.k, code.d
    return CodePoint(alpha=size / k, gamma=size * d / (k * (d - k + 1)), flavor=CodeFlavor.MSR)


def code_point(flavor: CodeFlavor, B, code: CodeParams) -> CodePoint:
    if CodeFlavor(flavor) is CodeFlavor.MBR:
        return mbr_point(B, code)
    return msr_point(B, code)


def validate_against_population(code: CodeParams, N: float) -> List[str]:
    """
    Check the n << N assumption behind the analytic cost model

    Returns:
        Empty list when n <= N/10, otherwise one (non-fatal) warning
    """
    if code.n <= POPULATION_SHARE_LIMIT * Fraction(N):
        return []

    message = (
        f"n={code.n} is {code.n / N:.2g} of N={N:g}; the analytic model assumes n << N "
        f"(n <= N/10), costs remain computable but may be inaccurate"
    )
    logger.warning(message)
    return [message]


def tradeoff_curve(B, k: int, d_values: Iterable[int]) -> List[dict]:
    """
    Reconstruction bandwidth (k*alpha) against repair bandwidth (gamma)

    Args:
        B: File size
        k: Reconstruction degree
        d_values: Repair degrees to tabulate (each >= k)

    Returns:
        One row per d with MBR and MSR values
    """
    rows = []
    for d in d_values:
        code = CodeParams(n=d + 1, k=k, d=d)
        mbr, msr = mbr_point(B, code), msr_point(B, code)
        rows.append({
            "d": d,
            "k": k,
            "reconstruction_mbr": k * mbr.alpha,
            "repair_mbr": mbr.gamma,
            "reconstruction_msr": k * msr.alpha,
            "repair_msr": msr.gamma,
        })
    return rows
