"""
Regenerating code arithmetic (MBR / MSR operating points)
"""

from .regenerating import (
    CodeFlavor,
    CodeParams,
    CodePoint,
    code_point,
    mbr_point,
    msr_point,
    tradeoff_curve,
    validate_against_population,
)
