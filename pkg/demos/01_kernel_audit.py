"""Audit the built-in kernels against the admissibility conditions.

The five checks (normalization, moment finiteness, tail decay, slice
boundedness, symmetry) either all pass, or the report says which one
failed and with what witness.  The vertically singular kernel with
beta = 1/2 is the designed near-miss: integrable, but its horizontal
slices blow up at zero height.
"""

from nlthin import (
    audit_hypotheses,
    cylinder_indicator,
    gaussian_separable,
    mollifier_over_norm_p,
    vertical_singular,
)

for kernel in (cylinder_indicator(1.0), mollifier_over_norm_p(2.0),
               gaussian_separable(), vertical_singular(0.5)):
    report = audit_hypotheses(kernel, p=2.0)
    verdict = "passes" if report.passed_all else "FAILS"
    print(f"{kernel.family}: {verdict}")
    for name, entry in report.entries.items():
        mark = "ok " if entry.passed else "BAD"
        print(f"    {mark} {name}: {entry.detail}")
