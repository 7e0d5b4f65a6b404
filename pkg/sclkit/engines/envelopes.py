"""
Recorded envelope constants.

The geometric statements behind sclkit only say "bounded by a linear function
of ..."; these are the concrete linear functions the suite asserts on
generated instances. On Cayley-tree backends delta = 0 and the quasi-axis and
projection constants collapse to exact values.
"""

# delta <= c1 * Delta + c2 (four-point delta against the bottleneck constant)
DELTA_BOTTLENECK = {"c1": 2, "c2": 2}

# epsilon <= a * Delta + b for images of (2, 10 delta + 10)-quasi-geodesics in the Manning tree
MANNING_IMAGE = {"a": 1, "b": 6}

# xi_g <= A + B * tau_g for conjugate-axis projections on free-group Cayley trees
WWPD_XI = {"A": 0, "B": 2}

# bottleneck of a promoted graph <= c * (eta + K) + c0
PROMOTION_BOTTLENECK = {"c": 1, "c0": 2}

# Hausdorff distance between quasi_axis(gamma g gamma^-1) and gamma * quasi_axis(g): a * delta + b
QUASI_AXIS_EQUIVARIANCE = {"a": 2, "b": 0}

# |diam Pi_a(b) - diam Pi_b(a)| <= a * delta + b for non-parallel family members
PROJECTION_SYMMETRY = {"a": 4, "b": 0}

# member displacement on the promoted graph of h with Pi~_g(h) <= eta: a * (delta + xi + 1) + b
PROMOTED_DISPLACEMENT = {"a": 2, "b": 0}

# defect of the homogenization: D(H^) <= 4 D(H)
HOMOGENIZED_DEFECT_FACTOR = 4

# Manning quotient: 8 Delta d_T - 16 Delta <= d_Q <= 26 Delta d_T, with R = 20 Delta
MANNING = {"R_factor": 20, "lower_slope": 8, "lower_offset": 16, "upper_slope": 26, "rescale": 8}


def envelope_value(envelope: dict, *xs: int) -> int:
    """Evaluate a recorded linear envelope at the given argument(s)."""
    keys = list(envelope)
    slope, offset = envelope[keys[0]], envelope[keys[1]]
    return slope * sum(xs) + offset
