"""Published reference numbers for side-by-side comparison plots.

Mean estimation error and its spread for the 10-dimensional experiments
(p = q = 5) keyed by setting, method and per-environment sample size, plus
the 2-D comparison.  These values were not computed by this package.
"""

SIZES = (20, 100, 250, 500, 750, 1000)

# setting -> method -> tuple of (mean, spread) aligned with SIZES
TEN_DIM = {
    "F-HET": {
        "IRM": ((2.72, 0.53), (0.96, 0.17), (0.59, 0.10), (0.90, 0.09), (0.54, 0.10), (0.51, 0.11)),
        "ICP": ((4.85, 0.10), (3.46, 0.37), (0.42, 0.21), (0.01, 0.001), (0.005, 0.0001), (0.002, 0.0003)),
        "ERM": ((2.82, 0.49), (1.16, 0.06), (1.12, 0.05), (1.17, 0.03), (1.09, 0.03), (1.12, 0.03)),
        "C-LRG": ((7.96, 0.67), (7.98, 0.59), (1.11, 0.05), (0.65, 0.04), (0.42, 0.02), (0.43, 0.02)),
    },
    "P-HET": {
        "IRM": ((2.48, 0.34), (1.28, 0.20), (0.95, 0.16), (1.01, 0.11), (0.85, 0.15), (0.88, 0.14)),
        "ICP": ((5.00, 0.00), (3.49, 0.56), (2.33, 0.69), (3.01, 0.77), (2.01, 0.77), (2.50, 0.79)),
        "ERM": ((3.59, 0.51), (1.37, 0.10), (1.22, 0.07), (1.33, 0.09), (1.18, 0.05), (1.19, 0.05)),
        "C-LRG": ((9.31, 0.87), (9.86, 1.08), (1.23, 0.08), (0.89, 0.09), (0.53, 0.04), (0.55, 0.03)),
    },
    "F-HOM": {
        "IRM": ((3.89, 0.50), (3.06, 0.12), (2.83, 0.06), (3.21, 0.09), (2.99, 0.04), (3.04, 0.06)),
        "ICP": ((5.02, 0.02), (7.91, 0.46), (7.95, 0.47), (6.50, 0.58), (5.00, 0.00), (5.00, 0.00)),
        "ERM": ((4.82, 0.57), (4.35, 0.12), (4.29, 0.12), (4.45, 0.05), (4.47, 0.04), (4.51, 0.07)),
        "C-LRG": ((6.14, 0.66), (4.22, 0.55), (3.52, 0.24), (0.38, 0.05), (0.05, 0.008), (0.03, 0.003)),
    },
    "P-HOM": {
        "IRM": ((4.03, 0.41), (3.39, 0.32), (2.95, 0.09), (3.02, 0.09), (2.81, 0.10), (2.88, 0.06)),
        "ICP": ((5.38, 0.14), (6.55, 0.52), (5.00, 0.00), (5.00, 0.00), (5.00, 0.00), (5.00, 0.00)),
        "ERM": ((4.57, 0.69), (4.25, 0.17), (4.10, 0.18), (4.54, 0.13), (4.39, 0.09), (4.35, 0.12)),
        "C-LRG": ((8.03, 0.56), (6.24, 0.77), (3.27, 0.26), (0.56, 0.09), (0.08, 0.009), (0.05, 0.009)),
    },
}

# method -> (fitted model, error) for the 2-D F-HOM comparison
TWO_DIM = {
    "ORACLE": ((1.0, 0.0), 0.0),
    "ULRG": ((0.34, 0.67), 0.88),
    "CLRG_SGD(w_sup=2)": ((0.95, 0.05), 0.005),
    "CLRG_SGD(w_sup=5)": ((0.95, 0.04), 0.005),
    "RINF_LRG": ((0.33, 0.65), 0.87),
    "R2_LRG": ((0.33, 0.63), 0.83),
    "ERM": ((0.34, 0.67), 0.88),
    "IRM": ((0.63, 0.44), 0.33),
    "ICP": ((0.0, 0.0), 1.0),
}


def ten_dim_series(setting: str, method: str) -> list:
    """``[(n, mean, spread), ...]`` for one setting and method, or ``[]``."""
    rows = TEN_DIM.get(setting.upper(), {}).get(method, ())
    return [(n, m, s) for n, (m, s) in zip(SIZES, rows)]
