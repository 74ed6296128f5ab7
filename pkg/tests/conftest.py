import numpy as np

from condinfer.testing import ThresholdSpec


def random_correlation(m, rng):
    a = rng.standard_normal((m, m + 2))
    c = a @ a.T
    d = np.sqrt(np.diag(c))
    return c / np.outer(d, d)


def random_spec(m, rng, families=("holm", "bonferroni", "sidak_holm", "bh", "by", "fixed")):
    family = families[int(rng.integers(len(families)))]
    sided = ["one", "two"][int(rng.integers(2))]
    level = float(rng.uniform(0.05, 0.2))
    if family == "fixed":
        procedure = ["step_down", "step_up"][int(rng.integers(2))]
        base = np.sort(rng.uniform(0.8, 3.0, size=m))
        table = tuple(base[::-1]) if procedure == "step_down" else tuple(base)
        return ThresholdSpec("fixed", level, m, sided, table=table, procedure=procedure)
    if family == "fdp":
        return ThresholdSpec("fdp", level, m, sided, gamma=float(rng.uniform(0.0, 0.5)))
    return ThresholdSpec(family, level, m, sided)


def random_selected_instance(rng, m_lo=2, m_hi=8, families=None):
    """Draw (x, omega, spec) until the procedure selects something."""
    import condinfer as ci

    kwargs = {} if families is None else {"families": families}
    while True:
        m = int(rng.integers(m_lo, m_hi))
        spec = random_spec(m, rng, **kwargs)
        omega = random_correlation(m, rng)
        mu = rng.normal(0.0, 2.0, size=m)
        chol = np.linalg.cholesky(omega + 1e-12 * np.eye(m))
        x = mu + chol @ rng.standard_normal(m)
        outcome = ci.select(x, spec)
        if outcome.significant_set:
            return x, omega, spec, outcome
