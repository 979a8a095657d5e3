"""Per-seed spread of discounted averages along the confined posterior chain.

Compares the empirical spread of the per-seed Abel averages with the exact
variance for a stationary two-state chain and reports how likely it is that
every seed lands within a given tolerance of the target.
"""
import argparse
import json

import numpy as np
from scipy.stats import norm

from markov_persuasion import confined_chain_construction, ergodic_check
from markov_persuasion.commands import Context, _confined_certificate, _jsonable
from markov_persuasion.scenario import PRESETS


def exact_abel_variance(pay, P, nu, lam):
    """Variance of ``(1 - lam) sum lam^(n-1) a_n`` for a stationary two-state chain."""
    sigma2 = float(nu @ pay**2 - (nu @ pay) ** 2)
    rho = float(np.trace(P) - 1.0)               # second eigenvalue
    return sigma2 * (1 - lam) / (1 + lam) * (1 + rho * lam) / (1 - rho * lam)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="example1-M2")
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--tol", type=float, default=0.015)
    args = ap.parse_args()
    ctx = Context(PRESETS[args.scenario])
    chain = confined_chain_construction(_confined_certificate(ctx), ctx.M)
    rep = ergodic_check(chain, ctx.u, args.steps, range(args.seeds), lambdas=(0.999,))
    pay = np.asarray(ctx.u(chain.Q), dtype=float)
    a = rep.abel[0.999]
    res = {"target": rep.target, "cesaro_max_deviation": rep.max_cesaro_deviation(),
           "abel_mean_deviation": rep.abel_deviation(0.999)[0],
           "abel_max_deviation": rep.abel_deviation(0.999)[1],
           "abel_sd_empirical": float(a.std(ddof=1))}
    if len(chain.nu) == 2:
        sd = float(np.sqrt(exact_abel_variance(pay, chain.W_R, chain.nu, 0.999)))
        p_one = float(2 * norm.cdf(args.tol / sd) - 1)
        res.update({"abel_sd_exact": sd, "p_one_seed_within_tol": p_one,
                    "p_all_seeds_within_tol": p_one**args.seeds})
    print(json.dumps(_jsonable(res), indent=2))


if __name__ == "__main__":
    main()
