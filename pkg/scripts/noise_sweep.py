"""Atomic F-score of the reference rules as tracking noise grows.

    python3 scripts/noise_sweep.py --sigmas 0 0.05 0.1 0.2 0.3 --smooth 1 9
"""

import argparse
from dataclasses import replace

import numpy as np

from soccer_cep.atomic import REFERENCE_PARAMS, RULES
from soccer_cep.scenario import NoiseSpec, add_noise, generate_scenario, scenario_suite
from soccer_cep.tuning import AtomicObjective, gene_space


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.2, 0.3])
    ap.add_argument("--smooth", type=int, nargs="+", default=[1, 9])
    ap.add_argument("--scenarios", type=int, default=56)
    ap.add_argument("--seed", type=int, default=1)
    a = ap.parse_args()

    clean = [generate_scenario(s) for s in scenario_suite(a.scenarios, seed=a.seed)]
    print(f"{'sigma':>6} {'smooth':>6} " + " ".join(f"{r:>15}" for r in RULES) + f" {'macro':>7}")
    for sigma in a.sigmas:
        rng = np.random.default_rng(a.seed)
        traces = [add_noise(t, NoiseSpec(sigma), rng) for t, _ in clean]
        for smooth in a.smooth:
            obj = AtomicObjective(traces, [log for _, log in clean], gene_space(), smooth)
            f = obj.counts(replace(REFERENCE_PARAMS, smooth=smooth)).f_score()
            print(f"{sigma:6.2f} {smooth:6d} " + " ".join(f"{v:15.3f}" for v in f) + f" {f.mean():7.3f}")


if __name__ == "__main__":
    main()
