"""Acceptance suite: fourteen criteria, each a bundle of experiment reports.

Parameters are the stated desk-scale settings; a criterion passes when every
check in every one of its reports passes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import bandlab, dbm, gapstats, locallaw, loggas, spectral


@dataclass
class CriterionResult:
    number: int
    title: str
    reports: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    @property
    def checks(self):
        return [c for r in self.reports for c in r.checks]

    def line(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        n_ok = sum(c.passed for c in self.checks)
        return f"{state} criterion {self.number:2d} {self.title}: {n_ok}/{len(self.checks)} checks ({self.wall_clock:.1f}s)"


def c01(seed, threads):
    return [locallaw.identities_experiment(N=50, samples=10, seed=seed)]


def c02(seed, threads):
    return [spectral.semicircle_experiment(N=2000, samples=5, seed=seed)]


def c03(seed, threads):
    return [locallaw.lsc_scaling_experiment((250, 500, 1000, 2000), E=0.0, eta_exponent=0.8, samples=20,
                                            seed=seed, threads=threads)]


def c04(seed, threads):
    return [locallaw.rigidity_experiment(N=1000, samples=20, seed=seed, threads=threads)]


def c05(seed, threads):
    return [locallaw.delocalization_experiment(N=(500, 1000, 2000), samples=1, seed=seed, threads=threads)]


def c06(seed, threads):
    return [locallaw.fluctuation_averaging_experiment(N=1000, eta_exponents=(0.7, 0.6, 0.5, 0.4), samples=100,
                                                      gate_exponent=0.5, seed=seed, threads=threads)]


def c07(seed, threads):
    return [gapstats.surmise_experiment(n2_samples=100_000, N=1000, samples=20, seed=seed, threads=threads)]


def c08(seed, threads):
    return [gapstats.sine_experiment(N=1000, samples=20, seed=seed, threads=threads)]


def c09(seed, threads):
    return [dbm.relaxation_experiment("bernoulli", N=500, samples=50, seed=seed, threads=threads),
            dbm.two_particle_experiment(beta=1, seed=seed),
            dbm.two_particle_experiment(beta=2, seed=seed)]


def c10(seed, threads):
    return [gapstats.law_comparison_experiment("three-point", "gaussian", N=500, samples=50, seed=seed,
                                               threads=threads)]


def c11(seed, threads):
    return [loggas.cross_validation_experiment(beta=2, N=8, samples=10_000, seed=seed),
            loggas.small_n_oracle_experiment(betas=(1, 2), seed=seed)]


def c12(seed, threads):
    return [loggas.level_repulsion_experiment(beta=1, N=200, size=8, seed=seed),
            loggas.level_repulsion_experiment(beta=2, N=200, size=8, seed=seed)]


def c13(seed, threads):
    return [loggas.gap_universality_experiment(beta=1, N=500, size=17, seed=seed, threads=threads)]


def c14(seed, threads):
    return [bandlab.figure1_report(W=16, ratio=25, ks=(1, 2, 3, 4, 5), E=0.0, samples=400, seed=seed,
                                   threads=threads)]


CRITERIA = {
    1: ("exact identities", c01),
    2: ("semicircle histogram", c02),
    3: ("local-law scaling", c03),
    4: ("rigidity", c04),
    5: ("delocalization", c05),
    6: ("fluctuation averaging", c06),
    7: ("Wigner surmise", c07),
    8: ("sine-kernel pair correlation", c08),
    9: ("DBM universality", c09),
    10: ("four-moment matching", c10),
    11: ("beta-ensemble cross-validation", c11),
    12: ("level repulsion", c12),
    13: ("local gap universality", c13),
    14: ("band diffusion profile", c14),
}


def run_criterion(number: int, seed: int = 0, threads: int = 1) -> CriterionResult:
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    reports = fn(seed, threads)
    return CriterionResult(number, title, reports, time.perf_counter() - t0)


def run_suite(seed: int = 0, threads: int = 1, out=None, only=None, verbose: bool = True):
    """Run the criteria in order and print one PASS/FAIL line for each."""
    results = []
    for number in sorted(CRITERIA if only is None else only):
        res = run_criterion(number, seed, threads)
        results.append(res)
        if verbose:
            print(res.line(), flush=True)
            for c in res.checks:
                if not c.passed:
                    print("    " + c.line(), flush=True)
        if out is not None:
            for i, r in enumerate(res.reports):
                r.write(f"{out}/criterion{number:02d}/{i}")
    if verbose:
        n_ok = sum(r.passed for r in results)
        print(f"{n_ok}/{len(results)} criteria passed")
    return results
