"""Shared fixtures: the Van der Pol case study at full and reduced scale."""
import time
from dataclasses import dataclass

import numpy as np
import pytest

from koopgen import apps, edmd
from koopgen.datagen import GenConfig, SamplePlan, generate
from koopgen.dictionary import monomials_2d
from koopgen.dynamics import Flow, vanderpol

BOX = ((-1.0, 1.0), (-1.0, 1.0))


@dataclass
class Study:
    flow: Flow
    d: object
    plan: SamplePlan
    ts: object
    gm: edmd.GeneratorMatrix
    km: edmd.KoopmanMatrix
    free: apps.IdentificationReport
    base: apps.IdentificationReport
    cand: apps.LyapunovCandidate
    verdict: apps.Verdict
    seconds: float


def run_study(per_axis: int, lam: float, tau: float = 1.0, s: float = 0.5) -> Study:
    start = time.perf_counter()
    flow = Flow(vanderpol())
    d = monomials_2d(3, 2)
    plan = SamplePlan(BOX, per_axis)
    ts = generate(flow, d, plan, GenConfig(lam, tau))
    gm = edmd.fit_generator(ts)
    km = edmd.fit_koopman(flow, d, plan, s)
    vf = vanderpol()
    free = apps.identify_field(gm, d, vf=vf, domain=BOX)
    base = apps.identify_field_log_baseline(km, d, vf=vf, domain=BOX)
    cand = apps.fit_lyapunov(gm, d, plan)
    verdict = apps.verify_candidate(cand, gm, d, plan)
    return Study(flow, d, plan, ts, gm, km, free, base, cand, verdict,
                 time.perf_counter() - start)


@pytest.fixture(scope="session")
def vdp_full():
    """M = 100^2 grid on (-1, 1)^2, monomials i <= 3, j <= 2, tau = 1, lambda = 1e6."""
    return run_study(100, 1e6)


@pytest.fixture(scope="session")
def vdp_quick():
    return run_study(30, 1e4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
