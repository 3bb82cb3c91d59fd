import numpy as np
import pytest

from aumcf import ArmDataset, StudyDataset, SubjectHistory


def random_arm(rng, n=30, arm=1, event_rate=1.0, death_rate=0.3,
               censor_rate=0.3, horizon=10.0, n_cov=0, n_types=1):
    """Small ad-hoc recurrent-event arm for property tests.

    Independent homogeneous processes; not tied to the simulation module
    so the two generators can cross-check each other.
    """
    subjects = []
    for i in range(n):
        death = rng.exponential(1 / death_rate) if death_rate > 0 else np.inf
        censor = rng.exponential(1 / censor_rate) if censor_rate > 0 else np.inf
        x = min(death, censor, horizon)
        terminal = death <= min(censor, horizon)
        events, t = [], 0.0
        while event_rate > 0:
            t += rng.exponential(1 / event_rate)
            if t > x:
                break
            events.append(t)
        types = tuple(int(k) for k in rng.integers(0, n_types, len(events)))
        cov = tuple(rng.standard_normal(n_cov)) if n_cov else ()
        subjects.append(SubjectHistory(
            subject_id=f"a{arm}s{i}", follow_up=x, terminal=terminal,
            event_times=tuple(events), event_types=types, covariates=cov,
        ))
    return ArmDataset(arm, subjects)


def random_study(rng, tau=3.0, n=30, n_cov=0, **kw):
    a1 = random_arm(rng, n=n, arm=1, n_cov=n_cov, **kw)
    a2 = random_arm(rng, n=n, arm=2, n_cov=n_cov, **kw)
    names = tuple(f"w{k+1}" for k in range(n_cov))
    return StudyDataset(a1, a2, tau=tau, covariate_names=names)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture
def toy_arm():
    # 3-subject worked example: theta(tau=12) = 26/3
    return ArmDataset(1, [
        SubjectHistory("s1", 10.0, True, (2.0, 5.0)),
        SubjectHistory("s2", 8.0, False, (3.0,)),
        SubjectHistory("s3", 12.0, False, ()),
    ])
