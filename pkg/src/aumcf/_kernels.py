"""Hot inner loops with optional numba acceleration.

The active backend is chosen once per call from the ``AUMCF_BACKEND``
environment variable: ``"numba"`` (default when numba imports) or
``"numpy"`` for the pure-vectorized fallback. Both paths produce bitwise
comparable results up to floating-point summation order.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


BACKEND_ENV = "AUMCF_BACKEND"


def active_backend() -> str:
    """Resolve the backend name from the environment."""
    choice = os.environ.get(BACKEND_ENV, "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("AUMCF_BACKEND=numba but numba is not installed")
        return "numba"
    if choice:
        raise RuntimeError(f"unknown {BACKEND_ENV} value {choice!r}")
    return "numba" if HAS_NUMBA else "numpy"


def influence_accumulate(x, te, cum_event, ev_subj, ev_w, td, cum_death, obs_death):
    """Per-subject influence values from precomputed jump-level weights.

    Parameters
    ----------
    x : (n,) follow-up times.
    te : (k_e,) event jump times <= tau, ascending.
    cum_event : (k_e,) prefix sums of the event compensator mass
        w(u) * dR(u) with w(u) = (tau - u) S(u) n / Ybar(u).
    ev_subj, ev_w : (m,) subject index and weight w(u) of each observed
        event with time <= tau.
    td : (k_d,) death jump times <= tau, ascending.
    cum_death : (k_d,) prefix sums of the death compensator mass
        B(u) (n / Ybar(u)) dLambda(u).
    obs_death : (n,) observed terminal-event mass, zero for subjects
        without an observed terminal event by tau.

    Returns
    -------
    (n,) array of influence values.
    """
    if active_backend() == "numba":
        return _influence_accumulate_numba(
            x, te, cum_event, ev_subj, ev_w, td, cum_death, obs_death
        )
    return _influence_accumulate_numpy(
        x, te, cum_event, ev_subj, ev_w, td, cum_death, obs_death
    )


def _influence_accumulate_numpy(x, te, cum_event, ev_subj, ev_w, td, cum_death, obs_death):
    n = x.shape[0]
    obs_event = np.zeros(n)
    np.add.at(obs_event, ev_subj, ev_w)
    comp_event = _prefix_at(cum_event, te, x)
    comp_death = _prefix_at(cum_death, td, x)
    return (obs_event - comp_event) - (obs_death - comp_death)


def _prefix_at(cum, knots, x):
    """Prefix-sum value of masses at knots <= x (closed inequality)."""
    if knots.size == 0:
        return np.zeros_like(x)
    idx = np.searchsorted(knots, x, side="right")
    padded = np.concatenate(([0.0], cum))
    return padded[idx]


@njit(cache=True)
def _influence_accumulate_numba(x, te, cum_event, ev_subj, ev_w, td, cum_death, obs_death):  # pragma: no cover - numba path
    n = x.shape[0]
    psi = np.zeros(n)
    for k in range(ev_subj.shape[0]):
        psi[ev_subj[k]] += ev_w[k]
    for i in range(n):
        xi = x[i]
        j = np.searchsorted(te, xi, side="right")
        if j > 0:
            psi[i] -= cum_event[j - 1]
        j = np.searchsorted(td, xi, side="right")
        comp_death = cum_death[j - 1] if j > 0 else 0.0
        psi[i] -= obs_death[i] - comp_death
    return psi
