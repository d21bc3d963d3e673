"""Scheduler estimators with a scikit-learn style interface.

Each scheduler is fitted on a :class:`~mimosched.network.NetworkInstance`
and exposes the resulting assignment as ``schedule_``. Hyperparameters live
in ``__init__`` so ``get_params``/``set_params``/``clone`` work for sweeps::

    >>> est = BCDScheduler(rho=100.0).fit(instance)
    >>> est.score(instance)            # exact-rate ESR in nats
"""

from __future__ import annotations

import time

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .baselines import MshsConfig, SusConfig, mshs_schedule, sus_schedule
from .bcd import BcdConfig, bcd_schedule, default_rho, exhaustive_schedule
from .rates import Schedule, surrogate_objective
from .validation import check_instance, check_qos_targets


class SchedulerMixin:
    """``fit_predict`` / ``predict`` / ``score`` on top of a ``fit`` that sets ``schedule_``."""

    def predict(self, instance=None):
        check_is_fitted(self, "schedule_")
        return self.schedule_.b

    def fit_predict(self, instance, y=None):
        return self.fit(instance).schedule_.b

    def score(self, instance, y=None) -> float:
        """Effective sum rate of the fitted schedule under exact EZF rates."""
        check_is_fitted(self, "schedule_")
        return instance.metrics(self.schedule_.b)["esr"]

    def _finish(self, instance, b, started):
        self.schedule_ = Schedule.from_array(b, instance.association)
        self.runtime_ = time.perf_counter() - started
        return self


class BCDScheduler(SchedulerMixin, BaseEstimator):
    """Penalty-based coordinate descent on the surrogate objective.

    Parameters
    ----------
    rho : float or None
        QoS penalty weight; None picks ``10 * max psi / min Q``.
    max_iters : int
        Maximum number of full sweeps.
    init : {"zero", "one", "random"}
    tol : float
        Stop once a sweep improves the objective by less than this (nats).
    random_state : int
        Seed for ``init="random"``.
    """

    def __init__(self, rho=None, max_iters=20, init="zero", tol=1e-9, random_state=0):
        self.rho = rho
        self.max_iters = max_iters
        self.init = init
        self.tol = tol
        self.random_state = random_state

    def _config(self) -> BcdConfig:
        return BcdConfig(rho=self.rho, max_iters=self.max_iters, init=self.init, tol=self.tol,
                         seed=self.random_state)

    def fit(self, instance, y=None, callback=None):
        instance = check_instance(instance)
        started = time.perf_counter()
        config = self._config()
        qos = check_qos_targets(instance.qos_targets, instance.shape[1])
        self.rho_ = default_rho(instance.coefficients, qos) if self.rho is None else float(self.rho)
        b, trace = bcd_schedule(instance.coefficients, instance.association, qos, config,
                                callback=callback)
        self.trace_ = trace
        self.n_iter_ = len(trace) - 1
        self.objective_ = trace[-1]
        return self._finish(instance, b, started)


class SUSScheduler(SchedulerMixin, BaseEstimator):
    """Semi-orthogonal user selection per BS, QoS-agnostic."""

    def __init__(self, alpha=0.5, max_layers=None):
        self.alpha = alpha
        self.max_layers = max_layers

    def fit(self, instance, y=None):
        instance = check_instance(instance)
        started = time.perf_counter()
        b = sus_schedule(instance.transceivers, instance.association,
                         SusConfig(alpha=self.alpha, max_layers=self.max_layers))
        return self._finish(instance, b, started)


class MSHSScheduler(SchedulerMixin, BaseEstimator):
    """Single UE per BS and RBG, weighted toward unmet QoS demand."""

    def __init__(self, weight_floor=1e-3):
        self.weight_floor = weight_floor

    def fit(self, instance, y=None):
        instance = check_instance(instance)
        started = time.perf_counter()
        b = mshs_schedule(instance.transceivers, instance.association, instance.qos_targets,
                          instance.rbg_exact_rates, MshsConfig(weight_floor=self.weight_floor))
        return self._finish(instance, b, started)


class ExhaustiveScheduler(SchedulerMixin, BaseEstimator):
    """Brute-force optimum of the penalized objective on tiny instances.

    ``objective="surrogate"`` maximizes the surrogate ``G``; ``"exact"``
    rebuilds EZF precoders for every candidate.
    """

    def __init__(self, rho=1.0, objective="surrogate"):
        self.rho = rho
        self.objective = objective

    def fit(self, instance, y=None):
        instance = check_instance(instance)
        started = time.perf_counter()
        b, g = exhaustive_schedule(instance.coefficients, instance.qos_targets, rho=self.rho,
                                   objective=self.objective, exact_evaluator=instance.try_exact_rates)
        self.objective_ = g
        return self._finish(instance, b, started)

    def surrogate_objective(self, instance) -> float:
        check_is_fitted(self, "schedule_")
        return surrogate_objective(self.schedule_.b, instance.coefficients, instance.qos_targets,
                                   self.rho)


SCHEDULERS = {
    "proposed": BCDScheduler,
    "sus": SUSScheduler,
    "mshs": MSHSScheduler,
    "exhaustive": ExhaustiveScheduler,
}
