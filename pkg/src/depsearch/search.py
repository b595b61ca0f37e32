"""Task-agnostic learning-to-search engine.

A task is any object with a ``run(session, instance)`` method that issues
``session.predict(...)`` calls and finishes with exactly one
``session.loss(...)``.  The engine re-runs that decoder under different
policies: a *rollin* policy produces the trajectory, every step of which is
then deviated to each allowed alternative and completed by a *rollout*
policy.  The resulting terminal losses become cost-sensitive examples for the
base learner.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .features import FeatureVector, combine, hash32
from .learners import ConfigurationError, CostSensitiveExample, PolicyModel, cs_predict

log = logging.getLogger(__name__)

REFERENCE = "reference"
LEARNED = "learned"
MIXTURE = "mixture"
MODES = (REFERENCE, LEARNED, MIXTURE)

HISTORY_NAMESPACE = "hist"
_HISTORY_SALT = hash32("history")


class TaskContractError(RuntimeError):
    """The decoder broke the predict/loss protocol."""


class SearchTask(Protocol):
    def run(self, session: "Session", instance: Any) -> Any: ...


@dataclass
class Step:
    tag: int
    role: int
    allowed: tuple[int, ...]
    reference: int
    action: int
    features: FeatureVector | None = None
    costs: Mapping[int, float] | None = None


@dataclass
class Trajectory:
    actions: list[int]
    loss: float
    output: Any
    steps: list[Step] = field(default_factory=list)


@dataclass
class RolloutRecord:
    step: int
    action: int
    loss: float


class Policy:
    needs_features = False

    def choose(self, session: "Session", role: int, allowed, reference, features) -> int:
        raise NotImplementedError


class ReferencePolicy(Policy):
    def choose(self, session, role, allowed, reference, features):
        return reference()


class LearnedPolicy(Policy):
    needs_features = True

    def __init__(self, model: PolicyModel):
        self.model = model

    def choose(self, session, role, allowed, reference, features):
        return cs_predict(self.model, role, features(), allowed)


def _lazy(value):
    if callable(value):
        cache = []

        def get():
            if not cache:
                cache.append(value())
            return cache[0]

        return get
    return lambda: value


class Session:
    """Decoder-facing handle for one execution of a task.

    Predictions ``0..len(prefix)-1`` replay ``prefix``; later ones come from
    ``policy``.  ``features``, ``reference`` and ``costs`` may be passed as
    zero-argument callables so they are only computed when needed.
    """

    def __init__(self, policy: Policy, prefix: Sequence[int] = (), record: bool = False,
                 history: int = 0):
        self.policy = policy
        self.prefix = list(prefix)
        self.record = record
        self.history = history
        self.actions: list[int] = []
        self.steps: list[Step] = []
        self._loss: float | None = None
        self._history_roles: list[int] = []

    @property
    def step(self) -> int:
        return len(self.actions)

    def _with_history(self, fv: FeatureVector) -> FeatureVector:
        if self.history <= 0:
            return fv
        past = list(zip(self._history_roles, self.actions))[-self.history:]
        hashes = []
        for back, (role, action) in enumerate(reversed(past)):
            hashes.append(combine(combine(_HISTORY_SALT + back, role), action))
        return fv.with_namespace(HISTORY_NAMESPACE, hashes)

    def predict(self, features, reference, allowed: Iterable[int], role: int = 0, costs=None) -> int:
        if self._loss is not None:
            raise TaskContractError("predict called after the loss was declared")
        allowed = tuple(sorted(allowed))
        if not allowed:
            raise TaskContractError(f"predict at step {self.step} with an empty allowed-action set")
        get_ref = _lazy(reference)
        raw_features = _lazy(features)
        get_features = _lazy(lambda: self._with_history(raw_features()))
        t = self.step
        if t < len(self.prefix):
            action = self.prefix[t]
        else:
            action = self.policy.choose(self, role, allowed, get_ref, get_features)
        if action not in allowed:
            raise TaskContractError(f"action {action} at step {t} is not among allowed {allowed}")
        if self.record:
            ref = get_ref()
            if ref not in allowed:
                raise TaskContractError(f"reference action {ref} at step {t} is not among allowed {allowed}")
            known = costs() if callable(costs) else costs
            self.steps.append(Step(t, role, allowed, ref, action, get_features(), known))
        self.actions.append(action)
        self._history_roles.append(role)
        return action

    def loss(self, value: float) -> None:
        if self._loss is not None:
            raise TaskContractError("loss declared twice")
        if value < 0 or not np.isfinite(value):
            raise TaskContractError(f"loss must be a finite non-negative number, got {value}")
        self._loss = float(value)


def run_trajectory(task: SearchTask, instance, policy: Policy, prefix: Sequence[int] = (),
                   record: bool = False, history: int = 0) -> Trajectory:
    """Run the decoder once.  ``prefix`` forces the first actions (a_1..a_{t-1}, a'_t)."""
    session = Session(policy, prefix, record, history)
    output = task.run(session, instance)
    if session._loss is None:
        raise TaskContractError("decoder finished without declaring a loss")
    if len(session.actions) < len(prefix):
        raise TaskContractError("decoder stopped before the forced prefix was consumed")
    return Trajectory(session.actions, session._loss, output, session.steps)


@dataclass
class PolicySchedule:
    """How rollin and rollout policies are drawn.

    Under ``mixture`` the reference policy is used with probability
    ``(1 - alpha) ** t`` where ``t`` counts processed training instances.
    ``increasing_reference=True`` flips that to ``1 - (1 - alpha) ** t``.
    """

    rollin: str = MIXTURE
    rollout: str = REFERENCE
    alpha: float = 1e-5
    t: int = 0
    increasing_reference: bool = False

    def __post_init__(self):
        for mode in (self.rollin, self.rollout):
            if mode not in MODES:
                raise ConfigurationError(f"unknown policy mode {mode!r}; choose from {MODES}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)")

    def reference_probability(self, mode: str | None = None) -> float:
        mode = self.rollin if mode is None else mode
        if mode == REFERENCE:
            return 1.0
        if mode == LEARNED:
            return 0.0
        decay = (1.0 - self.alpha) ** self.t
        return 1.0 - decay if self.increasing_reference else decay

    def draw(self, rng: np.random.Generator, mode: str | None = None) -> str:
        """Draw REFERENCE or LEARNED; always consumes one random number."""
        u = rng.random()
        return REFERENCE if u < self.reference_probability(mode) else LEARNED

    def advance(self) -> None:
        self.t += 1


def _policy(kind: str, model: PolicyModel) -> Policy:
    return ReferencePolicy() if kind == REFERENCE else LearnedPolicy(model)


def rollout_losses(task, instance, rollin: Trajectory, t: int, rollout_policy: Policy,
                   history: int = 0) -> list[RolloutRecord]:
    step = rollin.steps[t]
    records = []
    for a in step.allowed:
        traj = run_trajectory(task, instance, rollout_policy, rollin.actions[:t] + [a], history=history)
        records.append(RolloutRecord(t, a, traj.loss))
    return records


def collect_deviations(task: SearchTask, instance, rollin: Trajectory, rollout_policy: Policy | Callable[[], Policy],
                       every: int = 1, analytic: bool = False, history: int = 0) -> list[CostSensitiveExample]:
    """One cost-sensitive example per deviated rollin step.

    ``rollout_policy`` may be a callable returning a fresh policy per rollout
    (used for mixture rollouts).  With ``analytic=True`` a step that carries
    task-supplied costs uses them instead of re-running the decoder; this is
    only exact when the rollout policy is an optimal reference.
    """
    if every < 1:
        raise ConfigurationError("deviation stride must be >= 1")
    pick = rollout_policy if callable(rollout_policy) and not isinstance(rollout_policy, Policy) else (lambda: rollout_policy)
    examples = []
    for t, step in enumerate(rollin.steps):
        if t % every:
            continue
        if analytic and step.costs is not None:
            raw = dict(step.costs)
            if set(raw) != set(step.allowed):
                raise TaskContractError(f"analytic costs at step {t} do not cover the allowed actions")
        else:
            raw = {r.action: r.loss for r in rollout_losses(task, instance, rollin, t, pick(), history)}
        low = min(raw.values())
        costs = {a: float(c - low) for a, c in raw.items()}
        examples.append(CostSensitiveExample(step.features, costs, step.role, step.reference))
    return examples


@dataclass
class PassStats:
    epoch: int
    instances: int
    mean_loss: float
    examples: int
    reference_probability: float
    rounds: int = 0


def train(task: SearchTask, dataset: Sequence, passes: int, schedule: PolicySchedule, model: PolicyModel,
          seed: int = 0, every: int = 1, analytic: bool = False, history: int = 1,
          shuffle: bool = False, on_pass: Callable[[PassStats], None] | None = None) -> PolicyModel:
    """Train ``model`` in place and return it."""
    if not dataset:
        raise ConfigurationError("training set is empty")
    if passes < 1:
        raise ConfigurationError("passes must be >= 1")
    rng = np.random.default_rng(seed)
    order = np.arange(len(dataset))
    for epoch in range(1, passes + 1):
        if shuffle:
            rng.shuffle(order)
        total_loss = 0.0
        n_examples = 0
        for i in order:
            instance = dataset[int(i)]
            rollin_kind = schedule.draw(rng)
            rollin = run_trajectory(task, instance, _policy(rollin_kind, model), record=True, history=history)
            total_loss += rollin.loss

            def rollout():
                return _policy(schedule.draw(rng, schedule.rollout), model)

            examples = collect_deviations(task, instance, rollin, rollout, every, analytic, history)
            for ex in examples:
                model.update(ex)
            n_examples += len(examples)
            schedule.advance()
        stats = PassStats(epoch, len(order), total_loss / len(order), n_examples, schedule.reference_probability(),
                          schedule.t)
        log.info("pass %d: mean rollin loss %.4f over %d instances, %d examples, t=%d P(reference)=%.6f",
                 epoch, stats.mean_loss, stats.instances, stats.examples, schedule.t, stats.reference_probability)
        if on_pass is not None:
            on_pass(stats)
    return model


def decode(task: SearchTask, instance, model: PolicyModel, history: int = 1) -> tuple[list[int], Any]:
    traj = run_trajectory(task, instance, LearnedPolicy(model), history=history)
    return traj.actions, traj.output
