"""Transfer student: trust-gated fusion of self-experience and teacher advice.

Each step produces two signals: the student's own TD error, and a teacher
term combining the distilled value of any automaton edge just crossed with a
policy-matching gradient on the taken action. A per-pair volatility trace
(EWMA of |TD error|) drives a sigmoid gate deciding how much weight the
teacher term gets: volatile regions lean on the teacher, settled regions on
the student's own signal. Scalar helpers here are the reference definitions;
the kernels run the same expressions and are pinned to them by tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .automaton import ProductState
from .envs.tables import compile_env
from .kernels import run_training
from .tabular import LearningParams, QTable, softmax_policy
from .teacher import dense_knowledge

VARIANTS = ("cadent", "ad", "pd", "no_transfer", "no_trust_gate",
            "fixed_trust")

VARIANT_ALIASES = {
    "none": "no_transfer",
    "ad_only": "ad",
    "pd_only": "pd",
    "fixed-trust": "fixed_trust",
}


@dataclass(frozen=True)
class TrustParams:
    eta: float = 0.1      # volatility EWMA rate
    k: float = 10.0       # gate steepness
    theta: float = 0.5    # gate midpoint
    v_init: float = 0.0   # optimistic start: trust own signal until proven noisy

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValueError("eta must be in (0, 1]")
        if self.k <= 0.0:
            raise ValueError("k must be positive")
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        if self.v_init < 0.0:
            raise ValueError("v_init must be non-negative")

    def to_json(self):
        return {"eta": self.eta, "k": self.k, "theta": self.theta,
                "v_init": self.v_init}

    @classmethod
    def from_json(cls, payload):
        return cls(**payload)


@dataclass(frozen=True)
class GuidanceParams:
    lambda_ad: float = 1.0
    lambda_pd: float = 0.5

    def __post_init__(self):
        if self.lambda_ad < 0.0 or self.lambda_pd < 0.0:
            raise ValueError("guidance weights must be non-negative")

    def to_json(self):
        return {"lambda_ad": self.lambda_ad, "lambda_pd": self.lambda_pd}

    @classmethod
    def from_json(cls, payload):
        return cls(**payload)


@dataclass(frozen=True)
class StudentConfig:
    """Full hyperparameter bundle for one training variant."""

    learn: LearningParams = field(default_factory=LearningParams)
    trust: TrustParams = field(default_factory=TrustParams)
    guide: GuidanceParams = field(default_factory=GuidanceParams)
    variant: str = "cadent"
    omega0: float = 0.5   # fixed gate value for the fixed_trust family

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not (0.0 <= self.omega0 <= 1.0):
            raise ValueError("omega0 must be in [0, 1]")
        if self.variant == "ad" and self.guide.lambda_pd != 0.0:
            raise ValueError("ad variant requires lambda_pd == 0")
        if self.variant == "pd" and self.guide.lambda_ad != 0.0:
            raise ValueError("pd variant requires lambda_ad == 0")
        if self.variant == "no_transfer" and (
                self.guide.lambda_ad != 0.0 or self.guide.lambda_pd != 0.0):
            raise ValueError("no_transfer variant requires zero guidance "
                             "weights")
        if self.variant == "no_trust_gate" and self.omega0 != 0.5:
            raise ValueError("no_trust_gate variant pins omega0 to 0.5")

    def with_(self, **kw):
        return replace(self, **kw)

    def kernel_flags(self):
        """(use_gate, omega_fixed, use_guidance) for this variant."""
        if self.variant in ("cadent", "ad", "pd"):
            return True, 0.0, True
        if self.variant == "no_transfer":
            return False, 1.0, False
        return False, self.omega0, True  # no_trust_gate / fixed_trust

    def to_json(self):
        return {
            "learn": self.learn.to_json(),
            "trust": self.trust.to_json(),
            "guide": self.guide.to_json(),
            "variant": self.variant,
            "omega0": self.omega0,
        }

    @classmethod
    def from_json(cls, payload):
        return cls(
            learn=LearningParams.from_json(payload["learn"]),
            trust=TrustParams.from_json(payload["trust"]),
            guide=GuidanceParams.from_json(payload["guide"]),
            variant=payload.get("variant", "cadent"),
            omega0=payload.get("omega0", 0.5),
        )


@dataclass
class Diagnostics:
    """Mutable counters surfaced by guidance ops and training runs."""

    novel_transitions: int = 0
    max_abs_update: float = 0.0
    soft_violations: int = 0
    soft_violation_steps: list = field(default_factory=list)


def volatility_update(v, delta, eta):
    """EWMA of |TD error|; the volatility trace after observing delta."""
    return (1.0 - eta) * v + eta * abs(delta)


class VolatilityTracker:
    """Sparse per-(state, action) volatility with a uniform initial value."""

    def __init__(self, v_init=0.0, eta=0.1):
        self.v_init = float(v_init)
        self.eta = float(eta)
        self._data = {}

    def get(self, state, action):
        return self._data.get((state, action), self.v_init)

    def update(self, state, action, delta):
        v = volatility_update(self.get(state, action), delta, self.eta)
        self._data[(state, action)] = v
        return v

    def items(self):
        return self._data.items()

    def __len__(self):
        return len(self._data)


def trust_gate(v, k, theta):
    """Sigmoid weight on the student's own signal: 1 / (1 + exp(k(v-theta))).

    Low volatility, high self-trust. Evaluated through the exp of a
    non-positive argument so arbitrarily large |v - theta| cannot overflow;
    v == theta gives exactly 0.5.
    """
    x = k * (v - theta)
    if x > 0.0:
        z = math.exp(-x)
        return z / (1.0 + z)
    return 1.0 / (1.0 + math.exp(x))


def strategic_reward(knowledge, q, q_next, lambda_ad, diagnostics=None):
    """Scaled distilled value of the automaton edge just crossed.

    Zero without automaton progress. An edge the teacher never observed
    contributes zero and bumps the novel-transition counter: the student is
    off the teacher's map there.
    """
    if q_next == q:
        return 0.0
    value = knowledge.q_ad.get((q, q_next))
    if value is None:
        if diagnostics is not None:
            diagnostics.novel_transitions += 1
        return 0.0
    return lambda_ad * value


def tactical_gradient(knowledge, q, q_row, action, lambda_pd):
    """Policy-matching pull on the taken action.

    Compares the teacher's abstract policy at q with the student's softmax
    (temperature 1) over its own Q row. Zero when q is outside the distilled
    policy's domain. Bounded by lambda_pd in absolute value.
    """
    probs = knowledge.pi.get(q)
    if probs is None:
        return 0.0
    student = softmax_policy(q_row, 1.0)
    return lambda_pd * (probs[action] - student[action])


def fused_update(omega, delta_student, r_ad, g_pd):
    """Gate-weighted blend of self-experience and teacher terms."""
    return omega * delta_student + (1.0 - omega) * (r_ad + g_pd)


def update_bound(gamma, r_max, lambda_ad, q_ad_max, lambda_pd):
    """Worst-case |update| for any single step.

    The student term is bounded by the value-range bound r_max / (1 - gamma),
    the strategic term by lambda_ad * q_ad_max, and the tactical term by
    2 * lambda_pd (a difference of probabilities, then scaled); the gate is a
    convex combination so the sum of bounds dominates.
    """
    if not (0.0 <= gamma < 1.0):
        raise ValueError("gamma must be in [0, 1)")
    if r_max < 0.0 or q_ad_max < 0.0 or lambda_ad < 0.0 or lambda_pd < 0.0:
        raise ValueError("bound ingredients must be non-negative")
    return r_max / (1.0 - gamma) + lambda_ad * q_ad_max + 2.0 * lambda_pd


@dataclass
class StudentResult:
    """Everything a finished training run exposes."""

    qtable: QTable
    volatility: VolatilityTracker
    ep_reward: np.ndarray
    ep_steps: np.ndarray
    ep_accept: np.ndarray
    diagnostics: Diagnostics
    bound: float
    config: StudentConfig
    episodes: int
    seed: int


def train_student(env, knowledge, config, episodes, seed, stream=0,
                  backend=None, soft_cap=1024):
    """Train one student on `env` under the given variant configuration.

    `knowledge` may (and must) be None only for the no_transfer variant.
    Compatibility between the knowledge and the environment's automaton and
    action set is checked before any step runs. Update magnitudes are
    monitored against the analytic bound; non-finite updates raise.
    """
    if episodes <= 0:
        raise ValueError("episodes must be positive")
    use_gate, omega_fixed, use_guidance = config.kernel_flags()
    if use_guidance and knowledge is None:
        raise ValueError(f"variant {config.variant!r} requires teacher "
                         f"knowledge")
    if not use_guidance and knowledge is not None:
        raise ValueError("no_transfer must not receive teacher knowledge")
    tables = compile_env(env)
    cdfa = env.dfa.compiled()
    dense = None
    q_ad_max = 0.0
    if knowledge is not None:
        dense = dense_knowledge(knowledge, env.dfa, tables.n_actions)
        q_ad_max = knowledge.q_ad_max()
    r_max = float(np.abs(tables.reward).max())
    bound = update_bound(config.learn.gamma, r_max,
                         config.guide.lambda_ad if use_guidance else 0.0,
                         q_ad_max,
                         config.guide.lambda_pd if use_guidance else 0.0)
    res = run_training(
        tables, cdfa, dense,
        alpha=config.learn.alpha, gamma=config.learn.gamma,
        eps_start=config.learn.epsilon_start,
        eps_end=config.learn.epsilon_end,
        eps_decay=config.learn.epsilon_decay,
        eta=config.trust.eta, gate_k=config.trust.k,
        theta=config.trust.theta, v_init=config.trust.v_init,
        lam_ad=config.guide.lambda_ad, lam_pd=config.guide.lambda_pd,
        use_gate=use_gate, omega_fixed=omega_fixed,
        use_guidance=use_guidance,
        episodes=episodes, max_steps=env.max_steps,
        seed=seed, stream=stream, bound=bound, soft_cap=soft_cap,
        backend=backend)
    qtable, vol = _sparse_student(env, tables, cdfa, res, config)
    diag = Diagnostics(
        novel_transitions=res.novel_transitions,
        max_abs_update=float(res.max_abs_update),
        soft_violations=res.n_soft_violations,
        soft_violation_steps=[int(x) for x in res.soft_violation_steps],
    )
    return StudentResult(qtable=qtable, volatility=vol,
                         ep_reward=res.ep_reward, ep_steps=res.ep_steps,
                         ep_accept=res.ep_accept, diagnostics=diag,
                         bound=bound, config=config, episodes=episodes,
                         seed=seed)


def _sparse_student(env, tables, cdfa, res, config):
    """Exact sparse tables from dense kernel output via the visit mask."""
    n_q = cdfa.delta.shape[0]
    q_names = list(env.dfa.states)
    qtable = QTable(tables.n_actions)
    vol = VolatilityTracker(v_init=config.trust.v_init, eta=config.trust.eta)
    use_gate = config.kernel_flags()[0]
    touched = np.argwhere(res.counts > 0)
    for pid, a in touched:
        pid, a = int(pid), int(a)
        s_idx, q_idx = divmod(pid, n_q)
        key = ProductState(tables.states[s_idx], q_names[q_idx])
        qtable.set(key, a, res.q[pid, a])
        if use_gate:
            vol._data[(key, a)] = float(res.vol[pid, a])
    return qtable, vol
