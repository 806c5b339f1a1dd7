"""Memory/interference trade-off simulation.

An agent answers two yes/no questions A and B that are modelled as
projective questions on one qubit state.  Two arms are run per memory
level: A-then-B and the mirrored B-then-A.  On each trial the agent has,
with reliability ``r(m) = 1 - 2**-m``, a classical record of the context and
answers as a fixed-event-structure reasoner: both arms are drawn from the
single A-then-B joint, i.e. a mixture over recorded branches.  Otherwise it
answers from the coherent state, so the B-then-A arm follows the quantum
B-first statistics.

The observed ``P(B)`` is the first-answer marginal of the B-then-A arm; the
branch data come from the A-then-B arm.  Their mismatch is the fitted
interference term, which shrinks by a factor ``1 - r(m)`` as memory grows,
together with the order effect.  Every (seed, level) cell draws from its own
RNG stream spawned from the master seed.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._io import atomic_write_text
from .bookkeeping import mutual_information
from .intervention import (
    AMPLITUDE, InterventionModel, InterventionOp, SharedState, model_from_dict, qubit_question,
    sequential_stats,
)
from .projection import BranchData, DegenerateBranchError, extract_phase, ltp_predict
from .scenario import Behavior, Context, Observable, Scenario

CSV_COLUMNS = ("seed", "m", "I_abs", "theta", "order_effect", "I_MC")
MIN_BRANCH_WEIGHT = 1e-6
DEFAULT_LEVELS = (0, 1, 2, 3, 4, 5, 8)


def memory_reliability(m: float) -> float:
    """Default reliability knob: r(m) = 1 - 2^-m."""
    return 1.0 - 2.0 ** (-m)


@dataclass
class TradeoffConfig:
    question_pair: tuple[InterventionOp, InterventionOp]
    initial: SharedState
    memory_levels: Sequence[int] = DEFAULT_LEVELS
    trials: int = 100_000
    seed: int = 0
    noise: float = 0.0
    reliability: Callable[[float], float] = memory_reliability

    def __post_init__(self):
        self.memory_levels = [int(m) for m in self.memory_levels]
        if any(m < 0 for m in self.memory_levels):
            raise ValueError("memory levels must be >= 0")
        if list(self.memory_levels) != sorted(self.memory_levels):
            raise ValueError("memory levels must be sorted ascending")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 <= self.noise < 0.5:
            raise ValueError("noise must lie in [0, 0.5)")
        a, b = self.question_pair
        for op in (a, b):
            if op.kind != AMPLITUDE or op.n_outcomes != 2:
                raise ValueError("questions must be two-outcome amplitude interventions")
        self.model()  # dimension check

    def model(self) -> InterventionModel:
        a, b = self.question_pair
        return InterventionModel(self.initial, {"A": a, "B": b})


def default_question_pair() -> tuple[InterventionOp, InterventionOp]:
    """Computational-basis question and one rotated by 45 degrees on the Bloch sphere."""
    return qubit_question("A", 0.0), qubit_question("B", math.pi / 4)


def default_initial_state() -> SharedState:
    return SharedState(AMPLITUDE, np.array([1.0, np.exp(1j * math.pi / 3)]) / math.sqrt(2))


def default_config(**kw) -> TradeoffConfig:
    return TradeoffConfig(default_question_pair(), default_initial_state(), **kw)


def config_from_dict(doc: dict) -> TradeoffConfig:
    """``model`` (intervention model JSON with ops A and B) plus the run parameters."""
    m = model_from_dict(doc["model"])
    a_id, b_id = doc.get("question_pair", ["A", "B"])
    return TradeoffConfig(
        (m.op(a_id), m.op(b_id)), m.initial,
        memory_levels=doc.get("memory_levels", DEFAULT_LEVELS),
        trials=int(doc.get("trials", 100_000)),
        seed=int(doc.get("seed", 0)),
        noise=float(doc.get("noise", 0.0)),
    )


@dataclass
class LevelFit:
    m: int
    reliability: float
    counts_ab: np.ndarray  # (a, b) counts in the A-then-B arm
    counts_ba: np.ndarray  # (a, b) counts in the B-then-A arm, aligned to (a, b)
    I: float  # observed P(B) minus the total-probability prediction
    theta: float  # fitted gluing phase in [0, pi]; nan when unfit
    feasible: bool  # observation inside the band reachable by some phase
    fit: bool  # branch weights large enough to identify a phase
    order_effect: float
    I_MC: float
    smoothed: bool = False
    branch: BranchData | None = None
    observed_pB: float = math.nan

    @property
    def I_abs(self) -> float:
        return abs(self.I)

    def to_dict(self) -> dict:
        return {
            "m": self.m, "reliability": self.reliability, "I": self.I, "I_abs": self.I_abs,
            "theta": self.theta, "feasible": self.feasible, "fit": self.fit,
            "order_effect": self.order_effect, "I_MC": self.I_MC, "smoothed": self.smoothed,
            "observed_pB": self.observed_pB,
            "counts_ab": self.counts_ab.tolist(), "counts_ba": self.counts_ba.tolist(),
        }


@dataclass
class TradeoffReport:
    seed: int
    trials: int
    levels: list[LevelFit] = field(default_factory=list)

    def column(self, name: str) -> list[float]:
        return [getattr(lv, name) for lv in self.levels]

    def rows(self):
        for lv in self.levels:
            yield self.seed, lv.m, lv.I_abs, lv.theta, lv.order_effect, lv.I_MC

    def to_dict(self) -> dict:
        return {
            "kind": "tradeoff",
            "pass": trend_ok(self.column("I_abs"), 3 / math.sqrt(self.trials)),
            "residuals": {"top_level_I_abs": self.levels[-1].I_abs if self.levels else None},
            "details": {"seed": self.seed, "trials": self.trials, "levels": [lv.to_dict() for lv in self.levels]},
        }


def _flip(joint: np.ndarray, noise: float) -> np.ndarray:
    K = np.array([[1 - noise, noise], [noise, 1 - noise]])
    return K @ joint @ K.T


def _sample(rng, probs_by_mode: list[np.ndarray], mode: np.ndarray) -> np.ndarray:
    """Draw one flat (a, b) index per trial from the distribution of its mode."""
    u = rng.random(mode.size)
    out = np.empty(mode.size, dtype=np.int64)
    for k, p in enumerate(probs_by_mode):
        sel = mode == k
        cdf = np.cumsum(p.reshape(-1))
        cdf[-1] = 1.0
        out[sel] = np.searchsorted(cdf, u[sel], side="right")
    return out


def _branch_from_counts(n: np.ndarray) -> BranchData:
    N = n.sum()
    nA, nNotA = n[0].sum(), n[1].sum()
    return BranchData(nA / N, n[0, 0] / nA if nA else 0.0, nNotA / N, n[1, 0] / nNotA if nNotA else 0.0)


def _run_level(cfg: TradeoffConfig, m: int, rng: np.random.Generator,
               q_ab: np.ndarray, q_ba: np.ndarray) -> LevelFit:
    N = cfg.trials
    r = cfg.reliability(m)
    k = max(m, 1)
    # classical reasoners answer both arms from the recorded A-then-B branches
    classical = [_flip(q_ab, cfg.noise), _flip(q_ab, cfg.noise)]
    coherent = [_flip(q_ab, cfg.noise), _flip(q_ba, cfg.noise)]
    counts, memory = [], np.zeros((k, 2))
    for arm in range(2):
        mode = (rng.random(N) >= r).astype(int)  # 0 classical, 1 coherent
        idx = _sample(rng, [classical[arm], coherent[arm]], mode)
        counts.append(np.bincount(idx, minlength=4).reshape(2, 2).astype(float))
        mem = np.where(mode == 0, arm % k, rng.integers(0, k, N))
        memory[:, arm] = np.bincount(mem, minlength=k)
    n_ab, n_ba = counts
    I_MC = mutual_information(memory / memory.sum())

    tv = 0.5 * np.abs(n_ab / N - n_ba / N).sum()
    smoothed = False
    fit_ab, fit_ba = n_ab, n_ba
    if np.any(n_ab == 0) or np.any(n_ba == 0):
        smoothed = True
        fit_ab = n_ab + (n_ab == 0).any()
        fit_ba = n_ba + (n_ba == 0).any()
    d = _branch_from_counts(fit_ab)
    observed = fit_ba[:, 0].sum() / fit_ba.sum()  # first answer of the B-then-A arm is B
    I = observed - ltp_predict(d)
    theta, feasible, ok = math.nan, False, True
    raw = _branch_from_counts(n_ab)  # identifiability is judged before smoothing
    if math.sqrt(raw.pA * raw.pB_given_A * raw.pBarA * raw.pB_given_BarA) < MIN_BRANCH_WEIGHT:
        ok = False
    else:
        try:
            fit = extract_phase(observed, d)
            theta, feasible = fit.theta, fit.feasible
        except DegenerateBranchError:
            ok = False
    return LevelFit(m, r, n_ab, n_ba, float(I), float(theta), feasible, ok, float(tv), float(I_MC),
                    smoothed, d, float(observed))


def exact_arms(cfg: TradeoffConfig) -> tuple[np.ndarray, np.ndarray]:
    """Noiseless A-then-B joint and B-then-A joint (aligned to (a, b))."""
    model = cfg.model()
    return sequential_stats(model, ["A", "B"]), sequential_stats(model, ["B", "A"]).T


def closed_form_interference(cfg: TradeoffConfig) -> float:
    """Interference of the coherent model: P(B asked first) minus the total-probability prediction."""
    q_ab, q_ba = exact_arms(cfg)
    d = BranchData(q_ab[0].sum(), q_ab[0, 0] / q_ab[0].sum(), q_ab[1].sum(), q_ab[1, 0] / q_ab[1].sum())
    return float(q_ba[:, 0].sum() - ltp_predict(d))


def run_tradeoff(cfg: TradeoffConfig) -> TradeoffReport:
    q_ab, q_ba = exact_arms(cfg)
    streams = np.random.SeedSequence(cfg.seed).spawn(len(cfg.memory_levels))
    report = TradeoffReport(cfg.seed, cfg.trials)
    for m, ss in zip(cfg.memory_levels, streams):
        report.levels.append(_run_level(cfg, m, np.random.default_rng(ss), q_ab, q_ba))
    return report


def run_seeds(cfg: TradeoffConfig, seeds: Sequence[int]) -> list[TradeoffReport]:
    out = []
    for s in seeds:
        c = TradeoffConfig(cfg.question_pair, cfg.initial, cfg.memory_levels, cfg.trials, s, cfg.noise,
                           cfg.reliability)
        out.append(run_tradeoff(c))
    return out


def inversions(values: Sequence[float]) -> list[float]:
    """Sizes of every increase between consecutive values."""
    return [b - a for a, b in zip(values, values[1:]) if b > a]


def trend_ok(values: Sequence[float], allowance: float, allowed: int = 1) -> bool:
    """Non-increasing apart from at most ``allowed`` increases, each within ``allowance``."""
    inv = inversions(values)
    return len(inv) <= allowed and all(x <= allowance for x in inv)


def empirical_behavior(level: LevelFit) -> Behavior:
    """Arm frequencies as a two-context behavior over questions A and B."""
    s = Scenario((Observable("A", 2), Observable("B", 2)),
                 (Context("AB", ("A", "B")), Context("BA", ("B", "A"))))
    ab = level.counts_ab / level.counts_ab.sum()
    ba = level.counts_ba / level.counts_ba.sum()
    return Behavior(s, {"AB": ab.reshape(-1), "BA": ba.T.reshape(-1)})


def reports_to_csv_text(reports: Sequence[TradeoffReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        for row in r.rows():
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def fit_report_to_csv(r: TradeoffReport | Sequence[TradeoffReport], path) -> None:
    reports = [r] if isinstance(r, TradeoffReport) else list(r)
    atomic_write_text(path, reports_to_csv_text(reports))
