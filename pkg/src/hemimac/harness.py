"""Seeded, order-independent Monte Carlo experiments and their estimators."""

import csv
import enum
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta as beta_dist

from . import seeding
from .asymptotics import delta_concentration_check, limit_report
from .channel import (
    ActiveSetMode,
    ChannelParams,
    build_codebook,
    draw_active_set,
    transmit,
)
from .decoder import (
    DEFAULT_ENUMERATION_CAP,
    DecodeError,
    Strategy,
    TauSchedule,
    count_misses,
    direction_estimate,
    ml_decode_exact,
    ml_decode_local,
    prefilter,
    tau_value,
)
from .errors import ParameterError
from .sphere import is_hemispherical, sample_sphere_rows

# codebooks up to this many entries are materialized once per trial
MATERIALIZE_LIMIT = 50_000_000

CSV_COLUMNS = ("trial_index", "alignment", "sent_retained", "unsent_retained",
               "cap_underflow", "misses", "runtime_ms")


class Measurement(enum.Enum):
    ALIGNMENT = "alignment"
    RETENTION = "retention"
    UNSENT_RETENTION = "unsent_retention"
    CAP_CARDINALITY = "cap_cardinality"
    DECODE = "decode"
    WENDEL_MC = "wendel_mc"
    DELTA_CONCENTRATION = "delta_concentration"


_FULL_FILTER = {Measurement.UNSENT_RETENTION, Measurement.CAP_CARDINALITY, Measurement.DECODE}


@dataclass(frozen=True)
class ExperimentConfig:
    params: ChannelParams
    schedule: TauSchedule = TauSchedule()
    strategy: Strategy = Strategy.EXACT_IF_FEASIBLE
    trials: int = 100
    base_seed: int = 0
    measurements: frozenset = frozenset({Measurement.ALIGNMENT, Measurement.RETENTION})
    # one codebook shared by all trials instead of a fresh one per trial
    fixed_codebook: bool = False
    zero_noise: bool = False
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP
    max_rounds: int | None = None
    record_timing: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        object.__setattr__(self, "measurements", frozenset(Measurement(m) for m in self.measurements))

    def echo(self):
        p = self.params
        M, K_a = p.sizes
        return {
            "n": p.n, "d": p.d, "beta": p.beta, "P": p.P, "M": M, "K_a": K_a,
            "sampling_mode": p.sampling_mode.value,
            "axis": "e1" if p.axis is None else list(p.axis),
            "schedule": str(self.schedule),
            "tau": tau_value(self.schedule, p.n),
            "strategy": self.strategy.value,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "measurements": sorted(m.value for m in self.measurements),
            "fixed_codebook": self.fixed_codebook,
            "zero_noise": self.zero_noise,
            "enumeration_cap": self.enumeration_cap,
            "max_rounds": self.max_rounds,
            "reliable_regime": p.reliable_regime,
        }


@dataclass
class TrialRecord:
    trial_index: int
    alignment: float | None = None
    sent_retained: int | None = None
    unsent_retained: int | None = None
    cap_underflow: bool | None = None
    misses: int | None = None
    runtime_ms: float | None = None
    y_norm_over_n: float | None = None
    y_parallel_over_n: float | None = None
    retained_count: int | None = None
    decode_method: str | None = None
    estimated_set: tuple | None = None
    error: str | None = None

    def csv_row(self):
        row = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            if v is None:
                row.append("")
            elif isinstance(v, bool):
                row.append("true" if v else "false")
            else:
                row.append(repr(v) if isinstance(v, float) else str(v))
        return row


def trial_instance(config, trial_index):
    """Codebook and observation of one trial, a pure function of ``(config, trial_index)``."""
    p = config.params
    base = config.base_seed
    active = draw_active_set(p, seeding.make_rng(base, trial_index, seeding.ACTIVE_SET))
    if config.fixed_codebook:
        cb_seed = seeding.derive_seed(base, seeding.CODEBOOK)
    else:
        cb_seed = seeding.derive_seed(base, trial_index, seeding.CODEBOOK)
    codebook = build_codebook(p, cb_seed, active if p.conditioned else ())
    noise_seed = seeding.derive_seed(base, trial_index, seeding.NOISE)
    return codebook, transmit(codebook, active, noise_seed, zero_noise=config.zero_noise)


def ml_stage(config, y, codebook, retained):
    K_a = config.params.K_a
    if (config.strategy is Strategy.EXACT_IF_FEASIBLE
            and math.comb(len(retained), K_a) <= config.enumeration_cap):
        return ml_decode_exact(y, codebook, retained, K_a, config.enumeration_cap)
    return ml_decode_local(y, codebook, retained, K_a, config.max_rounds)


def run_trial(config, trial_index):
    start = time.perf_counter()
    p = config.params
    n = p.n
    K_a = p.K_a
    want = config.measurements
    codebook, obs = trial_instance(config, trial_index)
    rec = TrialRecord(trial_index)
    rec.y_norm_over_n = float(np.linalg.norm(obs.y) / n)
    try:
        u_hat = direction_estimate(obs.y)
    except DecodeError as exc:
        rec.error = exc.kind
        return rec
    if obs.axis is not None:
        rec.alignment = float(u_hat @ obs.axis)
        rec.y_parallel_over_n = float(obs.y @ obs.axis / n)
    tau = tau_value(config.schedule, n)

    if want & _FULL_FILTER:
        if p.M * n <= MATERIALIZE_LIMIT:
            codebook.matrix
        filt = prefilter(codebook, u_hat, tau, ground_truth=obs.active_set)
        rec.sent_retained = filt.retained_true_count
        rec.unsent_retained = filt.retained_other_count
        rec.retained_count = filt.size
        rec.cap_underflow = filt.size < K_a
        if Measurement.DECODE in want:
            if rec.cap_underflow:
                rec.error = "cap_underflow"
            else:
                out = ml_stage(config, obs.y, codebook, filt.retained)
                rec.misses = count_misses(obs.active_set, out.estimated_set)
                rec.decode_method = out.method.value
                rec.estimated_set = tuple(int(i) for i in out.estimated_set)
    elif Measurement.RETENTION in want:
        scores = codebook.codewords(obs.active_set) @ u_hat / p.radius
        rec.sent_retained = int(np.count_nonzero(scores >= tau))

    if config.record_timing:
        rec.runtime_ms = (time.perf_counter() - start) * 1e3
    return rec


def clopper_pearson_upper(k, trials, alpha=0.05):
    """One-sided upper confidence bound for a binomial proportion (exact)."""
    if k >= trials:
        return 1.0
    return float(beta_dist.ppf(1 - alpha, k + 1, trials - k))


def _mean_stderr(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return None, None
    mean = float(values.mean())
    if values.size < 2:
        return mean, None
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


@dataclass
class ExperimentReport:
    config: dict
    estimators: dict
    limits: dict
    records: list = field(default_factory=list, repr=False)

    def to_dict_summary(self):
        return {"config": self.config, "estimators": self.estimators, "limits": self.limits}

    def to_json(self):
        return json.dumps(self.to_dict_summary(), sort_keys=True, indent=2) + "\n"

    def digest(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def write_json(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rec in self.records:
                writer.writerow(rec.csv_row())


def aggregate(config, records):
    """Fold trial records (in trial order) into the report estimators."""
    p = config.params
    M, K_a = p.sizes
    est = {}

    align = [r.alignment for r in records if r.alignment is not None]
    est["alignment_mean"], est["alignment_stderr"] = _mean_stderr(align)
    est["y_norm_over_n_mean"], est["y_norm_over_n_stderr"] = _mean_stderr(
        [r.y_norm_over_n for r in records if r.y_norm_over_n is not None])
    est["y_parallel_over_n_mean"], est["y_parallel_over_n_stderr"] = _mean_stderr(
        [r.y_parallel_over_n for r in records if r.y_parallel_over_n is not None])

    sent = [r.sent_retained for r in records if r.sent_retained is not None]
    if sent:
        kept = sum(sent)
        est["sent_retained_total"] = kept
        est["sent_total"] = K_a * len(sent)
        est["p_ret_hat"] = kept / (K_a * len(sent))
        est["pupe_p_hat"] = 1.0 - est["p_ret_hat"]
        est["p_ret_stderr"] = _mean_stderr([s / K_a for s in sent])[1]

    unsent = [r.unsent_retained for r in records if r.unsent_retained is not None]
    if unsent:
        est["unsent_retained_total"] = sum(unsent)
        est["unsent_total"] = (M - K_a) * len(unsent)
        est["p_n_hat"] = sum(unsent) / ((M - K_a) * len(unsent)) if M > K_a else None

    under = [r.cap_underflow for r in records if r.cap_underflow is not None]
    if under:
        est["cap_underflow_count"] = sum(under)
        est["cap_underflow_rate"] = sum(under) / len(under)

    misses = [r.misses for r in records if r.misses is not None]
    if misses:
        errors = sum(m > 0 for m in misses)
        est["decoded_trials"] = len(misses)
        est["error_trials"] = errors
        est["misses_histogram"] = {str(k): misses.count(k) for k in sorted(set(misses))}
        est["pupe_ml_hat"] = sum(misses) / (K_a * len(misses))
        # PUPE_ML <= P[trial in error]; exact one-sided 95% bound, informative at zero counts
        est["pupe_ml_upper95"] = clopper_pearson_upper(errors, len(misses))
    return est


def run_experiment(config, threads=1):
    """Run every trial and aggregate; the result does not depend on ``threads``."""
    if threads <= 1:
        records = [run_trial(config, t) for t in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda t: run_trial(config, t), range(config.trials)))
    est = aggregate(config, records)
    p = config.params
    if Measurement.WENDEL_MC in config.measurements:
        mc, se = estimate_wendel_mc(p.n, p.K_a, max(config.trials, 100),
                                    seeding.derive_seed(config.base_seed, seeding.WENDEL))
        est["wendel_mc"], est["wendel_mc_stderr"] = mc, se
    if Measurement.DELTA_CONCENTRATION in config.measurements:
        est["delta_l1_over_n"] = delta_concentration_check(
            p.n, p.P, 1, config.trials, seeding.derive_seed(config.base_seed, seeding.DELTA))
    limits = limit_report(p.beta, p.P).as_dict()
    return ExperimentReport(config.echo(), est, limits, records)


def estimate_wendel_mc(n, N, trials, seed):
    """Monte Carlo frequency of N uniform points on the (n-1)-sphere sharing a hemisphere."""
    if trials < 100:
        raise ParameterError("need at least 100 trials")
    if n < 2 or N < 1:
        raise ParameterError("need n >= 2 and N >= 1")
    rng = seeding.make_rng(seed, seeding.WENDEL)
    pts = sample_sphere_rows(rng, trials * N, n).reshape(trials, N, n)
    hits = sum(is_hemispherical(pts[t]).is_hemispherical for t in range(trials))
    p_hat = hits / trials
    return p_hat, math.sqrt(p_hat * (1 - p_hat) / trials)


def estimate_rate_slope(xs, ys):
    """Ordinary least-squares slope of ys against xs."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3 or xs.size != ys.size:
        raise ParameterError("need at least 3 (x, y) pairs")
    if not np.all(np.diff(xs) > 0):
        raise ParameterError("xs must be strictly increasing")
    xc = xs - xs.mean()
    return float(xc @ (ys - ys.mean()) / (xc @ xc))


def estimate_collision_rate(params, trials, seed, batch=200_000):
    """Frequency of repeated messages among K_a i.i.d. uniform picks (vectorized IID_MESSAGES)."""
    M, K_a = params.sizes
    rng = seeding.make_rng(seed, seeding.COLLISION)
    hits = 0
    for lo in range(0, trials, batch):
        rows = min(batch, trials - lo)
        picks = np.sort(rng.integers(0, M, size=(rows, K_a)), axis=1)
        hits += int(np.count_nonzero((np.diff(picks, axis=1) == 0).any(axis=1)))
    return hits / trials


def collision_rate_by_draws(params, trials, seed):
    """Same estimate through repeated ``draw_active_set`` calls (slow reference path)."""
    rng = seeding.make_rng(seed, seeding.COLLISION)
    return sum(draw_active_set(params, rng, ActiveSetMode.IID_MESSAGES)[1]
               for _ in range(trials)) / trials


def estimate_pairwise_error(delta_norm_sq, n, draws, seed, batch=100_000):
    """Frequency of <Z, Delta> <= -|Delta|^2/2 for Z ~ N(0, I_n) and a fixed Delta.

    Delta is drawn once (uniform direction) with the requested squared norm.
    """
    if not delta_norm_sq > 0:
        raise ParameterError("delta_norm_sq must be positive")
    rng = seeding.make_rng(seed, seeding.PAIRWISE)
    delta = sample_sphere_rows(rng, 1, n, math.sqrt(delta_norm_sq))[0]
    threshold = -delta_norm_sq / 2
    hits = 0
    for lo in range(0, draws, batch):
        rows = min(batch, draws - lo)
        z = rng.standard_normal((rows, n))
        hits += int(np.count_nonzero(z @ delta <= threshold))
    freq = hits / draws
    return freq, math.sqrt(freq * (1 - freq) / draws)
