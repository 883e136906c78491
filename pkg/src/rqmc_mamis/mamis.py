"""Adaptive multiple importance sampling with recycled mixture weights.

A run executes T stages. Stage t draws N_t fresh uniforms (seeded per stage
from the master seed), transports them through the current proposal
Q(theta_t), and stores log stage weights log pi~ - log q(., theta_t). The
next parameter theta_{t+1} is the weighted average of a moment statistic h,
either with raw weights (unnormalized variant, valid when the target density
is normalized) or with per-stage self-normalized weights (valid for targets
known only up to a constant). After the last stage every sample is reweighted
against the mixture (1/Omega_T) sum_l N_l q(., theta_l) of all stage
proposals, and the final estimator averages psi over all recycled samples.

All weights live in log space; mixture denominators use a logsumexp whose
terms are sorted before summation, which makes recycled weights exactly
invariant under stage permutation.
"""

import dataclasses
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import pointgen, proposals
from ._rng import derive_seed
from .errors import DegenerateWeightsError, EstimateError, MamisRunError
from .proposals import FamilySpec, ProposalParam
from .targets import integrand_matrix

SAMPLER_MC = "mc"
SAMPLER_RQMC = "rqmc"


@dataclass
class StageRecord:
    """One stage: parameter used, samples drawn, per-sample log weights."""

    t: int
    theta: ProposalParam
    samples: np.ndarray
    stage_log_weights: np.ndarray
    point_seed: int


@dataclass
class Trace:
    """Full record of a run, including post-hoc recycled weights."""

    stages: List[StageRecord]
    schedule: Tuple[int, ...]
    sampler: str
    method: str
    spec: FamilySpec
    final_theta: ProposalParam
    omega_t: int
    recycled_log_weights: Optional[List[np.ndarray]] = None
    fallback_stages: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Estimate:
    """Estimator value plus the budget metadata it was computed under."""

    value: np.ndarray
    method: str
    stages: int
    schedule: Tuple[int, ...]
    n_bar: float


def draw_uniforms(sampler, n, d, seed):
    """Dispatch to the i.i.d. or scrambled Sobol' generator."""
    if sampler == SAMPLER_MC:
        return pointgen.generate_iid(n, d, seed)
    if sampler == SAMPLER_RQMC:
        if n & (n - 1) or n < 1:
            raise ValueError(f"RQMC stage sizes must be powers of two, got {n}")
        return pointgen.generate_sobol(n.bit_length() - 1, d, seed)
    raise ValueError(f"unknown sampler {sampler!r} (expected 'mc' or 'rqmc')")


def run_stage(target, spec, theta_t, n_t, sampler, seed):
    """Draw one stage of N_t samples from Q(theta_t) and weight against pi~."""
    if n_t < 1:
        raise ValueError(f"stage size must be >= 1, got {n_t}")
    ps = draw_uniforms(sampler, n_t, spec.uniform_dim, seed)
    X, log_q = proposals.sample_with_log_density(spec, theta_t, ps)
    log_pi = np.asarray(target.log_density(X), dtype=np.float64)
    slw = log_pi - log_q
    if not np.all(np.isfinite(slw)):
        bad = int(np.flatnonzero(~np.isfinite(slw))[0])
        raise MamisRunError(
            f"non-finite log weight at stage sample {bad} (log target "
            f"{log_pi[bad]!r}, log proposal {log_q[bad]!r})"
        )
    return StageRecord(t=0, theta=theta_t, samples=X, stage_log_weights=slw,
                       point_seed=int(seed))


def parameter_update(record, spec, h, normalized):
    """Next parameter from one stage; returns (theta_next, used_fallback).

    Unnormalized mode averages h with raw weights divided by N_t; normalized
    mode uses weights that sum to one within the stage. The update falls back
    to the previous parameter (``used_fallback=True``) when it is non-finite
    or its covariance block is not genuinely positive definite above the
    eigenvalue floor: a rank-deficient moment estimate (the typical product
    of a stage with effective sample size near 1) would otherwise turn into a
    degenerate needle proposal the run cannot recover from. All-zero weights
    in normalized mode raise ``DegenerateWeightsError``.
    """
    H = np.atleast_2d(np.asarray(h(record.samples), dtype=np.float64))
    slw = record.stage_log_weights
    if normalized:
        m = np.max(slw)
        if not np.isfinite(m):
            raise DegenerateWeightsError("all stage weights are zero")
        w = np.exp(slw - m)
        omega = w / np.sum(w)
        theta_vec = omega @ H
    else:
        with np.errstate(over="ignore"):
            w = np.exp(slw)
        theta_vec = (w @ H) / len(w)

    if not np.all(np.isfinite(theta_vec)):
        return record.theta, True
    d = spec.dim
    try:
        if spec.adapts_covariance:
            cov = theta_vec[d:].reshape(d, d)
            sym = 0.5 * (cov + cov.T)
            if np.linalg.eigvalsh(sym)[0] <= proposals.EIG_FLOOR:
                return record.theta, True
            return proposals.param_from_moments(spec, theta_vec[:d], sym), False
        return proposals.param_from_moments(spec, theta_vec), False
    except (proposals.InvalidParameterError, proposals.SingularProposalError):
        return record.theta, True


def _logsumexp_sorted(a, axis=0):
    """logsumexp with terms sorted before summation (permutation invariant)."""
    m = np.max(a, axis=axis, keepdims=True)
    e = np.sort(np.exp(a - m), axis=axis)
    return np.squeeze(m, axis=axis) + np.log(np.sum(e, axis=axis))


def recycle_weights(trace):
    """Reweight every sample against the mixture of all stage proposals.

    Returns a copy of the trace with ``recycled_log_weights`` filled; stage
    weights are untouched. With a single stage the mixture collapses to the
    stage proposal and the recycled weights equal the stage weights exactly.
    """
    thetas = [s.theta for s in trace.stages]
    log_frac = np.log(np.asarray(trace.schedule, dtype=np.float64) / trace.omega_t)
    recycled = []
    for t_idx, rec in enumerate(trace.stages):
        stack = proposals.log_density_stack(trace.spec, thetas, rec.samples)
        log_mix = _logsumexp_sorted(log_frac[:, None] + stack, axis=0)
        recycled.append(rec.stage_log_weights + (stack[t_idx] - log_mix))
    return dataclasses.replace(trace, recycled_log_weights=recycled)


def _psi_columns(psi, rec):
    vals = integrand_matrix(psi, rec.samples)
    if not np.all(np.isfinite(vals)):
        i, j = map(int, np.argwhere(~np.isfinite(vals))[0])
        raise EstimateError(
            f"integrand {psi.name!r} non-finite at stage {rec.t}, sample {i} "
            f"(component {j})"
        )
    return vals


def mamis_estimate(trace, psi):
    """The recycled estimator of E_pi[psi] for the trace's variant.

    Unnormalized traces average exp(recycled log weight) * psi over all
    Omega_T samples; self-normalized traces normalize recycled weights within
    each stage and combine stages with weights N_t / Omega_T.
    """
    if trace.recycled_log_weights is None:
        raise ValueError("trace has no recycled weights; run recycle_weights first")
    total = None
    for rec, rlw, n_t in zip(trace.stages, trace.recycled_log_weights, trace.schedule):
        vals = _psi_columns(psi, rec)
        if trace.method == "sn_mamis":
            m = np.max(rlw)
            if not np.isfinite(m):
                raise DegenerateWeightsError(f"all recycled weights zero in stage {rec.t}")
            w = np.exp(rlw - m)
            denom = np.sum(w)
            contrib = np.array(
                [n_t * (np.sum(w * vals[:, j]) / denom) for j in range(vals.shape[1])]
            )
        else:
            w = np.exp(rlw)
            contrib = np.array([np.sum(w * vals[:, j]) for j in range(vals.shape[1])])
        total = contrib if total is None else total + contrib
    value = total / trace.omega_t
    return Estimate(value=value, method=trace.method, stages=len(trace.schedule),
                    schedule=trace.schedule, n_bar=trace.omega_t / len(trace.schedule))


def auxiliary_estimate(trace, theta_star, psi):
    """Diagnostic estimator with the fixed reference parameter theta*.

    Averages [pi(X)/q(X, theta*)] psi(X) over all samples; useful when
    theta* is known analytically. Coincides with the recycled estimator when
    every stage parameter equals theta*.
    """
    total = None
    for rec in trace.stages:
        vals = _psi_columns(psi, rec)
        log_q_t = proposals.log_density(trace.spec, rec.theta, rec.samples)
        log_pi = rec.stage_log_weights + log_q_t
        lw = log_pi - proposals.log_density(trace.spec, theta_star, rec.samples)
        w = np.exp(lw)
        contrib = np.array([np.sum(w * vals[:, j]) for j in range(vals.shape[1])])
        total = contrib if total is None else total + contrib
    value = total / trace.omega_t
    return Estimate(value=value, method="auxiliary", stages=len(trace.schedule),
                    schedule=trace.schedule, n_bar=trace.omega_t / len(trace.schedule))


def _run(target, spec, theta_1, schedule, sampler, h, master_seed, normalized, method):
    schedule = tuple(int(n) for n in schedule)
    if not schedule:
        raise ValueError("schedule must contain at least one stage size")
    theta = theta_1
    stages = []
    fallbacks = []
    for t, n_t in enumerate(schedule, start=1):
        rec = run_stage(target, spec, theta, n_t, sampler, derive_seed(master_seed, t))
        rec.t = t
        stages.append(rec)
        theta, used_fallback = parameter_update(rec, spec, h, normalized)
        if used_fallback:
            fallbacks.append(t)
    trace = Trace(
        stages=stages, schedule=schedule, sampler=sampler, method=method,
        spec=spec, final_theta=theta, omega_t=sum(schedule),
        fallback_stages=tuple(fallbacks),
    )
    return recycle_weights(trace)


def run_mamis(target, spec, theta_1, schedule, sampler, h, master_seed):
    """Unnormalized-weight adaptive run; requires a normalized target."""
    if not target.normalized:
        raise MamisRunError(
            "target density is unnormalized; the unnormalized-weight estimator "
            "would be biased — use run_self_normalized_mamis instead"
        )
    return _run(target, spec, theta_1, schedule, sampler, h, master_seed,
                normalized=False, method="mamis")


def run_self_normalized_mamis(target, spec, theta_1, schedule, sampler, h, master_seed):
    """Self-normalized adaptive run; valid for unnormalized targets."""
    return _run(target, spec, theta_1, schedule, sampler, h, master_seed,
                normalized=True, method="sn_mamis")


def _pooled_mean_estimate(trace):
    """Mean estimate with one softmax over all recycled samples.

    At pilot-sized stages the per-stage normalized estimator gives every
    stage equal say even when its proposal wandered off target; pooling lets
    the mixture weights arbitrate between stages instead. Agrees with
    ``mamis_estimate`` at production budgets.
    """
    mx = max(np.max(rlw) for rlw in trace.recycled_log_weights)
    num = np.zeros(trace.stages[0].samples.shape[1])
    den = 0.0
    for rec, rlw in zip(trace.stages, trace.recycled_log_weights):
        w = np.exp(rlw - mx)
        den += np.sum(w)
        num += w @ rec.samples
    return num / den


def pilot_mean(target, spec, stages, points_per_stage, sampler, seed, reps=10):
    """Cheap repeated runs that bootstrap the main experiments.

    Runs ``reps`` independent self-normalized traces with the uncentered
    moment statistic h(x) = (x, vec(x x^T)) and small budgets, and returns
    the averaged pooled mean estimate together with the averaged final
    covariance block (None for the fixed-covariance family).
    """
    h = lambda x: proposals.h_statistic(spec, x, aux_mean=None)
    means, covs = [], []
    for r in range(reps):
        if spec.adapts_covariance:
            theta_1 = proposals.param_from_moments(
                spec, np.zeros(spec.dim), np.eye(spec.dim)
            )
        else:
            theta_1 = proposals.param_from_moments(spec, np.zeros(spec.dim))
        trace = run_self_normalized_mamis(
            target, spec, theta_1, (points_per_stage,) * stages, sampler, h,
            derive_seed(seed, r),
        )
        means.append(_pooled_mean_estimate(trace))
        if spec.adapts_covariance:
            _, cov = proposals.unpack(spec, trace.final_theta)
            covs.append(cov)
    mean = np.mean(np.stack(means), axis=0)
    cov = np.mean(np.stack(covs), axis=0) if covs else None
    return mean, cov


def trace_to_csv(trace, stream):
    """Optional dump: stage, sample index, coordinates, stage/recycled log w."""
    d = trace.stages[0].samples.shape[1]
    header = ["stage", "sample_index"] + [f"x{j}" for j in range(d)]
    header += ["stage_log_weight", "recycled_log_weight"]
    stream.write(",".join(header) + "\n")
    for t_idx, rec in enumerate(trace.stages):
        rlw = (trace.recycled_log_weights[t_idx]
               if trace.recycled_log_weights is not None
               else np.full(len(rec.stage_log_weights), np.nan))
        for i in range(rec.samples.shape[0]):
            row = [str(rec.t), str(i)]
            row += [f"{v:.17g}" for v in rec.samples[i]]
            row += [f"{rec.stage_log_weights[i]:.17g}", f"{rlw[i]:.17g}"]
            stream.write(",".join(row) + "\n")
