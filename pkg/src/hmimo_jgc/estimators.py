"""Measurement synthesis and the sparse channel estimators.

Three estimators share one measurement model:

* the joint graph-cut estimator (``jgc_ce``): per user, correlate the
  residual against the effective sensing matrix and extract the strongest
  candidate cells; across users, vote widely-shared candidates into a
  common support; per user, merge supports, relabel the lattice by exact
  min-cut and refit by trimmed least squares;
* the single-user variant (``gcse``): the identical loop with the voting
  phase disabled;
* wavenumber-domain orthogonal matching pursuit (``wd_omp``): the classical
  one-index-per-iteration greedy baseline.

The iteration is kept stable by four guards around the textbook
alternation, all exposed through ``EstimatorConfig``: candidate extraction
stops once the residual energy reaches the known noise floor; the labeling
threshold never drops below the coherence level of noise; each refit is
size-capped and pruned to statistically significant coefficients; and a
refit is only accepted if it does not increase the post-fit residual
(pure alternation can oscillate between two labelings at the noise floor).

All estimators are deterministic given their inputs; randomness enters
only through measurement generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import UserChannel
from .lattice import SparseBasis, WavenumberLattice
from .mincut import SupportGraph, minimize


@dataclass(frozen=True)
class MeasurementSet:
    """Pilot observations for all users.

    pilots is the T x N pilot matrix, effective = pilots @ psi the T x L
    sensing matrix the estimators work against, received the K x T stacked
    per-user observations.
    """

    pilots: np.ndarray = field(repr=False)
    effective: np.ndarray = field(repr=False)
    received: np.ndarray = field(repr=False)
    noise_variance: float
    snr_db: float

    @property
    def num_users(self) -> int:
        return self.received.shape[0]

    @property
    def pilot_len(self) -> int:
        return self.pilots.shape[0]


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs shared by the iterative estimators.

    k_tilde       candidates extracted per user per iteration
    trim_budget   entries kept after each least-squares refit (None = no cap)
    eta           squared-correlation threshold for pruning candidates; the
                  user's own accumulation applies it to the raw scores, the
                  vote lists to scores relative to the iteration maximum
    k0            vote count required to promote a candidate to the common set
    strict_vote   require strictly more than k0 votes instead of at least k0
    max_iters     iteration cap
    residual_tol  relative residual-change convergence tolerance
    mrf_beta      Ising coupling of the labeling step
    mrf_gamma     unary scale of the labeling step
    mrf_tau_frac  data threshold as a fraction of the per-iteration max score
    mrf_tau_floor lower bound on the data threshold in units of 1/sqrt(T),
                  the coherence scale of a noise residual
    noise_gate    candidate extraction stops once the residual energy falls
                  below noise_gate times the expected noise energy
    sig_level     refit coefficients whose squared magnitude falls below
                  sig_level times the per-coefficient noise variance are
                  zeroed (model-order control at low SNR)
    solve_frac    at most solve_frac * T columns enter any least-squares solve
    """

    k_tilde: int = 8
    trim_budget: int | None = None
    eta: float = 0.15
    k0: int = 4
    strict_vote: bool = False
    max_iters: int = 20
    residual_tol: float = 1e-4
    mrf_beta: float = 0.45
    mrf_gamma: float = 5.0
    mrf_tau_frac: float = 0.5
    mrf_tau_floor: float = 1.4
    noise_gate: float = 1.2
    sig_level: float = 6.0
    solve_frac: float = 0.8

    def __post_init__(self):
        if self.k_tilde < 1 or self.k0 < 1 or self.max_iters < 1:
            raise ValueError("k_tilde, k0 and max_iters must be positive")
        if self.trim_budget is not None and self.trim_budget < 1:
            raise ValueError("trim_budget must be positive when given")
        if self.eta < 0 or self.residual_tol < 0 or self.mrf_beta < 0:
            raise ValueError("eta, residual_tol and mrf_beta must be non-negative")
        if self.mrf_tau_floor < 0 or self.noise_gate < 0 or self.sig_level < 0:
            raise ValueError("mrf_tau_floor, noise_gate and sig_level must be non-negative")
        if not 0 < self.solve_frac <= 1:
            raise ValueError("solve_frac must lie in (0, 1]")


@dataclass
class IterationRecord:
    """One estimator iteration as seen from outside."""

    iteration: int
    residual_norms: np.ndarray
    common_support_size: int
    support_sizes: np.ndarray
    nmse_per_user: np.ndarray | None = None
    nmse_joint: float | None = None


@dataclass
class EstimationResult:
    """Final estimates plus the per-iteration trace."""

    h_hat: np.ndarray                 # (L, K)
    iterations: int
    converged: bool
    trace: list
    common_support: np.ndarray
    final_residuals: np.ndarray       # (K, T), consistent with h_hat
    underdetermined_solves: int = 0


def generate_measurements(
    channels,
    basis: SparseBasis,
    pilot_len: int,
    snr_db: float,
    rng,
    signal_power: float | None = None,
) -> MeasurementSet:
    """Draw pilots and noisy observations for the given channels.

    Pilot entries are i.i.d. unit-variance circularly-symmetric complex
    Gaussians. The noise variance is signal_power / 10^(snr_db/10) per
    received sample; when signal_power is not given it is taken from the
    realized channels' spatial power (mean over users of ||psi @ h_f||^2,
    which equals the per-sample received power averaged over pilot draws),
    falling back to 1.0 for all-zero channels. snr_db = inf disables noise.
    Draw order (pilots first, then noise) is fixed so equal seeds give
    bitwise-equal measurement sets.
    """
    if pilot_len < 1:
        raise ValueError("pilot_len must be at least 1")
    n_ant, _ = basis.psi.shape
    h_mat = np.column_stack([ch.h_f for ch in channels])   # (L, K)

    pilots = (rng.standard_normal((pilot_len, n_ant))
              + 1j * rng.standard_normal((pilot_len, n_ant))) / math.sqrt(2.0)
    effective = pilots @ basis.psi
    clean = (effective @ h_mat).T                           # (K, T)

    if math.isinf(snr_db):
        noise_variance = 0.0
        received = clean
    else:
        if signal_power is None:
            spatial = basis.psi @ h_mat
            signal_power = float(np.mean(np.sum(np.abs(spatial) ** 2, axis=0)))
            if signal_power == 0.0:
                signal_power = 1.0
        noise_variance = signal_power / (10.0 ** (snr_db / 10.0))
        noise = (rng.standard_normal(clean.shape)
                 + 1j * rng.standard_normal(clean.shape)) * math.sqrt(noise_variance / 2.0)
        received = clean + noise

    return MeasurementSet(pilots=pilots, effective=effective, received=received,
                          noise_variance=noise_variance, snr_db=snr_db)


def residual_scores(received_i, effective, h_hat, column_norms=None):
    """Residual of the current estimate and normalized correlation scores.

    scores[l] = |effective[:, l]^H r| / (||effective[:, l]|| * ||r||), so
    every score lies in [0, 1] and thresholds keep their meaning across
    signal scales. A zero residual yields all-zero scores (converged).
    """
    residual = received_i - effective @ h_hat
    rnorm = float(np.linalg.norm(residual))
    if rnorm == 0.0:
        return residual, np.zeros(effective.shape[1])
    if column_norms is None:
        column_norms = np.linalg.norm(effective, axis=0)
    scores = np.abs(effective.conj().T @ residual) / (column_norms * rnorm)
    return residual, scores


def select_candidates(scores, k_tilde: int, eta: float) -> np.ndarray:
    """Indices of the k_tilde largest scores whose square clears eta.

    Ordered by descending score; equal scores break toward the lower
    lattice position. May be empty.
    """
    scores = np.asarray(scores)
    order = np.argsort(-scores, kind="stable")[: min(k_tilde, scores.size)]
    return order[scores[order] ** 2 > eta]


def vote_common(candidate_sets, k0: int, current: set, strict: bool = False) -> set:
    """Promote candidates shared by enough users into the common set.

    Returns a new set: the old one plus every index appearing in at least
    k0 candidate sets (strictly more than k0 when strict). Never removes.
    """
    counts: dict[int, int] = {}
    for cand in candidate_sets:
        for idx in set(int(i) for i in cand):
            counts[idx] = counts.get(idx, 0) + 1
    needed = k0 + 1 if strict else k0
    promoted = {idx for idx, c in counts.items() if c >= needed}
    return set(current) | promoted


def merge_and_label(
    scores,
    support: set,
    common: set,
    candidates,
    lattice: WavenumberLattice,
    config: EstimatorConfig,
    tau_floor: float = 0.0,
):
    """Grow the user's support and relabel the lattice by exact min-cut.

    The support absorbs the common set and the user's own surviving
    candidates, then acts as hard +1 evidence; the unaries make the
    zero-coupling solution threshold the scores at tau. tau tracks the
    per-iteration maximum score but never drops below ``tau_floor``, which
    callers set to the coherence level of a noise residual so the labeling
    goes inert once the strong cells are explained.
    """
    scores = np.asarray(scores)
    new_support = set(support) | set(common) | set(int(i) for i in candidates)
    tau = 0.0
    if scores.size:
        tau = max(config.mrf_tau_frac * float(scores.max()), tau_floor)
    unary = np.empty((len(lattice), 2))
    unary[:, 1] = config.mrf_gamma * (tau - scores)
    unary[:, 0] = config.mrf_gamma * (scores - tau)
    graph = SupportGraph(
        lattice=lattice,
        unary=unary,
        pairwise_beta=config.mrf_beta,
        forced_positive=np.fromiter(sorted(new_support), dtype=np.int64, count=len(new_support)),
    )
    return minimize(graph).labels, new_support


def trim_ls(
    received_i,
    effective,
    labels,
    trim_budget: int | None,
    noise_variance: float = 0.0,
    sig_level: float = 0.0,
    resolve: bool = False,
):
    """Least-squares refit on the +1-labeled columns, then keep the largest.

    Solves the minimum-norm least-squares problem against the active columns
    (well-posed or not), embeds the coefficients at their lattice positions
    and keeps only the trim_budget largest-magnitude entries. Optionally
    zeroes coefficients that are statistically insignificant against the
    noise variance and re-solves on the kept support so the survivors are
    refit without the pruned columns. Returns the estimate and whether the
    solve was underdetermined.
    """
    active = np.flatnonzero(np.asarray(labels) == 1)
    pilot_len = effective.shape[0]
    h_hat = np.zeros(effective.shape[1], dtype=complex)
    if active.size == 0:
        return h_hat, False
    underdetermined = active.size > pilot_len
    coef, *_ = np.linalg.lstsq(effective[:, active], received_i, rcond=None)
    h_hat[active] = coef
    if sig_level > 0.0 and noise_variance > 0.0:
        floor = sig_level * noise_variance / max(pilot_len - active.size, 1)
        h_hat[np.abs(h_hat) ** 2 < floor] = 0.0
    if trim_budget is not None and np.count_nonzero(h_hat) > trim_budget:
        keep = np.argsort(-np.abs(h_hat), kind="stable")[:trim_budget]
        mask = np.zeros(h_hat.size, dtype=bool)
        mask[keep] = True
        h_hat[~mask] = 0.0
    if resolve:
        kept = np.flatnonzero(h_hat)
        if kept.size and kept.size != active.size:
            coef2, *_ = np.linalg.lstsq(effective[:, kept], received_i, rcond=None)
            h_hat[:] = 0.0
            h_hat[kept] = coef2
    return h_hat, underdetermined


def nmse(truth, estimate) -> float:
    """Squared Frobenius error over squared Frobenius norm of the truth."""
    truth = np.asarray(truth)
    estimate = np.asarray(estimate)
    if truth.shape != estimate.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {estimate.shape}")
    denom = float(np.sum(np.abs(truth) ** 2))
    if denom == 0.0:
        raise ValueError("NMSE undefined for an all-zero truth")
    return float(np.sum(np.abs(truth - estimate) ** 2)) / denom


def _truth_matrix(truth, n_cells):
    if truth is None:
        return None
    if isinstance(truth, np.ndarray):
        mat = truth
    else:
        mat = np.column_stack([ch.h_f if isinstance(ch, UserChannel) else ch for ch in truth])
    if mat.shape[0] != n_cells:
        raise ValueError(f"truth has {mat.shape[0]} cells, expected {n_cells}")
    return mat


def _relative_change(cur: float, prev: float) -> float:
    if prev == 0.0:
        return 0.0 if cur == 0.0 else math.inf
    return abs(cur - prev) / prev


def _solve_set(labels, fitted, scores, solve_cap):
    """Columns for the refit: labeled cells plus the currently fitted ones.

    Fitted cells carry no residual correlation precisely because they are
    explained, so the labeling alone would drop them and their energy would
    slosh back into the residual; carrying them forward keeps the iteration
    a descent. If the set exceeds the cap, fitted cells take precedence and
    the rest are ranked by score.
    """
    solve = np.union1d(np.flatnonzero(labels == 1), fitted)
    if solve.size > solve_cap:
        rest = np.setdiff1d(solve, fitted)
        room = max(0, solve_cap - fitted.size)
        rest = rest[np.argsort(-scores[rest], kind="stable")][:room]
        solve = np.concatenate([fitted, rest])
        solve.sort()
    return solve


def _graph_cut_loop(
    measurements: MeasurementSet,
    basis: SparseBasis,
    lattice: WavenumberLattice,
    config: EstimatorConfig,
    joint: bool,
    truth=None,
) -> EstimationResult:
    effective = measurements.effective
    received = measurements.received
    n_users = measurements.num_users
    n_cells = effective.shape[1]
    pilot_len = measurements.pilot_len
    column_norms = np.linalg.norm(effective, axis=0)
    truth_mat = _truth_matrix(truth, n_cells)
    k_tilde = min(config.k_tilde, n_cells)

    solve_cap = max(1, int(config.solve_frac * pilot_len))
    trim_budget = min(config.trim_budget, n_cells) if config.trim_budget else n_cells
    trim_budget = min(trim_budget, solve_cap)
    tau_floor = config.mrf_tau_floor / math.sqrt(pilot_len)
    gate = config.noise_gate * pilot_len * measurements.noise_variance

    h_hat = np.zeros((n_cells, n_users), dtype=complex)
    supports = [set() for _ in range(n_users)]
    common: set = set()
    best_post = np.array([np.linalg.norm(received[i]) for i in range(n_users)])
    prev_norms = None
    trace: list[IterationRecord] = []
    converged = False
    underdetermined = 0
    iteration = 0
    empty = np.empty(0, dtype=np.int64)

    while iteration < config.max_iters:
        iteration += 1

        # Phase A: per-user residual correlation and candidate extraction.
        # Own accumulation prunes at eta on the raw scores; the vote lists
        # prune at eta relative to the iteration's best score, which keeps
        # them as wide as the candidate budget while the residual carries
        # structure. Both stop once the residual energy reaches the noise
        # floor, where further "candidates" would be coherence noise.
        res_norms = np.empty(n_users)
        all_scores = []
        own_cands = []
        vote_cands = []
        for i in range(n_users):
            residual, scores = residual_scores(
                received[i], effective, h_hat[:, i], column_norms)
            res_norms[i] = np.linalg.norm(residual)
            all_scores.append(scores)
            if res_norms[i] ** 2 > gate:
                own_cands.append(select_candidates(scores, k_tilde, config.eta))
                smax = float(scores.max())
                rel = scores / smax if smax > 0 else scores
                vote_cands.append(select_candidates(rel, k_tilde, config.eta))
            else:
                own_cands.append(empty)
                vote_cands.append(empty)

        # Phase B: joint vote (barrier across users).
        if joint:
            common = vote_common(vote_cands, config.k0, common, config.strict_vote)

        # Phase C: per-user merge, relabel, refit. A refit is kept only if
        # it does not raise the post-fit residual norm.
        for i in range(n_users):
            labels, supports[i] = merge_and_label(
                all_scores[i], supports[i], common, own_cands[i], lattice, config,
                tau_floor=tau_floor)
            solve = _solve_set(labels, np.flatnonzero(h_hat[:, i]),
                               all_scores[i], solve_cap)
            solve_labels = np.full(n_cells, -1, dtype=np.int64)
            solve_labels[solve] = 1
            h_new, under = trim_ls(
                received[i], effective, solve_labels, trim_budget,
                noise_variance=measurements.noise_variance,
                sig_level=config.sig_level, resolve=True)
            post_norm = float(np.linalg.norm(received[i] - effective @ h_new))
            if post_norm <= best_post[i] * (1.0 + 1e-12):
                h_hat[:, i] = h_new
                best_post[i] = post_norm
                underdetermined += under

        record = IterationRecord(
            iteration=iteration,
            residual_norms=res_norms,
            common_support_size=len(common),
            support_sizes=np.array([len(s) for s in supports]),
        )
        if truth_mat is not None:
            record.nmse_per_user = np.array([
                nmse(truth_mat[:, i], h_hat[:, i]) for i in range(n_users)])
            record.nmse_joint = nmse(truth_mat, h_hat)
        trace.append(record)

        if prev_norms is not None:
            changes = [_relative_change(c, p) for c, p in zip(res_norms, prev_norms)]
            if float(np.mean(changes)) < config.residual_tol:
                converged = True
                break
        prev_norms = res_norms

    final_residuals = received - (effective @ h_hat).T
    return EstimationResult(
        h_hat=h_hat,
        iterations=iteration,
        converged=converged,
        trace=trace,
        common_support=np.fromiter(sorted(common), dtype=np.int64, count=len(common)),
        final_residuals=final_residuals,
        underdetermined_solves=underdetermined,
    )


def jgc_ce(measurements, basis, lattice, config=EstimatorConfig(), truth=None) -> EstimationResult:
    """Joint graph-cut channel estimation across all users."""
    return _graph_cut_loop(measurements, basis, lattice, config, joint=True, truth=truth)


def gcse(measurements, basis, lattice, config=EstimatorConfig(), truth=None) -> EstimationResult:
    """Single-user graph-cut estimation: the joint loop with voting disabled.

    Accepts the same multi-user measurement set; each user is estimated from
    its own observations only, so for any user the result coincides with a
    standalone single-user run of the same loop.
    """
    return _graph_cut_loop(measurements, basis, lattice, config, joint=False, truth=truth)


def wd_omp(
    received_i,
    effective,
    config: EstimatorConfig = EstimatorConfig(),
    sparsity_budget: int | None = None,
    truth_i=None,
):
    """Orthogonal matching pursuit over the effective sensing matrix.

    Adds the single best-correlated index per iteration, refits by least
    squares on the accumulated support and stops after sparsity_budget
    iterations or once the residual norm stalls. Returns (h_hat, trace)
    where trace rows are (iteration, residual_norm, nmse_or_None).
    """
    received_i = np.asarray(received_i)
    pilot_len, n_cells = effective.shape
    if sparsity_budget is None:
        sparsity_budget = min(pilot_len, n_cells)
    if sparsity_budget > pilot_len:
        raise ValueError(f"sparsity_budget {sparsity_budget} exceeds pilot length {pilot_len}")
    column_norms = np.linalg.norm(effective, axis=0)

    support: list[int] = []
    h_hat = np.zeros(n_cells, dtype=complex)
    prev_norm = None
    trace = []
    for iteration in range(1, sparsity_budget + 1):
        residual, scores = residual_scores(received_i, effective, h_hat, column_norms)
        if float(np.linalg.norm(residual)) == 0.0:
            break
        best = int(np.argmax(scores))
        if best in support:
            break  # residual already orthogonal to every informative column
        support.append(best)
        coef, *_ = np.linalg.lstsq(effective[:, support], received_i, rcond=None)
        h_hat = np.zeros(n_cells, dtype=complex)
        h_hat[support] = coef

        err = nmse(truth_i, h_hat) if truth_i is not None else None
        post_norm = float(np.linalg.norm(received_i - effective @ h_hat))
        trace.append((iteration, post_norm, err))
        if prev_norm is not None and _relative_change(post_norm, prev_norm) < config.residual_tol:
            break
        prev_norm = post_norm
    return h_hat, trace
