"""
Reversible-jump sampler for the drift posterior.

One iteration runs
  Move I    Gibbs update of the prior scale s^2,
  Move II   Metropolis-Hastings jump between models j, j +- 1, with the
            coefficients drawn from their full conditional on acceptance,
  Move III  (discrete data only) independent bridge proposals for every
            latent segment between two observations,
in this order. Every move draws from its own RNG substream keyed by
(seed, iteration, move), so a chain is a deterministic function of its
inputs and seed.
"""

import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats as sp_stats

from app.core.cache import FactorCache
from app.core.logging import get_logger
from app.core.rng import SeedLike, Stream, as_generator, get_rng
from app.models.dto import BasisSpec, BoolArray, Chain, ChainRecord, Path, PriorConfig
from app.models.errors import InvalidArgumentError, require_index
from app.services import linalg
from app.services.basis import drift_function, model_dim, xi_sq_vector
from app.services.diffusion import bridges_from_normals, linear_interpolation, log_girsanov_segments
from app.services.suffstats import SuffStats, compute

logger = get_logger(__name__)


class ChainState(BaseModel):
    """Current (j, theta, s^2) together with the statistics they are conditioned on."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    j: int
    theta: np.ndarray  # type: ignore[type-arg]
    s_sq: float
    stats: SuffStats

    @property
    def latent_path(self) -> Optional[Path]:
        """Imputed path in discrete-data mode, None otherwise."""
        if self.stats.segments is None:
            return None
        return self.stats.latent_path()


class ModelMove(BaseModel):
    """Outcome of one Move II step."""
    j_from: int
    j_to: int
    accept_prob: float
    accepted: bool


class DriftSampler:
    """
    Markov chain over (j, theta, s^2) and, for discrete data, the latent path.

    Args:
        spec: Basis specification
        prior: Scale, model and proposal hyperparameters
        seed: Master seed
        fixed_level: Keep j at this value (Move II only refreshes theta)
        fixed_scale: Keep s^2 at this value (Move I disabled)
        use_sparse: Use the sparse Schauder factorization
        cache_size: Capacity of the factor cache
        chunk_size: Rows per accumulation chunk for the statistics
        resync_every: Segment replacements between full recomputes
    """

    def __init__(
        self,
        spec: BasisSpec,
        prior: PriorConfig,
        seed: int,
        fixed_level: Optional[int] = None,
        fixed_scale: Optional[float] = None,
        use_sparse: bool = True,
        cache_size: int = 64,
        chunk_size: int = 65536,
        resync_every: int = 1000
    ):
        self.spec = spec
        self.prior = prior
        self.seed = int(seed)
        self.fixed_level = (
            require_index("fixed_level", fixed_level, 1, spec.j_max) if fixed_level is not None else None
        )
        self.fixed_scale = fixed_scale
        self.use_sparse = use_sparse
        self.chunk_size = chunk_size
        self.resync_every = resync_every
        self.cache = FactorCache(cache_size)
        self.last_model_move: Optional[ModelMove] = None
        self.last_bridge_accepts: Optional[BoolArray] = None

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    @property
    def proposal(self) -> Tuple[float, float, float]:
        if self.fixed_level is not None:
            return 1.0, 0.0, 0.0
        return self.prior.q_stay, self.prior.q_up, self.prior.q_down

    def log_model_prior(self, j: int) -> float:
        """log p(j) up to a constant: -C m_j."""
        return -self.prior.model_decay * model_dim(self.spec, j)

    def factor(self, stats: SuffStats, j: int, s_sq: float) -> linalg.PosteriorFactor:
        """Posterior factor of model j, cached per (j, s^2, statistics version)."""
        key = FactorCache.key(j, s_sq, stats.version)
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        factor = linalg.factor_for(stats, s_sq, j, use_sparse=self.use_sparse)
        self.cache.set(key, factor)
        return factor

    def initial_state(self, stats: SuffStats) -> ChainState:
        """j_0 = 1 (or the fixed level), s_0^2 = 1 (or the fixed scale), theta from its prior."""
        rng = get_rng(self.seed, Stream.INIT)
        j = self.fixed_level or 1
        s_sq = float(self.fixed_scale) if self.fixed_scale is not None else 1.0
        m = model_dim(self.spec, j)
        theta = np.sqrt(s_sq * xi_sq_vector(self.spec, m)) * rng.standard_normal(m)
        return ChainState(j=j, theta=theta, s_sq=s_sq, stats=stats)

    # ------------------------------------------------------------------
    # Moves
    # ------------------------------------------------------------------

    def move_scale(self, state: ChainState, seed: SeedLike) -> ChainState:
        """
        Move I: draw s^2 ~ IG(a + m_j / 2, b + 1/2 sum_l theta_l^2 / xi_l^2).

        A fixed scale leaves the state unchanged.
        """
        if self.fixed_scale is not None:
            return state
        rng = as_generator(seed)
        m = state.theta.size
        shape = self.prior.ig_shape + 0.5 * m
        rate = self.prior.ig_rate + 0.5 * float(np.sum(state.theta**2 / xi_sq_vector(self.spec, m)))
        s_sq = float(sp_stats.invgamma.rvs(shape, scale=rate, random_state=rng))
        return state.model_copy(update={"s_sq": s_sq})

    def move_model(self, state: ChainState, seed: SeedLike) -> ChainState:
        """
        Move II: propose j' from q(. | j) and accept with min(1, B(j'|j) R(j'|j)).

        Proposals outside 1..j_max are rejected. theta is drawn at j' only on
        acceptance; a j' = j proposal is always accepted and refreshes theta.
        The outcome is kept in ``last_model_move``.
        """
        rng = as_generator(seed)
        q_stay, q_up, q_down = self.proposal
        j = state.j
        u = rng.random()
        if u < q_stay:
            j_new = j
        elif u < q_stay + q_up:
            j_new = j + 1
        else:
            j_new = j - 1

        if j_new < 1 or j_new > state.stats.j_max:
            self.last_model_move = ModelMove(j_from=j, j_to=j_new, accept_prob=0.0, accepted=False)
            return state

        s_sq = state.s_sq
        if j_new == j:
            log_r = 0.0
            target = self.factor(state.stats, j, s_sq)
        else:
            log_r, target = self._log_ratio(state.stats, s_sq, j, j_new)

        accept_prob = math.exp(min(0.0, log_r))
        accepted = bool(rng.random() < accept_prob)
        self.last_model_move = ModelMove(j_from=j, j_to=j_new, accept_prob=accept_prob, accepted=accepted)
        if not accepted:
            return state

        theta = linalg.sample_coefficients(target, rng)
        return state.model_copy(update={"j": j_new, "theta": theta})

    def _log_ratio(
        self,
        stats: SuffStats,
        s_sq: float,
        j: int,
        j_new: int
    ) -> Tuple[float, linalg.PosteriorFactor]:
        """log B(j'|j) + log R(j'|j) and the factor of model j'."""
        q_stay, q_up, q_down = self.proposal
        big, small = max(j, j_new), min(j, j_new)
        big_factor = self.factor(stats, big, s_sq)
        if big_factor.is_sparse or big_factor.lower:
            small_factor = self.factor(stats, small, s_sq)
            log_b = linalg.log_predictive(big_factor) - linalg.log_predictive(small_factor)
        else:
            m_small = model_dim(self.spec, small)
            small_factor = big_factor.leading(small, m_small)
            log_b = linalg.log_bayes_factor_from_factor(big_factor, m_small)

        up = j_new > j
        log_b = log_b if up else -log_b
        q_forward, q_back = (q_up, q_down) if up else (q_down, q_up)
        if q_back <= 0.0:
            return -math.inf, big_factor if up else small_factor
        log_r = (
            log_b
            + self.log_model_prior(j_new)
            - self.log_model_prior(j)
            + math.log(q_back)
            - math.log(q_forward)
        )
        return log_r, big_factor if up else small_factor

    def move_bridges(self, state: ChainState, n_interior: int, iteration: int) -> ChainState:
        """
        Move III: propose a Brownian bridge for every segment and accept each
        with min(1, L_k(w) / L_k(x)) under the current drift.

        Segment k draws its normals and its acceptance uniform from the
        substream (seed, iteration, k), so its proposal does not depend on
        the other segments. Accepted rows are swapped into the statistics in
        one batch. Per-segment outcomes are kept in ``last_bridge_accepts``.
        """
        cache = state.stats.segments
        if cache is None:
            raise InvalidArgumentError(["state"], "bridge updates need discrete-data statistics")
        if n_interior == 0:
            self.last_bridge_accepts = np.ones(cache.n_segments, dtype=bool)
            return state

        drift = drift_function(self.spec, state.theta)
        current = cache.values
        t_len = cache.dt * (cache.points_per_segment - 1)
        normals = np.empty((cache.n_segments, n_interior + 1))
        uniforms = np.empty(cache.n_segments)
        for k in range(cache.n_segments):
            rng = get_rng(self.seed, iteration, Stream.BRIDGES, k + 1)
            normals[k] = rng.standard_normal(n_interior + 1)
            uniforms[k] = rng.random()
        proposals = bridges_from_normals(current[:, 0], current[:, -1], t_len, normals)
        log_r = log_girsanov_segments(drift, proposals, cache.dt) - log_girsanov_segments(
            drift, current, cache.dt
        )
        accepted = uniforms < np.exp(np.minimum(log_r, 0.0))
        rows = np.flatnonzero(accepted)
        if rows.size:
            state.stats.replace_segments(rows, proposals[rows])
            self.cache.invalidate(state.stats.version)
        self.last_bridge_accepts = accepted
        return state

    # ------------------------------------------------------------------
    # Runs
    # ------------------------------------------------------------------

    def run_continuous(self, path: Path, iters: int, burn_in: int) -> Chain:
        """
        Alternate Move I and Move II on statistics computed once at j_max.

        Raises:
            InvalidArgumentError: If burn_in exceeds iters
        """
        stats = compute(self.spec, path, self.spec.j_max, chunk_size=self.chunk_size)
        return self._run(stats, "continuous", iters, burn_in, n_interior=None)

    def run_discrete(self, observations: Path, n_interior: int, iters: int, burn_in: int) -> Chain:
        """
        Discrete-data chain with n_interior imputed points per segment.

        The latent path starts as the linear interpolation of the
        observations. With n_interior = 0 the chain equals run_continuous on
        the observations.
        """
        n_interior = require_index("n_interior", n_interior, 0)
        latent = linear_interpolation(observations, n_interior)
        stats = compute(
            self.spec,
            latent,
            self.spec.j_max,
            n_interior=n_interior,
            chunk_size=self.chunk_size,
            resync_every=self.resync_every,
        )
        return self._run(stats, "discrete", iters, burn_in, n_interior=n_interior)

    def _run(
        self,
        stats: SuffStats,
        mode: str,
        iters: int,
        burn_in: int,
        n_interior: Optional[int]
    ) -> Chain:
        iters = require_index("iters", iters, 0)
        burn_in = require_index("burn_in", burn_in, 0)
        if burn_in > iters:
            raise InvalidArgumentError(["burn_in"], f"burn_in ({burn_in}) exceeds iters ({iters})")

        self.cache.clear()
        state = self.initial_state(stats)
        bridges = n_interior is not None and n_interior > 0
        n_segments = stats.segments.n_segments if stats.segments is not None else 0
        segment_accepts = np.zeros(n_segments, dtype=np.int64) if n_interior is not None else None
        records: List[ChainRecord] = []
        pair_counts: Dict[str, List[float]] = {}
        step = max(1, iters // 10)

        logger.info(
            "Starting chain",
            mode=mode,
            family=self.spec.family.value,
            j_max=stats.j_max,
            iters=iters,
            burn_in=burn_in,
            n_segments=n_segments
        )

        for it in range(iters):
            state = self.move_scale(state, get_rng(self.seed, it, Stream.SCALE))
            state = self.move_model(state, get_rng(self.seed, it, Stream.MODEL))
            move = self.last_model_move

            bridge_rate = None
            if bridges:
                state = self.move_bridges(state, n_interior, it)
                segment_accepts += self.last_bridge_accepts
                bridge_rate = float(np.mean(self.last_bridge_accepts))

            if move is not None and 1 <= move.j_to <= stats.j_max:
                pair = pair_counts.setdefault(f"{move.j_from}->{move.j_to}", [0.0, 0.0])
                pair[0] += move.accept_prob
                pair[1] += 1

            if it >= burn_in:
                mean = linalg.posterior_mean(self.factor(state.stats, state.j, state.s_sq))
                records.append(
                    ChainRecord(
                        iteration=it,
                        j_from=move.j_from if move else state.j,
                        j=state.j,
                        s_sq=state.s_sq,
                        theta=np.array(state.theta),
                        posterior_mean=mean,
                        proposed_j=move.j_to if move else state.j,
                        model_accept_prob=move.accept_prob if move else 1.0,
                        model_accepted=move.accepted if move else True,
                        bridge_accept_rate=bridge_rate,
                    )
                )

            if (it + 1) % step == 0 or it + 1 == iters:
                logger.info(
                    "Chain progress",
                    iteration=it + 1,
                    iters=iters,
                    j=state.j,
                    s_sq=round(state.s_sq, 6),
                    bridge_accept_rate=bridge_rate,
                    cache_hits=self.cache.hits,
                    cache_misses=self.cache.misses
                )

        logger.info(
            "Chain finished",
            records=len(records),
            acceptance={k: round(v[0] / v[1], 4) for k, v in sorted(pair_counts.items())}
        )
        return Chain(
            mode=mode,
            iters=iters,
            burn_in=burn_in,
            records=records,
            n_segments=n_segments,
            segment_accept_counts=segment_accepts,
        )


def run_continuous(
    path: Path,
    spec: BasisSpec,
    prior: PriorConfig,
    iters: int,
    burn_in: int,
    seed: int,
    **options: Any
) -> Chain:
    """Functional entry point for the continuous-observations chain."""
    return DriftSampler(spec, prior, seed, **options).run_continuous(path, iters, burn_in)


def run_discrete(
    observations: Path,
    spec: BasisSpec,
    prior: PriorConfig,
    n_interior: int,
    iters: int,
    burn_in: int,
    seed: int,
    **options: Any
) -> Chain:
    """Functional entry point for the discrete-observations chain."""
    return DriftSampler(spec, prior, seed, **options).run_discrete(observations, n_interior, iters, burn_in)
