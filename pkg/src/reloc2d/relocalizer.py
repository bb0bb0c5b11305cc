"""Per-viewpoint orchestration: feed measurements to the local mapper,
generate hypotheses for newly arrived features, run the configured scoring
scheme for the fixed pair budget, and expose the current global pose
estimate (best transform composed with the local pose)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .geometry import EPS_DEGENERATE, Pose2, compose
from .hypotheses import HypothesisStore, best_hypothesis, generate_hypotheses
from .local_map import LocalMap
from .scheduling import (StepStats, begin_viewpoint, make_state,
                         run_viewpoint_hybrid, run_viewpoint_sweep)
from .world import InvalidParams


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "hybrid"
    n_pairs: int = 1000          # per-viewpoint pair budget
    inlier_gate: float = 0.35    # m; scoring gate
    verify_gate: float = 0.25    # m; third-feature check in generation
    select_radius: float = 3.0   # m; max feature distance from a sampled location
    q_min: int = 25              # scoring count for the normalized rule
    h_new: int = 96              # max hypotheses per new feature
    t_retry: int = 4             # triples tried while nothing verifies
    max_pair_candidates: int = 4096
    pair_tol: float = 0.05       # m; congruent-pair separation window
    min_pair_sep: float = EPS_DEGENERATE
    k_groups: int = 10
    m_exponent: int = 1
    beta_prime: float = 0.2      # priming share of the budget
    pair_retry: int = 7          # blocked-selection resamples
    retire_enabled: bool = True
    retire_q: int = 12
    retire_r: float = 0.15

    def validate(self):
        if self.scheme not in ("depth", "breadth", "hybrid"):
            raise InvalidParams(f"scheme must be depth|breadth|hybrid, "
                                f"got {self.scheme!r}")
        if self.n_pairs < 1:
            raise InvalidParams("n_pairs must be >= 1")
        if self.inlier_gate <= 0 or self.verify_gate <= 0:
            raise InvalidParams("gates must be > 0")
        if not 0.0 <= self.beta_prime < 1.0:
            raise InvalidParams("beta_prime must be in [0, 1)")
        if self.k_groups < 1:
            raise InvalidParams("k_groups must be >= 1")
        if self.h_new < 1 or self.t_retry < 1:
            raise InvalidParams("h_new and t_retry must be >= 1")
        return self


class Relocalizer:
    """One instance per trial; single owner, strictly sequential steps.
    The local map estimate never depends on hypothesis scoring (the state
    factors into local map times transform), so identical measurement
    streams yield identical local maps under every scheme."""

    def __init__(self, gmap, config: SchemeConfig, rng, range_sigma=0.01,
                 bearing_sigma=0.0087266462599716477):
        config.validate()
        self.gmap = gmap
        self.config = config
        self.rng = rng
        self.lm = LocalMap(range_sigma=range_sigma,
                           bearing_sigma=bearing_sigma,
                           backend=gmap.backend)
        self.store = HypothesisStore()
        self.state = make_state(config.scheme, gmap.backend)
        self.viewpoint = 0
        self.last_stats = None

    def step(self, odo, observations) -> StepStats:
        """Process one viewpoint: local map update, hypothesis generation
        for each new feature, list updates, then exactly n_pairs budget
        consumptions (once any hypothesis and feature exist)."""
        cfg = self.config
        stats = StepStats(viewpoint=self.viewpoint)
        self.lm.update(odo, observations)
        new_feats = list(self.lm.new_feature_ids)
        new_hyps = []
        for fid in new_feats:
            new_hyps.extend(
                generate_hypotheses(self.lm, self.gmap, fid, cfg, self.rng,
                                    self.store, self.viewpoint))
        stats.new_features = len(new_feats)
        stats.new_hypotheses = len(new_hyps)
        begin_viewpoint(self.state, new_feats, new_hyps, self.rng)
        if self.store.n > 0 and self.lm.n_features > 0:
            if cfg.scheme == "hybrid":
                best = best_hypothesis(self.store, cfg.q_min)
                best_id = best.id if best is not None else None
                run_viewpoint_hybrid(self.state, self.store, self.lm,
                                     self.gmap, cfg, self.rng, best_id,
                                     new_hyps, stats)
            else:
                run_viewpoint_sweep(self.state, self.store, self.lm,
                                    self.gmap, cfg, stats)
        self.viewpoint += 1
        self.last_stats = stats
        return stats

    def estimate(self):
        """Current global pose estimate: best transform composed with the
        local-frame robot pose. Pure read; returns (pose, confidence) or
        None while no hypothesis exists."""
        best = best_hypothesis(self.store, self.config.q_min)
        if best is None:
            return None
        return compose(best.psi, self.lm.pose), best.r
