from dataclasses import asdict, dataclass


@dataclass
class LossParts:
    """Raw objective terms before weighting; surrogates are objectives to maximize"""
    on_policy_actor: float = 0.0
    off_policy_actor: float = 0.0
    critic_on: float = 0.0
    critic_off: float = 0.0
    entropy: float = 0.0
    bounds: float = 0.0
    clip_fraction_on: float = 0.0
    clip_fraction_off: float = 0.0
    approx_kl: float = 0.0
    offpolicy_dropped: int = 0


@dataclass
class LossBreakdown:
    """Weighted total plus every part; ``total`` is what the optimizer minimizes"""
    on_policy_actor: float
    off_policy_actor: float
    critic_on: float
    critic_off: float
    entropy: float
    bounds: float
    total: float
    clip_fraction_on: float
    clip_fraction_off: float
    approx_kl: float
    offpolicy_dropped: int = 0

    def to_dict(self) -> dict:
        return asdict(self)
