from .classes import LossBreakdown, LossParts
from .losses import (clipped_terms, combine, critic_loss_off, critic_loss_on, off_policy_keep_mask,
                     off_policy_surrogate, on_policy_surrogate)
