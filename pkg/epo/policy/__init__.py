from .classes import ActorCriticParams, GaussianAction, LatentGene, LOG_STD_MAX, LOG_STD_MIN
from .policy_net import (act, action_mean, bounds_loss, bounds_loss_grad, build_actor_critic, conditioned_input,
                         gaussian_entropy, gaussian_log_prob, init_genes, log_prob_and_entropy, value)
