from .classes import AdamState, MlpCache, MlpSpec, ParamBlock, ParamVector
from .mlp import as_mat, init_mlp_params, mlp_backward, mlp_forward
from .adam import adam_step, clip_grad_norm
from .gradcheck import GradCheckReport, gradient_check
