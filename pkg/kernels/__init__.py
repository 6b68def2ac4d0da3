# Kernels package
from .config import DEFAULT_KERNEL_CONFIG, KernelConfig
from .green import green_gradient, mollified_green_gradient, mollifier_transform
from .heat import grad_q, heat_kernel, hess_q, q_kernel, q_zero_at_origin
from .inequalities import kernel_inequality_report
