from magnet.tensor.core import Parameter, Tensor, as_tensor, backward, is_grad_enabled, no_grad, zero_grad
from magnet.tensor.optim import Adam
