"""First-order update rules acting on flat parameter vectors."""

import numpy as np


def clip_by_norm(grad, max_norm):
    """Rescale ``grad`` to norm ``max_norm`` if it is longer; otherwise return it untouched."""
    if max_norm is None:
        return grad
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


class Sgd:
    def __init__(self, lr):
        if not lr > 0:
            raise ValueError("step size must be positive")
        self.lr = lr

    def direction(self, grad):
        return self.lr * grad


class Adam:
    """Adam with bias correction; ``direction`` returns the step to subtract."""

    def __init__(self, lr=2e-4, beta1=0.5, beta2=0.999, eps=1e-8):
        if not lr > 0:
            raise ValueError("learning rate must be positive")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def direction(self, grad):
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(name, step_size, adam_params):
    if name == "sgd":
        return Sgd(step_size)
    if name == "adam":
        return Adam(*adam_params)
    raise ValueError(f"unknown optimizer {name!r}")


def simultaneous_step(theta, omega, grad_theta, grad_omega, eta):
    """One single-step gradient update: descend in theta, ascend in omega, same iterate."""
    return theta - eta * grad_theta, omega + eta * grad_omega
