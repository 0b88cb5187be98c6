"""Minimal n-dimensional value/gradient carrier for the network stack."""

from typing import Optional

import numpy as np


class Tensor:
    """A numpy array paired with an optional same-shape gradient buffer."""

    __slots__ = ("data", "grad")

    def __init__(self, data: np.ndarray, grad: Optional[np.ndarray] = None):
        self.data = np.asarray(data)
        if grad is not None and grad.shape != self.data.shape:
            raise ValueError("gradient shape must match data shape")
        self.grad = grad

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g
