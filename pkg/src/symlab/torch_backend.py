"""Optional torch-accelerated executor.

The numpy engine is the reference implementation; this executor exists
because single-core training of the full experiment grid is painfully
slow with BLAS-backed einsum convolutions.  It shares parameter memory
with the numpy ModelParams (torch.from_numpy), computes the same unrolled
forward/backward, and is pinned to the reference by equivalence tests.
Optimizer updates always go through the shared numpy adam_step.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .model import ModelParams, check_size_contract

torch.set_num_threads(1)


class TorchExecutor:
    def __init__(self, params: ModelParams):
        self.params = params
        self.arch = params.architecture
        # Leaves share memory with the numpy arrays, so in-place numpy
        # updates from adam_step are visible here without copying.
        self.leaves = {
            name: (
                torch.from_numpy(params.weights[name]).requires_grad_(True),
                torch.from_numpy(params.biases[name]).requires_grad_(True),
            )
            for name in params.weights
        }

    def _forward(self, x: torch.Tensor) -> torch.Tensor:
        for layer in self.arch:
            w, b = self.leaves[layer.name]
            c = layer.conv
            if layer.transposed:
                x = F.conv_transpose2d(
                    x, w, b, stride=c.stride, padding=c.padding,
                    output_padding=c.output_padding,
                )
            else:
                x = F.conv2d(x, w, b, stride=c.stride, padding=c.padding)
            x = F.relu(x)
        return x

    def loss_and_grads(self, inputs: np.ndarray, targets: np.ndarray, k: int):
        """Unrolled k-application forward, MSE on the final output only,
        backward through the whole chain; returns numpy grads."""
        check_size_contract(inputs.shape[2], inputs.shape[3])
        for w, b in self.leaves.values():
            w.grad = None
            b.grad = None
        x = torch.from_numpy(inputs)
        for _ in range(k):
            x = self._forward(x)
        loss = F.mse_loss(x, torch.from_numpy(targets))
        loss.backward()
        grads = {
            name: (w.grad.numpy().copy(), b.grad.numpy().copy())
            for name, (w, b) in self.leaves.items()
        }
        return float(loss.item()), grads

    def forward_numpy(self, x: np.ndarray) -> np.ndarray:
        """Inference-only forward pass for rollouts."""
        check_size_contract(x.shape[2], x.shape[3])
        with torch.no_grad():
            return self._forward(torch.from_numpy(x)).numpy()
