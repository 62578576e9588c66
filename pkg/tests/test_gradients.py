"""Analytic gradients of every training loss against central finite differences."""
import numpy as np
import pytest
import torch

from modules.losses import (
    consistency_loss, cross_entropy_loss, dice_loss, supervised_sdf_loss, supervised_seg_loss,
)
from modules.model import NetworkConfig, build_network

EPS = 1e-6
REL_TOL = 1e-4
N_SAMPLED = 100


def _setup():
    cfg = NetworkConfig(dims=2, base_channels=2, depth=2, convs_per_stage=1)
    net = build_network(cfg, seed=11, dtype=torch.float64)
    gen = torch.Generator().manual_seed(3)
    x = torch.randn(2, 1, 4, 4, generator=gen, dtype=torch.float64)
    target = (torch.rand(2, 4, 4, generator=gen) > 0.5).long()
    target[:, 0, 0] = 1
    target[:, 3, 3] = 0
    sdf_target = torch.rand(2, 4, 4, generator=gen, dtype=torch.float64) * 2 - 1
    teacher_seg = torch.softmax(torch.randn(2, 2, 4, 4, generator=gen, dtype=torch.float64), dim=1)
    teacher_sdf = torch.tanh(torch.randn(2, 1, 4, 4, generator=gen, dtype=torch.float64))
    return net, x, target, sdf_target, teacher_seg, teacher_sdf


LOSSES = {
    "dice": lambda out, d: dice_loss(out["seg"][:, 1], d["target"]),
    "cross_entropy": lambda out, d: cross_entropy_loss(out["seg"], d["target"]),
    "supervised_seg": lambda out, d: supervised_seg_loss(out["seg"], d["target"]).value,
    "consistency_seg": lambda out, d: consistency_loss(out["seg"], d["teacher_seg"]),
    "mse_sdf": lambda out, d: consistency_loss(out["sdf"], d["teacher_sdf"]),
    "supervised_sdf": lambda out, d: supervised_sdf_loss(out["sdf"][:, 0], d["sdf_target"], k=50.0).value,
}


@pytest.mark.parametrize("name", sorted(LOSSES))
def test_gradient_matches_finite_differences(name):
    net, x, target, sdf_target, teacher_seg, teacher_sdf = _setup()
    data = {"target": target, "sdf_target": sdf_target,
            "teacher_seg": teacher_seg, "teacher_sdf": teacher_sdf}
    fn = LOSSES[name]

    def loss() -> torch.Tensor:
        return fn(net(x, heads="both"), data)

    params = list(net.parameters())
    net.zero_grad()
    loss().backward()
    analytic = torch.cat([p.grad.reshape(-1) if p.grad is not None else torch.zeros(p.numel(), dtype=p.dtype)
                          for p in params])

    flat_index = [(i, j) for i, p in enumerate(params) for j in range(p.numel())]
    # only parameters the loss actually depends on
    active = [k for k, g in enumerate(analytic) if g != 0]
    assert len(active) >= N_SAMPLED
    rng = np.random.default_rng(0)
    chosen = rng.choice(active, size=N_SAMPLED, replace=False)

    failures = []
    with torch.no_grad():
        for k in chosen:
            i, j = flat_index[k]
            view = params[i].view(-1)
            orig = view[j].item()
            view[j] = orig + EPS
            plus = loss().item()
            view[j] = orig - EPS
            minus = loss().item()
            view[j] = orig
            numeric = (plus - minus) / (2 * EPS)
            a = analytic[k].item()
            if abs(a - numeric) > REL_TOL * max(abs(a), abs(numeric)) + 1e-9:
                failures.append((k, a, numeric))
    assert not failures, failures[:5]
