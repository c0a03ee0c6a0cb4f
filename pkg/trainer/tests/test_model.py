import numpy as np
import pytest
import torch

from fanet_trainer.container import export_container_bytes
from fanet_trainer.model import ArchConfig, FaNet


def test_forward_shape_and_nonnegativity():
    torch.manual_seed(0)
    model = FaNet(ArchConfig())
    for t in (1, 22, 47):
        out = model.frame_outputs(torch.randn(64, 16, t))
        assert out.shape == (t,)
        assert torch.all(out >= 0.0)


def test_forward_parity_with_inference_implementation():
    from monoloc.fanet import build, load_weights
    from monoloc.features import SubbandTensor

    torch.manual_seed(4)
    model = FaNet(ArchConfig())
    inference = build(
        load_weights(export_container_bytes(model)).config,
        weights=load_weights(export_container_bytes(model)),
    )
    rng = np.random.default_rng(5)
    for t in (22, 47):
        x = rng.normal(size=(64, 16, t)).astype(np.float32)
        ours = model.frame_outputs(torch.from_numpy(x)).numpy()
        theirs = inference.forward(SubbandTensor(x, 16)).values
        np.testing.assert_allclose(ours, theirs, atol=1e-4)


def test_trainable_parameter_count():
    model = FaNet(ArchConfig())
    trainable = sum(p.numel() for p in model.parameters())
    assert trainable == 43_334


def test_gradients_reach_every_parameter():
    torch.manual_seed(6)
    model = FaNet(ArchConfig(fa_blocks=1))
    out = model(torch.randn(2, 64, 16, 9))
    loss = ((out - 1.0) ** 2).mean()
    loss.backward()
    missing = [n for n, p in model.named_parameters() if p.grad is None]
    assert not missing, f"no gradient for {missing}"
