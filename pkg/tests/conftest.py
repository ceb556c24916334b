import numpy as np
import pytest

from mipr import _kernels
from mipr.network import Activation, LinearLayer, Network, build_network


def random_net(rng, dims, scale=1.0):
    params = [
        (rng.normal(0.0, scale / np.sqrt(a), size=(b, a)), rng.normal(0.0, 0.1, size=b))
        for a, b in zip(dims[:-1], dims[1:])
    ]
    return build_network(params)


def identity_net(dim=2, activation=Activation.IDENTITY):
    return Network((LinearLayer(np.eye(dim), np.zeros(dim), activation),), dim)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=_kernels.available_backends())
def backend(request):
    return request.param
