import numpy as np
import pytest

from sanlm import corpus as C
from sanlm.model import LanguageModel, ModelConfig
from sanlm.rng import RngState


def gradcheck(loss_fn, params, h=1e-5, tol=1e-3, floor=1e-6):
    """Compare analytic gradients against central finite differences.

    loss_fn() must run a fresh forward pass and return the scalar loss as
    a float. Gradients must already be populated on params. The floor
    absorbs double-precision noise in the difference quotient.
    """
    from sanlm.tensor import backward

    worst = 0.0
    where = None
    for p in params:
        g = p.grad.copy()
        it = np.nditer(p.data, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p.data[idx]
            p.data[idx] = orig + h
            up = loss_fn()
            p.data[idx] = orig - h
            down = loss_fn()
            p.data[idx] = orig
            fd = (up - down) / (2 * h)
            rel = abs(fd - g[idx]) / max(abs(fd), abs(g[idx]), floor)
            if rel > worst:
                worst, where = rel, (p.name, idx, fd, g[idx])
    assert worst < tol, f"gradient mismatch {worst:.2e} at {where}"
    return worst


def tiny_vocab(words=("move", "the", "vat", "over", "hot", "fire")):
    return C.Vocabulary(C.SPECIALS + list(words))


@pytest.fixture
def vocab():
    return tiny_vocab()


@pytest.fixture
def bi_config(vocab):
    return ModelConfig(mode="bidirectional", vocab_size=len(vocab),
                       num_layers=2, model_dim=16, num_heads=2,
                       ffn_dim=32, max_len=16, dropout_p=0.1)


@pytest.fixture
def uni_config(vocab):
    return ModelConfig(mode="unidirectional", vocab_size=len(vocab),
                       num_layers=2, model_dim=16, num_heads=2,
                       ffn_dim=32, max_len=16, dropout_p=0.1)


@pytest.fixture
def bi_model(bi_config):
    return LanguageModel.create(bi_config, RngState(11))


@pytest.fixture
def uni_model(uni_config):
    return LanguageModel.create(uni_config, RngState(12))
