import numpy as np
import pytest

from emg2text.corpus import SynthConfig, generate_corpus


def numeric_gradient(f, x: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    """Central finite differences of a scalar function, element by element."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return grad


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    """20-utterance synthetic corpus shared by alignment/training tests."""
    out = tmp_path_factory.mktemp("corpus")
    cfg = SynthConfig(seed=11, n_utterances=20, time_warp_strength=0.3, noise_sigma=0.02)
    manifest, truths = generate_corpus(cfg, out)
    return cfg, manifest, truths
