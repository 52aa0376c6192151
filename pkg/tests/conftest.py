"""Shared spec builders for the test suite."""

import numpy as np
import pytest

from deepframe.archspec import parse_spec


def fc_spec(pattern, input_dim, widths, name=None):
    """A fully connected spec with the given connectivity pattern."""
    doc = {
        "input_dim": input_dim,
        "layers": [{"kind": "fully_connected", "width": w} for w in widths],
        "connectivity": pattern,
    }
    if name is not None:
        doc["name"] = name
    return parse_spec(doc)


def conv_spec(pattern, in_channels, spatial, widths, filt=3, stride=1, ndim=2,
              name=None):
    """A convolutional spec; channels chain from layer to layer."""
    layers = []
    prev = in_channels
    for w in widths:
        layers.append({"kind": "convolutional", "width": w, "channels": prev,
                       "spatial": spatial, "filter": filt, "stride": stride,
                       "ndim": ndim})
        prev = w
    doc = {"input_dim": in_channels * spatial ** ndim, "layers": layers,
           "connectivity": pattern}
    if name is not None:
        doc["name"] = name
    return parse_spec(doc)


def random_specs(count, rng=None, max_depth=4, max_width=16):
    """A reproducible stream of varied small specs, cycling the patterns.

    Residual specs force the odd depth and the matching widths the
    pattern requires; everything else draws freely.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    out = []
    patterns = ["chain", "dense", "residual"]
    while len(out) < count:
        pattern = patterns[len(out) % len(patterns)]
        d = int(rng.integers(2, 9))
        if pattern == "residual":
            depth = int(rng.choice([1, 3])) if max_depth >= 3 else 1
            widths = [int(rng.integers(2, max_width + 1)) for _ in range(depth)]
            for j in range(2, depth):
                widths[j] = widths[j - 2]
        else:
            depth = int(rng.integers(1, max_depth + 1))
            widths = [int(rng.integers(2, max_width + 1)) for _ in range(depth)]
        out.append(fc_spec(pattern, d, widths))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
