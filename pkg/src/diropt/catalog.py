"""Named example models shipped as JSON under ``diropt/fixtures``.

``build_fixtures()`` is the single source of truth; the shipped files are its
serialization and ``diropt fixtures DIR`` regenerates them.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from . import io
from .channel import ChannelModel, InputPolicy, compose_channel_joint
from .models import TestChannelModel, compose_joint
from .optimality import DistortionTable, synthesize_cost
from .stock import build_chain, build_policy, distortion_table

STOCK2 = dict(p=(0.5,), q=(0.5,), epsilon=0.2)
STOCK3 = dict(p=(0.3, 0.3), q=(0.2, 0.4), epsilon=0.1)
BSC_FLIP = 0.1


def bsc(flip: float) -> ChannelModel:
    return ChannelModel.from_array((0, 1), (0, 1), 0, 0, [[[1 - flip, flip]], [[flip, 1 - flip]]])


def uniform_policy() -> InputPolicy:
    return InputPolicy.iid((0, 1), (0, 1), [0.5, 0.5])


def _stock(params):
    chain = build_chain(params["p"], params["q"])
    policy = build_policy(chain, params["epsilon"])
    return chain, policy, compose_joint(chain.source, policy), distortion_table(chain)


def build_fixtures() -> dict:
    out = {}
    for name, params in (("stock2", STOCK2), ("stock3", STOCK3)):
        chain, policy, joint, table = _stock(params)
        out[f"{name}_source"] = chain.source
        out[f"{name}_policy"] = policy
        out[f"{name}_joint"] = joint
        out[f"{name}_distortion"] = table

    table = out["stock2_distortion"]
    # a cell alone in its offset group would be absorbed by d0
    groups = [xw for xw, _ in table.values]
    cell = next(c for c in sorted(table.values) if groups.count(c[0]) > 1)
    bumped = dict(table.values)
    bumped[cell] += 0.05
    out["stock2_distortion_perturbed"] = DistortionTable(table.order, table.delay, bumped)
    out["stock2_distortion_constant"] = DistortionTable(
        table.order, table.delay, {c: 1.0 for c in table.values}
    )

    source = out["stock3_source"]
    S, X = source.n_states, len(source.alphabet)
    mu = np.broadcast_to([0.7, 0.3], (S, X, 2))
    independent = TestChannelModel.from_array(source.alphabet, (0, 1), source.order, mu)
    out["independent_joint"] = compose_joint(source, independent)

    channel, policy = bsc(BSC_FLIP), uniform_policy()
    out["bsc_channel"] = channel
    out["uniform_policy"] = policy
    out["bsc_cost"] = synthesize_cost(compose_channel_joint(channel, policy), 1.0)
    out["noiseless_channel"] = bsc(0.0)
    return out


def write_fixtures(directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, obj in build_fixtures().items():
        path = directory / f"{name}.json"
        io.save(obj, path)
        paths.append(path)
    return paths


def fixture_path(name: str) -> Path:
    """Path of a shipped fixture, e.g. ``fixture_path("stock2_joint")``."""
    path = resources.files("diropt") / "fixtures" / f"{name}.json"
    if not path.is_file():
        raise FileNotFoundError(f"no shipped fixture named {name!r}")
    return Path(str(path))


def load_fixture(name: str):
    return io.load(fixture_path(name))
