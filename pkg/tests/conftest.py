import numpy as np
import pytest

from engagement.config import Settings
from engagement.simulator import GameConfig, generate_dataset
from engagement.skeleton import JOINT_INDEX, N_JOINTS, SkeletonStream
from engagement.workflow import train_on_corpus


def upright_pose():
    """Hand-built seated pose, torso at origin, facing -z."""
    p = np.zeros((N_JOINTS, 3))
    p[JOINT_INDEX["head"]] = (0.0, 0.30, 0.0)
    p[JOINT_INDEX["shoulder_left"]] = (-0.18, 0.20, 0.0)
    p[JOINT_INDEX["shoulder_right"]] = (0.18, 0.20, 0.0)
    p[JOINT_INDEX["elbow_left"]] = (-0.22, -0.05, 0.0)
    p[JOINT_INDEX["elbow_right"]] = (0.22, -0.05, 0.0)
    p[JOINT_INDEX["hand_left"]] = (-0.15, -0.20, -0.10)
    p[JOINT_INDEX["hand_right"]] = (0.15, -0.20, -0.10)
    p[JOINT_INDEX["torso"]] = (0.0, 0.0, 0.0)
    p[JOINT_INDEX["hip_left"]] = (-0.12, -0.15, 0.0)
    p[JOINT_INDEX["hip_right"]] = (0.12, -0.15, 0.0)
    return p


def constant_stream(pose, n, frame_rate=30.0, pid="P1", offset=(0.0, 0.0, 2.5)):
    t = np.arange(n) / frame_rate
    pos = np.broadcast_to(pose + np.asarray(offset), (n, N_JOINTS, 3))
    return SkeletonStream(pid, frame_rate, t, pos)


def random_stream(rng, n=None, labeled=None):
    n = int(rng.integers(1, 40)) if n is None else n
    t = np.cumsum(rng.uniform(0.001, 0.1, n))
    pos = rng.normal(0.0, 1.0, (n, N_JOINTS, 3)) * rng.choice([1e-3, 1.0, 1e3])
    labels = None
    label_set = None
    if labeled if labeled is not None else rng.random() < 0.5:
        label_set = sorted(rng.choice(np.arange(1, 7), size=int(rng.integers(1, 7)), replace=False).tolist())
        labels = rng.choice(label_set, n)
    return SkeletonStream(f"P{int(rng.integers(100))}", float(rng.uniform(1, 120)), t, pos, labels, label_set)


@pytest.fixture(scope="session")
def settings():
    return Settings()


@pytest.fixture(scope="session")
def corpus(settings):
    return generate_dataset(settings.game, settings.pairs)


@pytest.fixture(scope="session")
def model(corpus, settings):
    return train_on_corpus(corpus.streams, corpus.manifest, settings)


@pytest.fixture(scope="session")
def small_corpus_dir(tmp_path_factory):
    """One pair, one game, written to disk; shared by CLI and file-level tests."""
    out = tmp_path_factory.mktemp("small_corpus")
    generate_dataset(GameConfig(games=1, switches=4), pairs=1, out_dir=out, n_frames=800, n_train=300)
    return out
