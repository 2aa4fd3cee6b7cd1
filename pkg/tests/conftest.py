import numpy as np
import pytest

SR = 16000


@pytest.fixture(scope="session")
def sr():
    return SR


def sine(freq, seconds=1.0, sr=SR, amp=1.0, phase=0.0):
    t = np.arange(int(seconds * sr)) / sr
    return amp * np.sin(2 * np.pi * freq * t + phase)


def sawtooth(freq, seconds=1.0, sr=SR, amp=1.0):
    t = np.arange(int(seconds * sr)) / sr
    return amp * (2.0 * ((freq * t) % 1.0) - 1.0)


def pulse_train(period, seconds=1.0, sr=SR, amp=1.0):
    x = np.zeros(int(seconds * sr))
    x[::period] = amp
    return x


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    """Small separable corpus shared by pipeline-level tests."""
    from adrspeech.manifest import write_manifest
    from adrspeech.synth import generate_synthetic_corpus

    root = tmp_path_factory.mktemp("corpus")
    entries = generate_synthetic_corpus(root, n_per_class=6, seed=11)
    train = [e for e in entries if int(e.id[2:]) < 4]
    test = [e for e in entries if int(e.id[2:]) >= 4]
    write_manifest(root / "train.csv", train)
    write_manifest(root / "test.csv", test)
    return {"root": root, "entries": entries, "train": train, "test": test,
            "train_manifest": root / "train.csv", "test_manifest": root / "test.csv"}
