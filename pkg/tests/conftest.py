"""Shared fixtures: synthetic flow records in NSL-KDD file format.

The real KDDTrain+/KDDTest+ files are not redistributed with the repo;
tests that need them look under data/ (or $XNIDS_DATA_DIR) and skip when
absent. Everything else runs on synthetic records produced here.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from xnids.dataset import NSLKDD_FEATURES, CATEGORICAL

PROTOCOLS = ["tcp", "udp", "icmp"]
SERVICES = ["http", "private", "domain_u", "smtp", "ftp_data", "eco_i", "urp_i",
            "other"]
FLAGS = ["SF", "S0", "REJ", "RSTR"]
ATTACKS = ["neptune", "satan", "ipsweep", "smurf", "teardrop"]


def synth_lines(n, seed=0, attack_fraction=0.45, services=None):
    """Generate n synthetic flow records as NSL-KDD formatted lines.

    Attacks get systematically different numeric profiles so a classifier
    and rule learner have real signal to find.
    """
    rng = np.random.default_rng(seed)
    services = services or SERVICES
    lines = []
    for _ in range(n):
        is_attack = rng.random() < attack_fraction
        fields = []
        for feat in NSLKDD_FEATURES:
            if feat.kind == CATEGORICAL:
                if feat.name == "protocol_type":
                    v = rng.choice(PROTOCOLS, p=[0.6, 0.25, 0.15])
                elif feat.name == "service":
                    v = rng.choice(services)
                else:
                    v = rng.choice(FLAGS, p=[0.55, 0.25, 0.12, 0.08])
                fields.append(str(v))
            elif feat.kind == "binary":
                fields.append(str(int(rng.random() < 0.1)))
            elif feat.name in ("src_bytes", "dst_bytes"):
                base = rng.integers(0, 2000)
                fields.append(str(int(base // 4) if is_attack else int(base)))
            elif feat.name in ("count", "srv_count"):
                hi = 400 if is_attack else 60
                fields.append(str(int(rng.integers(0, hi))))
            elif feat.kind == "discrete":
                fields.append(str(int(rng.integers(0, 10))))
            else:  # continuous rates in [0, 1]
                if "serror" in feat.name or "rerror" in feat.name:
                    v = rng.beta(5, 2) if is_attack else rng.beta(1, 8)
                else:
                    v = rng.random()
                fields.append(f"{v:.2f}")
        label = rng.choice(ATTACKS) if is_attack else "normal"
        fields.append(label)
        fields.append(str(int(rng.integers(0, 22))))
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def synth_train_text():
    return synth_lines(600, seed=1)


@pytest.fixture(scope="session")
def synth_test_text():
    # a service unseen in training exercises the all-zero-group path
    return synth_lines(200, seed=2, services=SERVICES + ["uucp_path"])


@pytest.fixture(scope="session")
def flows(tmp_path_factory):
    root = tmp_path_factory.mktemp("flows")
    train = root / "train.txt"
    test = root / "test.txt"
    train.write_text(synth_lines(600, seed=1))
    test.write_text(synth_lines(200, seed=2, services=None))
    return train, test


@pytest.fixture(scope="session")
def pipeline(flows, tmp_path_factory):
    """Artifacts produced by the real CLI: dataset, model, rules."""
    from xnids.app.cli import main
    from xnids.dataset import load_dataset

    root = tmp_path_factory.mktemp("pipeline")
    train, test = flows
    dataset = root / "dataset.bin"
    model = root / "model.bin"
    rules = root / "rules.txt"

    assert main(["ingest", "--train", str(train), "--test", str(test),
                 "--out", str(dataset)]) == 0
    schema, _ = load_dataset(dataset)
    layers = f"{schema.n_encoded},32,2"
    assert main(["--seed", "3", "train", "--data", str(dataset),
                 "--epochs", "10", "--batch", "128", "--dropout", "0.05",
                 "--layers", layers, "--out", str(model)]) == 0
    assert main(["--seed", "3", "rules", "train", "--data", str(dataset),
                 "--out", str(rules)]) == 0
    return {"dataset": dataset, "model": model, "rules": rules, "root": root,
            "schema": schema}


def nslkdd_dir():
    root = os.environ.get("XNIDS_DATA_DIR", "data")
    return Path(root)


def require_nslkdd():
    d = nslkdd_dir()
    train = d / "KDDTrain+.txt"
    test = d / "KDDTest+.txt"
    if not train.exists() or not test.exists():
        pytest.skip(
            "NSL-KDD files not found: place KDDTrain+.txt and KDDTest+.txt "
            f"under {d}/ (or set XNIDS_DATA_DIR) to run dataset-bound checks"
        )
    return train, test
