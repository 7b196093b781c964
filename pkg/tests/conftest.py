import pytest

from regionsep.dataset import DatasetConfig, generate_synthetic_tracks, write_manifest
from regionsep.pipeline import SpecStore, precompute_manifest
from regionsep.precompute import PrecomputeConfig


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory):
    """Small shared corpus: 6 tracks (5 train, 1 test), 3 clips each."""
    root = tmp_path_factory.mktemp("corpus") / "ds"
    cfg = DatasetConfig(num_tracks=6, duration=12.0)
    tracks = generate_synthetic_tracks(cfg, seed=0)
    write_manifest(str(root), tracks, seed=0)
    pcfg = PrecomputeConfig(max_subset_card=2, max_specs_per_clip=12)
    precompute_manifest(str(root), pcfg, pca_dim=4)
    return str(root)


@pytest.fixture(scope="session")
def store(corpus_root):
    return SpecStore(corpus_root)
