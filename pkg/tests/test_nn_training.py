import numpy as np
import pytest

from envmorph.errors import InvalidArgument
from envmorph.nn.checkpoint import load_checkpoint, save_checkpoint
from envmorph.nn.models import Autoencoder, Mapper
from envmorph.nn.train import TrainConfig, train_autoencoder, train_mapper
from envmorph.seeding import NS_AE_CORPUS
from envmorph.synth import generate_envelope_corpus, DatasetConfig, iter_dataset_tuples
from envmorph.envelope import FRAME_COUNT


@pytest.fixture(scope="module")
def corpus():
    return generate_envelope_corpus(96, 0, NS_AE_CORPUS)


@pytest.fixture(scope="module")
def tuples():
    cfg = DatasetConfig(count=24, base_seed=5)
    return list(iter_dataset_tuples(cfg))


class TestTrainAutoencoder:
    def test_loss_decreases(self, corpus):
        cfg = TrainConfig(steps=120, batch_size=32, seed=0)
        _, log = train_autoencoder(corpus, cfg)
        assert log[-20:, 1].mean() < log[:5, 1].mean()

    def test_deterministic(self, corpus):
        cfg = TrainConfig(steps=25, batch_size=32, seed=4)
        m1, log1 = train_autoencoder(corpus, cfg)
        m2, log2 = train_autoencoder(corpus, cfg)
        assert np.array_equal(log1, log2)
        for p1, p2 in zip(m1.parameters(), m2.parameters()):
            assert np.array_equal(p1, p2)

    def test_zero_learning_rate_is_noop(self, corpus):
        cfg = TrainConfig(steps=10, batch_size=32, seed=0, learning_rate=0.0)
        model, _ = train_autoencoder(corpus, cfg)
        reference = Autoencoder(cfg.seed)
        for p1, p2 in zip(model.parameters(), reference.parameters()):
            assert np.array_equal(p1, p2)

    def test_dataset_too_small(self):
        with pytest.raises(InvalidArgument):
            train_autoencoder(np.zeros((4, FRAME_COUNT), dtype=np.float32), TrainConfig(steps=1))


class TestTrainMapper:
    def test_frozen_autoencoder(self, corpus, tuples):
        ae, _ = train_autoencoder(corpus, TrainConfig(steps=10, batch_size=32, seed=0))
        before = [p.copy() for p in ae.parameters()]
        mapper, _, _ = train_mapper(tuples, ae, TrainConfig(epochs=3, batch_size=8, seed=1))
        for b, a in zip(before, ae.parameters()):
            assert np.array_equal(b, a)

    def test_embedding_loss_decreases(self, corpus, tuples):
        ae, _ = train_autoencoder(corpus, TrainConfig(steps=30, batch_size=32, seed=0))
        _, _, epoch_means = train_mapper(
            tuples, ae, TrainConfig(epochs=10, batch_size=8, seed=1)
        )
        assert epoch_means[-1] < epoch_means[0]

    def test_deterministic(self, corpus, tuples):
        ae, _ = train_autoencoder(corpus, TrainConfig(steps=5, batch_size=32, seed=0))
        cfg = TrainConfig(epochs=2, batch_size=8, seed=9)
        m1, log1, _ = train_mapper(tuples, ae, cfg)
        m2, log2, _ = train_mapper(tuples, ae, cfg)
        assert np.array_equal(log1, log2)
        for p1, p2 in zip(m1.parameters(), m2.parameters()):
            assert np.array_equal(p1, p2)

    def test_empty_dataset(self, corpus):
        ae = Autoencoder(seed=0)
        with pytest.raises(InvalidArgument):
            train_mapper([], ae, TrainConfig())


class TestCheckpoint:
    def test_autoencoder_round_trip_bitwise(self, corpus, tmp_path, rng):
        model, _ = train_autoencoder(corpus, TrainConfig(steps=5, batch_size=32, seed=0))
        path = tmp_path / "ae.ckpt"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path, expected_kind="autoencoder")
        env = rng.random((1, FRAME_COUNT)).astype(np.float32)
        assert np.array_equal(model.encode_batch(env), loaded.encode_batch(env))

    def test_mapper_round_trip_bitwise(self, tmp_path, rng):
        model = Mapper(seed=12)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path, expected_kind="mapper")
        feats = rng.standard_normal((3, 192)).astype(np.float32)
        assert np.array_equal(model.forward_batch(feats), loaded.forward_batch(feats))

    def test_corruption_detected(self, tmp_path):
        from envmorph.errors import CorruptCheckpoint

        model = Mapper(seed=0)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        blob = path.read_bytes()

        bad_magic = tmp_path / "bad_magic.ckpt"
        bad_magic.write_bytes(b"NOPE" + blob[4:])
        with pytest.raises(CorruptCheckpoint):
            load_checkpoint(bad_magic)

        truncated = tmp_path / "trunc.ckpt"
        truncated.write_bytes(blob[:-100])
        with pytest.raises(CorruptCheckpoint):
            load_checkpoint(truncated)

        trailing = tmp_path / "trail.ckpt"
        trailing.write_bytes(blob + b"\x00\x00")
        with pytest.raises(CorruptCheckpoint):
            load_checkpoint(trailing)

        with pytest.raises(CorruptCheckpoint):
            load_checkpoint(path, expected_kind="autoencoder")

    def test_descriptor_mismatch(self, tmp_path):
        from envmorph.errors import CorruptCheckpoint
        import json
        import struct

        model = Mapper(seed=0)
        path = tmp_path / "m.ckpt"
        save_checkpoint(model, path)
        blob = path.read_bytes()
        magic, version, desc_len = struct.unpack_from("<4sII", blob)
        desc = json.loads(blob[12 : 12 + desc_len])
        desc["layers"][0]["in"] = 100  # tamper with a layer shape
        new_desc = json.dumps(desc, sort_keys=True, separators=(",", ":")).encode()
        tampered = tmp_path / "tampered.ckpt"
        tampered.write_bytes(struct.pack("<4sII", magic, version, len(new_desc)) + new_desc + blob[12 + desc_len :])
        with pytest.raises(CorruptCheckpoint):
            load_checkpoint(tampered)
