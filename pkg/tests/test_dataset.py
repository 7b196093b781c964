import json

import numpy as np
import pytest

from regionsep.dataset import (ARCHETYPES, ClipIndex, DatasetConfig, Manifest,
                               Stem, StemTrack, chunk_track, clip_audio,
                               generate_synthetic_tracks, ingest_stem_folder,
                               mix, silence_like, split_of, write_manifest)
from regionsep.embedding import mock_embed
from regionsep.signal import AudioChunk, write_wav

SMALL = DatasetConfig(num_tracks=4, duration=12.0)


class TestGeneration:
    def test_deterministic_byte_identical(self):
        a = generate_synthetic_tracks(SMALL, seed=1)
        b = generate_synthetic_tracks(SMALL, seed=1)
        for ta, tb in zip(a, b):
            assert ta.track_id == tb.track_id
            for sa, sb in zip(ta.stems, tb.stems):
                assert sa.stem_id == sb.stem_id
                assert np.array_equal(sa.audio.samples, sb.audio.samples)

    def test_seed_changes_content(self):
        a = generate_synthetic_tracks(SMALL, seed=1)
        b = generate_synthetic_tracks(SMALL, seed=2)
        assert not np.array_equal(a[0].stems[0].audio.samples,
                                  b[0].stems[0].audio.samples)

    def test_track_independence(self):
        # per-track rng streams: track k identical regardless of corpus size
        few = generate_synthetic_tracks(DatasetConfig(num_tracks=2, duration=12.0), seed=3)
        many = generate_synthetic_tracks(DatasetConfig(num_tracks=4, duration=12.0), seed=3)
        assert np.array_equal(few[1].stems[0].audio.samples,
                              many[1].stems[0].audio.samples)

    def test_stem_counts_and_shapes(self):
        for track in generate_synthetic_tracks(SMALL, seed=4):
            assert SMALL.min_stems <= len(track.stems) <= SMALL.max_stems
            for stem in track.stems:
                assert stem.audio.samples.shape == (2, 12 * 16000)
                assert stem.class_label in ARCHETYPES

    def test_unique_classes_within_track(self):
        for track in generate_synthetic_tracks(SMALL, seed=5):
            labels = [s.class_label for s in track.stems]
            assert len(labels) == len(set(labels))

    def test_class_centroids_separated(self):
        # the class-to-frequency-band design must be visible to the embedder
        tracks = generate_synthetic_tracks(
            DatasetConfig(num_tracks=8, duration=12.0), seed=6)
        by_class = {}
        for track in tracks:
            for stem in track.stems:
                clip = AudioChunk(stem.audio.samples[:, :16000 * 2], 16000)
                by_class.setdefault(stem.class_label, []).append(mock_embed(clip))
        cents = {k: np.mean(v, axis=0) for k, v in by_class.items()}
        names = sorted(cents)
        assert len(names) >= 6
        cosines = []
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                cos = cents[a] @ cents[b] / (
                    np.linalg.norm(cents[a]) * np.linalg.norm(cents[b]))
                cosines.append(cos)
                # spectrally adjacent classes may overlap, but none collapse
                assert cos < 0.97, (a, b, cos)
        assert np.mean(cosines) < 0.5

    def test_invalid_stem_range_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic_tracks(DatasetConfig(min_stems=3, max_stems=20))


class TestChunking:
    def test_counts(self):
        assert len(chunk_track(20.0, 10.0, 1.0, "t")) == 11
        assert len(chunk_track(10.0, 10.0, 1.0, "t")) == 1
        assert len(chunk_track(9.0, 10.0, 1.0, "t")) == 0

    def test_clip_ids_and_starts(self):
        clips = chunk_track(12.0, 10.0, 1.0, "trackX")
        assert [c.clip_id for c in clips] == ["trackX:0", "trackX:1", "trackX:2"]
        assert [c.start for c in clips] == [0.0, 1.0, 2.0]

    def test_float_stride_boundary(self):
        # 10.0 + 5 * 0.5 = 12.5 exactly: boundary clip included
        clips = chunk_track(12.5, 10.0, 0.5, "t")
        assert len(clips) == 6
        assert clips[-1].start == 2.5

    def test_track_object_accepted(self):
        track = generate_synthetic_tracks(SMALL, seed=7)[0]
        clips = chunk_track(track)
        assert len(clips) == 3
        assert clips[0].track_id == track.track_id

    def test_clip_audio_window(self):
        track = generate_synthetic_tracks(SMALL, seed=8)[0]
        clip = ClipIndex("t:1", track.track_id, 1.0, 10.0)
        out = clip_audio(track.stems[0], clip)
        assert out.num_samples == 10 * 16000
        assert np.array_equal(out.samples,
                              track.stems[0].audio.samples[:, 16000:11 * 16000])


class TestMix:
    def test_sample_exact_sum(self):
        track = generate_synthetic_tracks(SMALL, seed=9)[0]
        total = mix(track.stems)
        expected = np.zeros_like(track.stems[0].audio.samples)
        for s in track.stems:
            expected = expected + s.audio.samples
        assert np.array_equal(total.samples, expected)

    def test_empty_needs_reference(self):
        with pytest.raises(ValueError, match="reference"):
            mix([])

    def test_empty_with_like_is_silence(self):
        ref = AudioChunk(np.ones((2, 100)), 16000)
        out = mix([], like=ref)
        assert np.all(out.samples == 0)
        assert out.samples.shape == ref.samples.shape

    def test_silence_like(self):
        ref = AudioChunk(np.ones((1, 50)), 8000)
        s = silence_like(ref)
        assert s.sample_rate == 8000 and np.all(s.samples == 0)

    def test_audio_chunks_accepted(self):
        a = AudioChunk(np.ones((1, 10)), 16000)
        b = AudioChunk(2 * np.ones((1, 10)), 16000)
        assert np.all(mix([a, b]).samples == 3.0)


class TestSplits:
    def test_deterministic(self):
        for tid in ("track000", "abc", "zzz"):
            assert split_of(tid) == split_of(tid)

    def test_valid_names(self):
        assert all(split_of(f"track{i:03d}") in {"train", "val", "test"}
                   for i in range(50))

    def test_ratio_roughly_respected(self):
        splits = [split_of(f"t{i}") for i in range(2000)]
        frac = splits.count("train") / len(splits)
        assert 0.6 < frac < 0.8

    def test_custom_splits(self):
        assert split_of("anything", {"only": 1.0}) == "only"


class TestIngest:
    def make_folder(self, tmp_path, lengths=(1000, 1000), rate=16000):
        d = tmp_path / "trackdir"
        d.mkdir()
        labels = {}
        for i, n in enumerate(lengths):
            name = f"stem{i}.wav"
            rng = np.random.default_rng(i)
            write_wav(d / name, AudioChunk(
                0.1 * rng.standard_normal((2, n)), rate))
            labels[name] = f"class{i}"
        (d / "labels.json").write_text(json.dumps(labels))
        return d

    def test_round_trip(self, tmp_path):
        d = self.make_folder(tmp_path)
        track = ingest_stem_folder(str(d))
        assert track.track_id == "trackdir"
        assert len(track.stems) == 2
        assert track.stems[0].class_label == "class0"

    def test_missing_sidecar(self, tmp_path):
        d = tmp_path / "empty"
        d.mkdir()
        with pytest.raises(ValueError, match="labels.json"):
            ingest_stem_folder(str(d))

    def test_length_mismatch_reports_file(self, tmp_path):
        d = self.make_folder(tmp_path, lengths=(1000, 900))
        with pytest.raises(ValueError, match="stem1.wav"):
            ingest_stem_folder(str(d))

    def test_missing_file_reports_name(self, tmp_path):
        d = self.make_folder(tmp_path)
        (d / "stem1.wav").unlink()
        with pytest.raises(ValueError, match="stem1.wav"):
            ingest_stem_folder(str(d))


class TestManifest:
    def test_write_read_round_trip(self, tmp_path):
        tracks = generate_synthetic_tracks(SMALL, seed=10)
        write_manifest(str(tmp_path / "ds"), tracks, seed=10)
        m = Manifest(str(tmp_path / "ds"))
        assert m.header["seed"] == 10
        assert sorted(m.track_ids()) == [t.track_id for t in tracks]
        back = m.load_track(tracks[0].track_id)
        assert len(back.stems) == len(tracks[0].stems)
        assert np.max(np.abs(back.stems[0].audio.samples
                             - tracks[0].stems[0].audio.samples)) < 1e-6

    def test_index_deterministic(self, tmp_path):
        tracks = generate_synthetic_tracks(SMALL, seed=11)
        write_manifest(str(tmp_path / "a"), tracks, seed=11)
        write_manifest(str(tmp_path / "b"), tracks, seed=11)
        ia = (tmp_path / "a" / "index.jsonl").read_bytes()
        ib = (tmp_path / "b" / "index.jsonl").read_bytes()
        assert ia == ib

    def test_missing_index_hint(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="gen-data"):
            Manifest(str(tmp_path / "nowhere"))

    def test_clips_and_classes(self, tmp_path):
        tracks = generate_synthetic_tracks(SMALL, seed=12)
        write_manifest(str(tmp_path / "ds"), tracks, seed=12)
        m = Manifest(str(tmp_path / "ds"))
        tid = tracks[0].track_id
        assert len(m.clips(tid)) == 3
        assert m.stem_classes(tid) == [s.class_label for s in tracks[0].stems]

    def test_track_cache_reused(self, tmp_path):
        tracks = generate_synthetic_tracks(SMALL, seed=13)
        write_manifest(str(tmp_path / "ds"), tracks, seed=13)
        m = Manifest(str(tmp_path / "ds"))
        tid = tracks[0].track_id
        assert m.load_track(tid) is m.load_track(tid)


class TestTrackValidation:
    def test_mismatched_stem_lengths_rejected(self):
        a = Stem("a", "x", AudioChunk(np.zeros((1, 100)), 16000))
        b = Stem("b", "x", AudioChunk(np.zeros((1, 99)), 16000))
        with pytest.raises(ValueError, match="length or rate"):
            StemTrack("t", [a, b], 16000)
