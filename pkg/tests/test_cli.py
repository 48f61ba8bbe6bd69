import numpy as np
import pytest
from scipy.io import wavfile

from envmorph.cli import main
from envmorph.envelope import FRAME_COUNT, load_envelope, save_envelope
from envmorph.synth import generate_tuple
from envmorph.stimuli import count_bursts
from envmorph.wavio import read_wav



def write_tone_wav(path, sr=8192, seconds=10.0, stereo=False, dtype=np.int16):
    t = np.arange(int(sr * seconds)) / sr
    x = 0.5 * np.sin(2 * np.pi * 220 * t)
    if dtype == np.int16:
        data = (x * 32767).astype(np.int16)
    else:
        data = x.astype(np.float32)
    if stereo:
        data = np.stack([data, data], axis=1)
    wavfile.write(path, sr, data)


class TestExtract:
    def test_extract_success(self, tmp_path, capsys):
        wav = tmp_path / "in.wav"
        out = tmp_path / "out.env1"
        write_tone_wav(wav)
        assert main(["extract", str(wav), str(out)]) == 0
        env = load_envelope(out)
        assert env.frames.shape == (FRAME_COUNT,)

    def test_missing_file_exit_2(self, tmp_path, capsys):
        code = main(["extract", str(tmp_path / "nope.wav"), str(tmp_path / "o.env1")])
        assert code == 2
        assert "missing file" in capsys.readouterr().err

    def test_stereo_downmix_notice(self, tmp_path, capsys):
        wav = tmp_path / "st.wav"
        write_tone_wav(wav, stereo=True)
        assert main(["extract", str(wav), str(tmp_path / "o.env1")]) == 0
        assert "downmixed" in capsys.readouterr().err

    def test_float32_wav_accepted(self, tmp_path):
        wav = tmp_path / "f32.wav"
        write_tone_wav(wav, dtype=np.float32)
        assert main(["extract", str(wav), str(tmp_path / "o.env1")]) == 0

    def test_unsupported_format_exit_2(self, tmp_path, capsys):
        wav = tmp_path / "i32.wav"
        sr = 8192
        wavfile.write(wav, sr, np.zeros(sr, dtype=np.int32))
        assert main(["extract", str(wav), str(tmp_path / "o.env1")]) == 2


class TestMorphCommand:
    def test_audio_mix_alpha_zero_bitwise(self, tmp_path, rng):
        tup = generate_tuple(("placement",), 0.5, rng_seed=77)
        a_path, b_path = tmp_path / "a.env1", tmp_path / "b.env1"
        save_envelope(tup.e_a, a_path)
        save_envelope(tup.e_b, b_path)
        out = tmp_path / "m.env1"
        code = main(
            ["morph", "--engine", "audio-mix", "--alpha", "0", "--a", str(a_path), "--b", str(b_path), "--out", str(out)]
        )
        assert code == 0
        assert out.read_bytes() == a_path.read_bytes()

    def test_dtw_with_alpha_map_and_csv(self, tmp_path):
        tup = generate_tuple(("spacing",), 0.5, rng_seed=78)
        a_path, b_path = tmp_path / "a.env1", tmp_path / "b.env1"
        save_envelope(tup.e_a, a_path)
        save_envelope(tup.e_b, b_path)
        out, csv_out = tmp_path / "m.env1", tmp_path / "m.csv"
        code = main(
            [
                "morph", "--engine", "dtw", "--alpha", "0.5",
                "--a", str(a_path), "--b", str(b_path),
                "--out", str(out), "--alpha-map", "gamma:2.0", "--csv", str(csv_out),
            ]
        )
        assert code == 0
        assert csv_out.read_text().startswith("frame,a,b,morph")

    def test_unknown_engine_exits_2_without_output(self, tmp_path, rng):
        out = tmp_path / "never.env1"
        with pytest.raises(SystemExit) as exc:
            main(
                ["morph", "--engine", "bogus", "--alpha", "0.5", "--a", "x", "--b", "y", "--out", str(out)]
            )
        assert exc.value.code == 2
        assert not out.exists()

    def test_learned_missing_checkpoints_exit_2(self, tmp_path):
        tup = generate_tuple(("placement",), 0.5, rng_seed=79)
        a_path, b_path = tmp_path / "a.env1", tmp_path / "b.env1"
        save_envelope(tup.e_a, a_path)
        save_envelope(tup.e_b, b_path)
        code = main(
            ["morph", "--engine", "learned", "--alpha", "0.5", "--a", str(a_path), "--b", str(b_path), "--out", str(tmp_path / "m.env1")]
        )
        assert code == 2


class TestSynthAndTraining:
    def test_synth_writes_manifest(self, tmp_path):
        out = tmp_path / "ds"
        assert main(["synth", "--out", str(out), "--count", "6", "--seed", "3"]) == 0
        manifest = out / "manifest.jsonl"
        assert manifest.exists()
        assert len(manifest.read_text().splitlines()) == 6

    def test_train_and_morph_learned(self, tmp_path):
        ae_path = tmp_path / "ae.ckpt"
        mp_path = tmp_path / "mp.ckpt"
        code = main(
            ["train-ae", "--generate", "64", "--steps", "8", "--batch-size", "16", "--seed", "0", "--out", str(ae_path), "--log", str(tmp_path / "loss.csv")]
        )
        assert code == 0 and ae_path.exists()
        assert (tmp_path / "loss.csv").read_text().startswith("step,loss")
        code = main(
            ["train-mapper", "--ae", str(ae_path), "--generate", "16", "--epochs", "2", "--batch-size", "8", "--seed", "0", "--out", str(mp_path)]
        )
        assert code == 0 and mp_path.exists()

        tup = generate_tuple(("quantity",), 0.5, rng_seed=80)
        a_path, b_path = tmp_path / "a.env1", tmp_path / "b.env1"
        save_envelope(tup.e_a, a_path)
        save_envelope(tup.e_b, b_path)
        out = tmp_path / "m.env1"
        code = main(
            ["morph", "--engine", "learned", "--alpha", "0.5", "--a", str(a_path), "--b", str(b_path), "--out", str(out), "--ae", str(ae_path), "--mapper", str(mp_path)]
        )
        assert code == 0
        env = load_envelope(out)
        assert env.frames.shape == (FRAME_COUNT,)


class TestBenchCommand:
    def test_bench_oracle_strict_passes(self, tmp_path):
        expectations = tmp_path / "exp.txt"
        expectations.write_text(
            "cell(oracle, placement) <= cell(audio-mix, placement)\n"
        )
        code = main(
            [
                "bench", "--suite", "single-axis", "--count", "2", "--seed", "1",
                "--engines", "audio-mix,oracle", "--out", str(tmp_path / "rep"),
                "--expectations", str(expectations), "--strict",
            ]
        )
        assert code == 0
        assert (tmp_path / "rep" / "report.md").exists()

    def test_bench_strict_failure_exit_4(self, tmp_path):
        expectations = tmp_path / "exp.txt"
        expectations.write_text("cell(audio-mix, placement) < cell(oracle, placement)\n")
        code = main(
            [
                "bench", "--suite", "single-axis", "--count", "2", "--seed", "1",
                "--engines", "audio-mix,oracle",
                "--expectations", str(expectations), "--strict",
            ]
        )
        assert code == 4


class TestStimuliCommand:
    def test_table_quantity_midpoint_six_bursts(self, tmp_path):
        out = tmp_path / "stim"
        code = main(
            [
                "stimuli", "--a-quantity", "4", "--a-onset", "0.5", "--a-ioi", "0.75",
                "--b-quantity", "8", "--b-onset", "0.5", "--b-ioi", "0.5",
                "--noise-level", "0", "--out", str(out), "--sr", "16384",
            ]
        )
        assert code == 0
        for name in ("input_a.wav", "input_b.wav", "midpoint.wav", "sequence.wav"):
            assert (out / name).exists()
        clip, _ = read_wav(out / "midpoint.wav")
        assert count_bursts(clip.samples, clip.sample_rate) == 6

    def test_sequence_is_double_duration(self, tmp_path):
        out = tmp_path / "stim"
        main(
            [
                "stimuli", "--a-quantity", "2", "--a-onset", "0.1", "--a-ioi", "0.5",
                "--b-quantity", "3", "--b-onset", "0.1", "--b-ioi", "0.5",
                "--noise-level", "0", "--out", str(out), "--sr", "8192",
            ]
        )
        clip, _ = read_wav(out / "sequence.wav")
        assert clip.duration == pytest.approx(12.0)


class TestHelpAndConfig:
    @pytest.mark.parametrize(
        "command",
        ["extract", "synth", "train-ae", "train-mapper", "morph", "bench", "stimuli"],
    )
    def test_help_exits_zero(self, command, capsys):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        assert "--" in capsys.readouterr().out

    def test_config_file_defaults_and_flag_override(self, tmp_path):
        config = tmp_path / "envmorph.ini"
        config.write_text("[synth]\ncount = 4\nseed = 9\n")
        out1 = tmp_path / "d1"
        assert main(["--config", str(config), "synth", "--out", str(out1)]) == 0
        assert len((out1 / "manifest.jsonl").read_text().splitlines()) == 4
        # explicit flag wins over the config value
        out2 = tmp_path / "d2"
        assert main(["--config", str(config), "synth", "--out", str(out2), "--count", "2"]) == 0
        assert len((out2 / "manifest.jsonl").read_text().splitlines()) == 2

    def test_env_seed_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ENVMORPH_SEED", "123")
        out = tmp_path / "ds"
        assert main(["synth", "--out", str(out), "--count", "2"]) == 0
        import json

        rec = json.loads((out / "manifest.jsonl").read_text().splitlines()[0])
        from envmorph.seeding import NS_TRAIN_TUPLES, derive_seed

        assert rec["seed"] == derive_seed(123, NS_TRAIN_TUPLES, 0)
