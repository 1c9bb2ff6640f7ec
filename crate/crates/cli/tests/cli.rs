use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rvq_cli::cmd::codec::decode_rows;
use rvq_cli::cmd::oracle::BeamFn;
use rvq_cli::report::EvalReport;
use rvq_cli::{run_oracle_check, OracleConfig};
use rvq_core::pipeline::{
    codec_roundtrip, read_raw_f32, write_raw_f32, Codebooks, CodecRun, FrameConfig,
};
use rvq_core::synth::test_signal;
use rvq_core::{encode_beam, BeamParams, CodebookSet, QuantResult, Strategy, Window};

fn rvq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvq"))
        .args(args)
        .current_dir(dir)
        .env_remove("RVQ_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = rvq(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn scalar_codebooks(dir: &Path) {
    let set =
        CodebookSet::from_tables(1, vec![vec![1.0, 3.0], vec![0.0, 1.0], vec![0.0, 0.1]]).unwrap();
    set.save(dir.join("fig.rvqc")).unwrap();
    fs::write(dir.join("x.txt"), "2.13\n").unwrap();
}

#[test]
fn gen_codebooks_is_byte_stable() {
    let d = tempfile::tempdir().unwrap();
    let args = |o: &'static str| {
        [
            "gen-codebooks",
            "--seed",
            "7",
            "-L",
            "8",
            "-S",
            "64",
            "-D",
            "16",
            "-o",
            o,
        ]
    };
    ok(d.path(), &args("a.rvqc"));
    ok(d.path(), &args("b.rvqc"));
    let a = fs::read(d.path().join("a.rvqc")).unwrap();
    assert_eq!(a, fs::read(d.path().join("b.rvqc")).unwrap());
    let set = CodebookSet::load(d.path().join("a.rvqc")).unwrap();
    assert_eq!((set.levels(), set.max_size(), set.dim()), (8, 64, 16));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(rvq(d.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        rvq(
            d.path(),
            &["gen-codebooks", "-L", "0", "-S", "2", "-D", "2", "-o", "x"]
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        rvq(d.path(), &["oracle-check", "-L", "12", "-S", "8"])
            .status
            .code(),
        Some(2)
    );
    let missing = rvq(
        d.path(),
        &[
            "encode",
            "--vectors",
            "x.txt",
            "--codebooks",
            "missing.rvqc",
            "-o",
            "c",
        ],
    );
    assert_eq!(missing.status.code(), Some(1));
    assert!(!missing.stderr.is_empty());
    assert_eq!(rvq(d.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn train_writes_declared_shape_and_compares_with_random() {
    let d = tempfile::tempdir().unwrap();
    let samples = rvq_core::synth::GaussianMixture::standard(3, 16).sample(600, 4);
    let flat: Vec<f64> = samples.into_iter().flatten().collect();
    write_raw_f32(d.path().join("frames.f32"), &flat).unwrap();
    let out = ok(
        d.path(),
        &[
            "train",
            "--input",
            "frames.f32",
            "--dim",
            "16",
            "-L",
            "4",
            "-S",
            "16",
            "--seed",
            "1",
            "-o",
            "cb.rvqc",
        ],
    );
    let set = CodebookSet::load(d.path().join("cb.rvqc")).unwrap();
    assert_eq!((set.levels(), set.max_size(), set.dim()), (4, 16, 16));
    let text = String::from_utf8(out.stdout).unwrap();
    let value = |label: &str| -> f64 {
        let line = text
            .lines()
            .find(|l| l.starts_with(&format!("  {label} ")))
            .unwrap();
        line.split_whitespace().last().unwrap().parse().unwrap()
    };
    assert!(value("trained") < value("random"), "{text}");
}

#[test]
fn scalar_example_through_vectors_mode() {
    let d = tempfile::tempdir().unwrap();
    scalar_codebooks(d.path());
    ok(
        d.path(),
        &[
            "encode",
            "--vectors",
            "x.txt",
            "--codebooks",
            "fig.rvqc",
            "--beam",
            "2",
            "-o",
            "b.jsonl",
        ],
    );
    assert_eq!(
        fs::read_to_string(d.path().join("b.jsonl")).unwrap(),
        "{\"n_q\":3,\"indices\":[0,1,1]}\n"
    );
    ok(
        d.path(),
        &[
            "encode",
            "--vectors",
            "x.txt",
            "--codebooks",
            "fig.rvqc",
            "--greedy",
            "-o",
            "g.jsonl",
        ],
    );
    assert_eq!(
        fs::read_to_string(d.path().join("g.jsonl")).unwrap(),
        "{\"n_q\":3,\"indices\":[1,0,0]}\n"
    );
    ok(
        d.path(),
        &[
            "decode",
            "--codes",
            "b.jsonl",
            "--codebooks",
            "fig.rvqc",
            "--vectors",
            "-o",
            "y.txt",
        ],
    );
    let y: f64 = fs::read_to_string(d.path().join("y.txt"))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    // 0.1 is stored as f32.
    assert!((y - 2.1).abs() < 1e-7);
}

#[test]
fn beam_one_matches_greedy_bytes() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &[
            "gen-codebooks",
            "--seed",
            "2",
            "-L",
            "6",
            "-S",
            "32",
            "-D",
            "8",
            "-o",
            "cb.rvqc",
        ],
    );
    let xs = rvq_core::synth::GaussianMixture::standard(5, 8).sample(300, 6);
    write_raw_f32(d.path().join("v.f32"), &xs.concat()).unwrap();
    ok(
        d.path(),
        &[
            "encode",
            "--vectors",
            "v.f32",
            "--codebooks",
            "cb.rvqc",
            "--beam",
            "1",
            "-o",
            "b.codes",
        ],
    );
    ok(
        d.path(),
        &[
            "encode",
            "--vectors",
            "v.f32",
            "--codebooks",
            "cb.rvqc",
            "--greedy",
            "-o",
            "g.codes",
        ],
    );
    assert_eq!(
        fs::read(d.path().join("b.codes")).unwrap(),
        fs::read(d.path().join("g.codes")).unwrap()
    );
}

#[test]
fn vector_shape_mismatch_names_both_dims() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &[
            "gen-codebooks",
            "-L",
            "2",
            "-S",
            "4",
            "-D",
            "8",
            "-o",
            "cb.rvqc",
        ],
    );
    fs::write(d.path().join("v.txt"), "1 2 3\n").unwrap();
    let out = rvq(
        d.path(),
        &[
            "encode",
            "--vectors",
            "v.txt",
            "--codebooks",
            "cb.rvqc",
            "-o",
            "c",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("dim 3") && err.contains("dim 8"), "{err}");
}

#[test]
fn audio_round_trip_matches_in_process_codec() {
    let d = tempfile::tempdir().unwrap();
    let signal = test_signal(11, 0.4, 16_000);
    write_raw_f32(d.path().join("sig.f32"), &signal).unwrap();
    let frames: Vec<Vec<f64>> = signal.chunks_exact(64).map(<[f64]>::to_vec).collect();
    let set = CodebookSet::train_residual_kmeans(&frames, 4, 16, 10, 1).unwrap();
    set.save(d.path().join("cb.rvqc")).unwrap();

    ok(
        d.path(),
        &[
            "encode",
            "--input",
            "sig.f32",
            "--sample-rate",
            "16000",
            "--codebooks",
            "cb.rvqc",
            "--beam",
            "4",
            "--n-q",
            "3",
            "-o",
            "s.codes",
        ],
    );
    ok(
        d.path(),
        &[
            "decode",
            "--codes",
            "s.codes",
            "--codebooks",
            "cb.rvqc",
            "-o",
            "out.f32",
        ],
    );
    let decoded = read_raw_f32(d.path().join("out.f32")).unwrap();

    let frame = FrameConfig::new(64, 32, Window::Hann).unwrap();
    let run = CodecRun::new(Strategy::beam(4), 3, Codebooks::Plain(set.clone()), frame).unwrap();
    let expected = codec_roundtrip(&signal, &run).unwrap().reconstructed;
    assert_eq!(decoded.len(), expected.len());
    assert!(decoded
        .iter()
        .zip(&expected)
        .all(|(a, b)| a.to_bits() == (*b as f32 as f64).to_bits()));

    // The stored codes decode to the in-process frames bit for bit.
    let codes = rvq_cli::cmd::read_codes(&d.path().join("s.codes")).unwrap();
    let rows = decode_rows(&codes, &Codebooks::Plain(set)).unwrap();
    let in_process: Vec<Vec<f64>> = codec_roundtrip(&signal, &run)
        .unwrap()
        .frames
        .iter()
        .map(|f| f.quantized())
        .collect();
    assert_eq!(rows, in_process);
}

#[test]
fn wav_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let signal = test_signal(2, 0.3, 8000);
    let audio = rvq_core::pipeline::Audio {
        samples: signal,
        sample_rate: 8000,
        format: rvq_core::pipeline::SampleFormat::Pcm16,
    };
    rvq_core::pipeline::write_audio(d.path().join("in.wav"), &audio).unwrap();
    ok(
        d.path(),
        &[
            "gen-codebooks",
            "--seed",
            "4",
            "-L",
            "3",
            "-S",
            "8",
            "-D",
            "32",
            "--scale",
            "0.1",
            "-o",
            "cb.rvqc",
        ],
    );
    ok(
        d.path(),
        &[
            "encode",
            "--input",
            "in.wav",
            "--codebooks",
            "cb.rvqc",
            "-o",
            "c.jsonl",
        ],
    );
    ok(
        d.path(),
        &[
            "decode",
            "--codes",
            "c.jsonl",
            "--codebooks",
            "cb.rvqc",
            "-o",
            "out.wav",
        ],
    );
    let back = rvq_core::pipeline::read_audio(d.path().join("out.wav"), None).unwrap();
    assert_eq!(back.sample_rate, 8000);
    assert_eq!(back.format, rvq_core::pipeline::SampleFormat::Pcm16);
    assert_eq!(back.samples.len(), audio.samples.len());
}

#[test]
fn eval_stable_is_byte_identical_and_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let args = |o: &'static str| {
        [
            "--stable",
            "--seed",
            "3",
            "eval",
            "--synthetic",
            "200",
            "-L",
            "4",
            "-S",
            "16",
            "-D",
            "8",
            "--train-samples",
            "500",
            "--iters",
            "8",
            "--beams",
            "4,8",
            "--n-q",
            "2,4",
            "-o",
            o,
        ]
    };
    ok(d.path(), &args("a.json"));
    ok(d.path(), &args("b.json"));
    let a = fs::read_to_string(d.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read_to_string(d.path().join("b.json")).unwrap());

    let report: EvalReport = serde_json::from_str(&a).unwrap();
    let mut again = serde_json::to_string_pretty(&report).unwrap();
    again.push('\n');
    assert_eq!(again, a);

    assert_eq!(report.rows.len(), 6);
    assert!(report
        .rows
        .iter()
        .all(|r| r.n == 200 && r.runtime_ms_per_sample.is_none()));
    assert!(report.rows.iter().any(|r| r.beam_size == 1));
    assert_eq!(report.metadata.threads, None);
}

#[test]
fn eval_single_sample_has_zero_half_width() {
    let d = tempfile::tempdir().unwrap();
    ok(
        d.path(),
        &[
            "gen-codebooks",
            "-L",
            "2",
            "-S",
            "4",
            "-D",
            "4",
            "-o",
            "cb.rvqc",
        ],
    );
    fs::create_dir(d.path().join("data")).unwrap();
    fs::write(d.path().join("data/one.txt"), "0.5 -1 2 0.25\n").unwrap();
    ok(
        d.path(),
        &[
            "--stable",
            "eval",
            "--dataset",
            "data",
            "--codebooks",
            "cb.rvqc",
            "-o",
            "r.json",
        ],
    );
    let report: EvalReport =
        serde_json::from_str(&fs::read_to_string(d.path().join("r.json")).unwrap()).unwrap();
    for r in &report.rows {
        assert_eq!(r.n, 1);
        assert_eq!(r.sq_err.half_width, 0.0);
        assert_eq!(r.l2_err.half_width, 0.0);
    }

    fs::create_dir(d.path().join("empty")).unwrap();
    let out = rvq(
        d.path(),
        &["eval", "--dataset", "empty", "--codebooks", "cb.rvqc"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_check_default_passes() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["oracle-check"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("oracle error 0.030000"), "{text}");
}

/// Stand-in for an encoder bug: under-reports its error on positive inputs.
fn broken_beam(x: &[f64], set: &CodebookSet, p: &BeamParams) -> rvq_core::Result<QuantResult> {
    let mut r = encode_beam(x, set, p)?;
    if p.beam_size > 1 && x[0] > 0.0 {
        r.sq_err *= 0.5;
    }
    Ok(r)
}

#[test]
fn oracle_check_reports_injected_bug() {
    let cfg = OracleConfig {
        instances: 40,
        ..OracleConfig::default()
    };
    assert!(run_oracle_check(&cfg).unwrap().passed());
    let beam: &BeamFn = &broken_beam;
    let summary = rvq_cli::cmd::oracle::run_oracle_check_with(&cfg, beam).unwrap();
    assert!(!summary.passed());
    assert!(summary.failures.iter().any(|f| f.instance == 0));
    assert!(summary.failures.iter().all(|f| f.seed == f.instance as u64));
}

#[test]
fn bench_rows_and_verification() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(
        d.path(),
        &[
            "bench",
            "--samples",
            "200",
            "--reps",
            "3",
            "-L",
            "4",
            "-S",
            "16",
            "-D",
            "8",
            "-o",
            "b.json",
        ],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("verified"));
    let report: rvq_cli::report::BenchReport =
        serde_json::from_str(&fs::read_to_string(d.path().join("b.json")).unwrap()).unwrap();
    let keys: Vec<(usize, rvq_core::ExecMode)> =
        report.rows.iter().map(|r| (r.beam_size, r.mode)).collect();
    use rvq_core::ExecMode::{Parallel, Sequential};
    assert_eq!(
        keys,
        vec![
            (1, Sequential),
            (1, Parallel),
            (4, Sequential),
            (4, Parallel),
            (16, Sequential),
            (16, Parallel)
        ]
    );
    assert!(report.verified);
}

#[test]
fn sequential_bench_time_grows_with_beam() {
    let cfg = rvq_cli::BenchConfig {
        samples: 300,
        reps: 5,
        ..Default::default()
    };
    let report = rvq_cli::run_bench(&cfg).unwrap();
    let seq: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.mode == rvq_core::ExecMode::Sequential)
        .map(|r| r.ms.mean)
        .collect();
    // Cost ratios are roughly 1 : 4 : 16; only the direction is asserted.
    assert!(seq[0] < seq[1] && seq[1] < seq[2], "{seq:?}");
}
