use std::path::Path;
use std::process::{Command, Output};

use neurocap::data::{parse_captions, DatasetManifest, VectorFile, VectorKind};
use neurocap::decoder::DecoderConfig;
use neurocap::encoder::RseTrainConfig;
use neurocap::metrics::ablation::AblationSettings;
use neurocap::viz::parse_scatter_tsv;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurocap")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn small_dataset(dir: &Path) -> String {
    ok(&[
        "synth-gen", "--concepts", "3", "--per-concept", "10", "--dim", "8", "--fdim", "12", "--seed", "4",
        "--out", &path(dir, "ds"),
    ]);
    path(dir, "ds/manifest.json")
}

#[test]
fn exit_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["train-rse", "--help"])), 0);
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["synth-gen", "--concepts", "many", "--out", "x"])), 1);

    let dir = tempfile::tempdir().unwrap();
    let missing = run(&["vocab-build", "--manifest", &path(dir.path(), "absent.json"), "--out", &path(dir.path(), "v")]);
    assert_eq!(code(&missing), 2);
    // invalid spec values are usage errors, not data errors
    let bad = run(&["synth-gen", "--concepts", "1", "--out", &path(dir.path(), "ds")]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn synth_gen_contract_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["synth-gen", "--seed", "7", "--out", &path(dir.path(), "ds")]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let header = stderr.lines().next().unwrap();
    assert!(header.starts_with("# neurocap "), "{header}");
    assert!(header.contains(" synth-gen ") && header.contains("seed=7") && header.contains("config_sha256="));
    for f in ["manifest.json", "responses.bin", "embeddings.bin", "captions.tsv"] {
        assert!(dir.path().join("ds").join(f).is_file(), "{f}");
    }
    let manifest = DatasetManifest::read(&dir.path().join("ds/manifest.json")).unwrap();
    assert_eq!((manifest.split.train.len(), manifest.split.test.len()), (360, 40));
    let meta = manifest.synthetic.unwrap();
    assert_eq!((meta.seed, meta.concepts, meta.per_concept, meta.dim, meta.response_dim), (7, 8, 50, 32, 64));
}

#[test]
fn caption_emits_one_row_per_response() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = small_dataset(d);
    ok(&["train-rse", "--manifest", &manifest, "--hidden", "16", "--epochs", "5", "--out", &path(d, "rse.ckpt")]);
    ok(&[
        "train-decoder", "--manifest", &manifest, "--min-freq", "1", "--embed-dim", "8", "--hidden", "12",
        "--epochs", "2", "--out", &path(d, "dec.ckpt"),
    ]);

    ok(&[
        "caption", "--rse", &path(d, "rse.ckpt"), "--decoder", &path(d, "dec.ckpt"), "--responses",
        &path(d, "ds/responses.bin"), "--out", &path(d, "all.tsv"),
    ]);
    let responses = VectorFile::read(&d.join("ds/responses.bin"), VectorKind::Responses).unwrap();
    let rows = parse_captions(&std::fs::read_to_string(d.join("all.tsv")).unwrap()).unwrap();
    assert_eq!(rows.len(), responses.records.len());
    for (row, (id, _)) in rows.iter().zip(&responses.records) {
        assert_eq!(&row.stimulus_id, id);
        assert_eq!(row.subject_id, "model");
    }

    ok(&[
        "caption", "--rse", &path(d, "rse.ckpt"), "--decoder", &path(d, "dec.ckpt"), "--manifest", &manifest,
        "--split", "test", "--out", &path(d, "pred.tsv"),
    ]);
    let test_rows = parse_captions(&std::fs::read_to_string(d.join("pred.tsv")).unwrap()).unwrap();
    let m = DatasetManifest::read(Path::new(&manifest)).unwrap();
    assert_eq!(test_rows.len(), m.split.test.len());

    let out = ok(&[
        "eval", "--manifest", &manifest, "--rse", &path(d, "rse.ckpt"), "--decoder", &path(d, "dec.ckpt"),
        "--predictions", &path(d, "pred.tsv"), "--out", &path(d, "report.tsv"),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("meteor="));
    let report = std::fs::read_to_string(d.join("report.tsv")).unwrap();
    assert_eq!(report.lines().filter(|l| !l.starts_with('#')).count(), test_rows.len() + 1);

    // a checkpoint of the wrong kind is a data error
    let wrong = run(&[
        "caption", "--rse", &path(d, "dec.ckpt"), "--decoder", &path(d, "dec.ckpt"), "--manifest", &manifest,
        "--out", &path(d, "x.tsv"),
    ]);
    assert_eq!(code(&wrong), 2);
}

#[test]
fn viz_writes_scatter_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = small_dataset(d);
    ok(&[
        "viz", "--manifest", &manifest, "--method", "pca", "--space", "response", "--split", "train", "--out",
        &path(d, "pca.tsv"), "--svg", &path(d, "pca.svg"),
    ]);
    let rows = parse_scatter_tsv(&std::fs::read_to_string(d.join("pca.tsv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 27);
    let svg = std::fs::read_to_string(d.join("pca.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 27);
    let out = ok(&[
        "viz", "--manifest", &manifest, "--method", "tsne", "--space", "embedding", "--split", "train",
        "--perplexity", "5", "--seed", "2", "--out", &path(d, "tsne.tsv"),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("final_kl="));
    let unknown = run(&["viz", "--manifest", &manifest, "--method", "umap", "--out", &path(d, "u.tsv")]);
    assert_ne!(code(&unknown), 0);
}

#[test]
fn embed_import_from_tsv_and_captions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("emb.tsv"), "#dim=2\na\tcat\t0.5,-1\nb\t\t1,2\n").unwrap();
    ok(&["embed-import", "--input", &path(d, "emb.tsv"), "--out", &path(d, "emb.bin")]);
    let f = VectorFile::read(&d.join("emb.bin"), VectorKind::Embeddings).unwrap();
    assert_eq!(f.records.len(), 2);
    assert_eq!(f.records[0].1, vec![0.5, -1.0]);

    std::fs::write(d.join("caps.tsv"), "s1\tsub\ta red cat\ns1\tsub\ta cat\ns2\tsub\ta dog\n").unwrap();
    ok(&[
        "embed-import", "--captions", &path(d, "caps.tsv"), "--embed-dim", "16", "--out", &path(d, "cap.bin"),
    ]);
    let f = VectorFile::read(&d.join("cap.bin"), VectorKind::Embeddings).unwrap();
    assert_eq!(f.records.len(), 2);
    assert_eq!(f.dim, 16);
    let both = run(&[
        "embed-import", "--input", &path(d, "emb.tsv"), "--captions", &path(d, "caps.tsv"), "--out",
        &path(d, "z.bin"),
    ]);
    assert_eq!(code(&both), 1);
}

#[test]
fn ablate_writes_table_shaped_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = small_dataset(d);
    let settings = AblationSettings {
        encoder: RseTrainConfig {
            hidden: Vec::new(),
            epochs: 5,
            ..RseTrainConfig::default()
        },
        decoder: DecoderConfig {
            embed_dim: 6,
            hidden: 8,
            epochs: 2,
            ..DecoderConfig::default()
        },
        min_freq: 1,
    };
    std::fs::write(d.join("settings.json"), serde_json::to_string(&settings).unwrap()).unwrap();
    ok(&[
        "ablate", "--manifest", &manifest, "--seeds", "1,2,3", "--settings", &path(d, "settings.json"), "--out",
        &path(d, "table.tsv"),
    ]);
    let table = std::fs::read_to_string(d.join("table.tsv")).unwrap();
    let lines: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines.len(), 4, "{table}");
    let variants: Vec<&str> = lines[1..].iter().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(variants, ["none", "encoder_only", "full"]);

    // single variant: one row
    ok(&[
        "ablate", "--manifest", &manifest, "--seeds", "1,2,3", "--variants", "full", "--settings",
        &path(d, "settings.json"), "--out", &path(d, "one.tsv"),
    ]);
    let one = std::fs::read_to_string(d.join("one.tsv")).unwrap();
    assert_eq!(one.lines().filter(|l| !l.starts_with('#')).count(), 2);
}
