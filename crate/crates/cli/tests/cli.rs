use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use atlas_core::analytics::{sankey_diagram, sort_heads, Direction, Metric};
use atlas_core::headlens::{build_head_profile, HeadProfile};
use atlas_core::piling::{pile_layer, LayerPiles};
use atlas_core::{ingest_dump, io, AttnType, CorpusStore, DumpDocument};

fn atlas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attn-atlas"))
        .args(args)
        .output()
        .unwrap()
}

fn write_sentences(dir: &Path) -> String {
    let path = dir.join("sentences.txt");
    fs::write(&path, "the planet is home to many species\nwe live on a small planet ||| nous vivons sur une petite planète\n").unwrap();
    path.to_str().unwrap().to_string()
}

fn gen(dir: &Path, name: &str, seed: &str) -> String {
    let out = dir.join(name).to_str().unwrap().to_string();
    let sentences = write_sentences(dir);
    let o = atlas(&[
        "gen",
        "--seed",
        seed,
        "--layers",
        "2",
        "--heads",
        "4",
        "--d-model",
        "16",
        "--sentences",
        &sentences,
        "--out",
        &out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    out
}

fn store(path: &str) -> CorpusStore {
    ingest_dump(&io::read_document::<DumpDocument>(path).unwrap()).unwrap()
}

#[test]
fn gen_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let dump = gen(dir.path(), "d.json", "3");
    let o = atlas(&["validate", &dump]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["errors"].as_array().unwrap().is_empty());
}

#[test]
fn gen_is_deterministic_and_echoes_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", "11");
    let b = gen(dir.path(), "b.json", "11");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = gen(dir.path(), "c.json.gz", "11");
    assert_eq!(store(&a), store(&c));

    let sentences = write_sentences(dir.path());
    let out = dir.path().join("d.json");
    let o = atlas(&[
        "gen",
        "--layers",
        "1",
        "--heads",
        "2",
        "--d-model",
        "8",
        "--sentences",
        &sentences,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed: 0"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let dump = gen(dir.path(), "d.json", "0");
    assert_eq!(
        atlas(&["sort", &dump, "--sentence", "s1", "--layer", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        atlas(&[
            "sort",
            &dump,
            "--sentence",
            "s1",
            "--layer",
            "1",
            "--metric",
            "beauty"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(atlas(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(atlas(&["gen", "--out", "x.json"]).status.code(), Some(2));
}

#[test]
fn invalid_dump_fails_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let dump = gen(dir.path(), "d.json", "0");
    let mut doc: DumpDocument = io::read_document(&dump).unwrap();
    doc.sentences[0]
        .attention
        .get_mut(&AttnType::EncoderSelf)
        .unwrap()[1][0][0][0] -= 0.02;
    let bad = dir.path().join("bad.json");
    io::write_document(&bad, &doc).unwrap();
    let o = atlas(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["errors"][0]["kind"], "row_sum");
    let o = atlas(&[
        "sort",
        bad.to_str().unwrap(),
        "--sentence",
        "s1",
        "--layer",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row_sum"));
    assert_eq!(
        atlas(&["sort", &dump, "--sentence", "s1", "--layer", "3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        atlas(&["serve", "--port", "0", "--dump", bad.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn analytics_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let dump = gen(dir.path(), "d.json", "5");
    let s = store(&dump);
    let s2 = s.sentence("s2").unwrap();

    let o = atlas(&[
        "sort",
        &dump,
        "--sentence",
        "s2",
        "--layer",
        "2",
        "--metric",
        "position",
        "--direction",
        "desc",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let expected = sort_heads(
        s2.layer(AttnType::EncoderSelf, 2).unwrap(),
        Metric::Position,
        Direction::Descending,
    )
    .unwrap();
    assert_eq!(
        o.stdout,
        [serde_json::to_vec(&expected).unwrap(), b"\n".to_vec()].concat()
    );

    let piles_out = dir.path().join("piles.json");
    let o = atlas(&[
        "pile",
        &dump,
        "--sentence",
        "s2",
        "--layer",
        "1",
        "--type",
        "encoder_decoder",
        "--threshold",
        "0.5",
        "--out",
        piles_out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let expected = pile_layer(s2.layer(AttnType::EncoderDecoder, 1).unwrap(), 0.5).unwrap();
    assert_eq!(
        io::read_document::<LayerPiles>(&piles_out).unwrap(),
        expected
    );
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("pile 1: heads "));

    let profile_out = dir.path().join("profile.json");
    let o = atlas(&[
        "headlens",
        &dump,
        "--layer",
        "1",
        "--head",
        "2",
        "--k",
        "3",
        "--out",
        profile_out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed: 0"));
    let expected = build_head_profile(&s, AttnType::EncoderSelf, 1, 2, 3, 0).unwrap();
    assert_eq!(
        io::read_document::<HeadProfile>(&profile_out).unwrap(),
        expected
    );

    let o = atlas(&[
        "sankey",
        &dump,
        "--sentence",
        "s2",
        "--type",
        "decoder_self",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let expected = sankey_diagram(s2, AttnType::DecoderSelf, 0.05).unwrap();
    assert_eq!(
        o.stdout,
        [serde_json::to_vec(&expected).unwrap(), b"\n".to_vec()].concat()
    );
}

#[test]
fn export_merges_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.json", "1");
    let out = dir.path().join("out.json.gz");
    assert_eq!(
        atlas(&["export", &a, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(store(out.to_str().unwrap()), store(&a));
    // same ids twice conflict
    assert_eq!(
        atlas(&["export", &a, &a, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}
