use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn credence(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_credence")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr_line(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr)
        .lines()
        .find(|l| l.starts_with("error\t"))
        .unwrap_or_default()
        .to_string()
}

/// One drug, `n` effects, one unlabeled post per effect.
fn write_flat_corpus(dir: &Path, n: usize) {
    fs::create_dir_all(dir).unwrap();
    let mut catalog = String::from("drug\taspirin\t\n");
    let mut posts = String::new();
    for i in 0..n {
        catalog.push_str(&format!("effect\tsym{i:02}\t\n"));
        posts.push_str(&format!(
            "{{\"id\":\"p{i:02}\",\"user_id\":\"u{}\",\"text\":\"Aspirin gave me sym{i:02} and it was bad.\"}}\n",
            i % 3
        ));
    }
    let users: String = (0..3)
        .map(|u| format!("{{\"id\":\"u{u}\",\"gender\":\"female\",\"age\":40,\"num_questions\":1,\"num_replies\":2,\"num_posts\":3,\"num_thanks\":1}}\n"))
        .collect();
    fs::write(dir.join("catalog.tsv"), catalog).unwrap();
    fs::write(dir.join("posts.jsonl"), posts).unwrap();
    fs::write(dir.join("users.jsonl"), users).unwrap();
    fs::write(dir.join("labels.tsv"), "aspirin:sym00\ttrue\naspirin:sym01\tfalse\n").unwrap();
}

fn digests(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), Sha256::digest(fs::read(&path).unwrap()).to_vec())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn oracle_beyond_enumeration_bound_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    write_flat_corpus(&corpus, 27);
    let o = credence(&["oracle", "--corpus", p(&corpus), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(6));
    let line = stderr_line(&o);
    assert!(line.starts_with("error\tkind=enumeration_bound\tmessage="), "{line}");
    assert!(line.contains("25 unknown"), "{line}");
    assert!(!tmp.path().join("o/marginals.tsv").exists());
}

#[test]
fn oracle_small_graph_writes_marginals_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    write_flat_corpus(&corpus, 6);
    let before = digests(&corpus);
    let out = tmp.path().join("o");
    let o = credence(&["oracle", "--corpus", p(&corpus), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // Zero weights without trust: every unknown is a fair coin.
    let m = fs::read_to_string(out.join("marginals.tsv")).unwrap();
    assert_eq!(m.lines().count(), 4);
    assert!(m.lines().all(|l| l.ends_with("\t0.500000")), "{m}");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "oracle");
    assert_eq!(manifest["seed"], 0);
    let posts_digest = hex::encode(Sha256::digest(fs::read(corpus.join("posts.jsonl")).unwrap()));
    assert_eq!(manifest["inputs"]["posts"]["sha256"], posts_digest.as_str());
    assert_eq!(digests(&corpus), before, "inputs modified");
}

#[test]
fn restrict_and_exclude_filter_rankings() {
    let tmp = tempfile::tempdir().unwrap();
    let world = tmp.path().join("w");
    let train = tmp.path().join("t");
    let s = credence(&["--seed", "4", "synth", "--users", "40", "--statements", "60", "--out", p(&world)]);
    assert_eq!(s.status.code(), Some(0));
    let before = digests(&world);
    let t = credence(&["--seed", "4", "train", "--corpus", p(&world), "--max-iter", "5", "--out", p(&train)]);
    assert_eq!(t.status.code(), Some(0), "{}", String::from_utf8_lossy(&t.stderr));
    assert_eq!(digests(&world), before, "train modified its inputs");

    let marginals = fs::read_to_string(train.join("marginals.tsv")).unwrap();
    let ids: Vec<&str> = marginals.lines().map(|l| l.split('\t').next().unwrap()).collect();
    let keep = [ids[3], ids[0], ids[7]];
    fs::write(tmp.path().join("keep.txt"), keep.join("\n") + "\n").unwrap();
    let r = credence(&[
        "rank-statements",
        "--marginals",
        p(&train.join("marginals.tsv")),
        "--restrict",
        p(&tmp.path().join("keep.txt")),
        "--out",
        p(&tmp.path().join("r")),
    ]);
    assert_eq!(r.status.code(), Some(0));
    let ranked = fs::read_to_string(tmp.path().join("r/ranked_statements.tsv")).unwrap();
    let got: Vec<(&str, f64)> = ranked
        .lines()
        .map(|l| {
            let (id, v) = l.split_once('\t').unwrap();
            (id, v.parse().unwrap())
        })
        .collect();
    assert_eq!(got.len(), 3);
    assert!(got.iter().all(|(id, _)| keep.contains(id)));
    assert!(got.windows(2).all(|w| w[0].1 >= w[1].1));

    let trust = fs::read_to_string(train.join("trust.tsv")).unwrap();
    let first_user = trust.lines().next().unwrap().split('\t').next().unwrap().to_string();
    fs::write(tmp.path().join("drop.txt"), format!("{first_user}\n")).unwrap();
    let u = credence(&[
        "rank-users",
        "--trust",
        p(&train.join("trust.tsv")),
        "--exclude",
        p(&tmp.path().join("drop.txt")),
        "--out",
        p(&tmp.path().join("u")),
    ]);
    assert_eq!(u.status.code(), Some(0));
    let users = fs::read_to_string(tmp.path().join("u/ranked_users.tsv")).unwrap();
    assert_eq!(users.lines().count(), trust.lines().count() - 1);
    assert!(!users.lines().any(|l| l.starts_with(&format!("{first_user}\t"))));
}

#[test]
fn output_may_not_overwrite_input() {
    let tmp = tempfile::tempdir().unwrap();
    let ranked = tmp.path().join("ranked_statements.tsv");
    fs::write(&ranked, "a\t0.9\nb\t0.1\n").unwrap();
    let o = credence(&["rank-statements", "--marginals", p(&ranked), "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr_line(&o).starts_with("error\tkind=invalid\t"));
    assert_eq!(fs::read_to_string(&ranked).unwrap(), "a\t0.9\nb\t0.1\n");
}

#[test]
fn errors_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let usage = credence(&["train", "--no-such-flag"]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(stderr_line(&usage).starts_with("error\tkind=usage\t"));

    let missing = credence(&["ingest", "--corpus", p(&tmp.path().join("absent")), "--out", p(tmp.path())]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(stderr_line(&missing).starts_with("error\tkind=io\t"));

    let corpus = tmp.path().join("c");
    write_flat_corpus(&corpus, 3);
    fs::write(corpus.join("posts.jsonl"), "{not json\n").unwrap();
    let parse = credence(&["ingest", "--corpus", p(&corpus), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(parse.status.code(), Some(4));
    assert!(stderr_line(&parse).starts_with("error\tkind=parse\t"));

    assert_eq!(stderr_line(&usage).lines().count(), 1);
}

#[test]
fn help_exits_zero() {
    let o = credence(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("rank-statements"));
}
