use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flate2::write::GzEncoder;
use flate2::Compression;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn snapalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snapalign")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn random_seq(len: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| b"ACGT"[rng.gen_range(0..4)] as char).collect()
}

struct Fixture {
    dir: TempDir,
    genome: String,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let genome = random_seq(20_000, 5);
        fs::write(dir.path().join("ref.fa"), format!(">chr1\n{genome}\n")).unwrap();
        let out = snapalign(&["index", p(&dir.path().join("ref.fa")), p(&dir.path().join("ref.idx"))]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        Fixture { dir, genome }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn align(&self, reads: &str, extra: &[&str]) -> Output {
        let (idx, reads, sam) = (self.path("ref.idx"), self.path(reads), self.path("out.sam"));
        let mut args = vec!["align", p(&idx), p(&reads), p(&sam)];
        args.extend_from_slice(extra);
        snapalign(&args)
    }

    fn sam_records(&self) -> Vec<Vec<String>> {
        fs::read_to_string(self.path("out.sam"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('@'))
            .map(|l| l.split('\t').map(str::to_string).collect())
            .collect()
    }
}

#[test]
fn tiny_reference_exact_read() {
    let dir = TempDir::new().unwrap();
    let (fa, idx, fq, sam) =
        (dir.path().join("r.fa"), dir.path().join("r.idx"), dir.path().join("r.fq"), dir.path().join("r.sam"));
    fs::write(&fa, ">tiny\nACGTTGCAAG\n").unwrap();
    fs::write(&fq, "@r1\nGTTGCAAG\n+\nIIIIIIII\n").unwrap();
    assert!(snapalign(&["index", p(&fa), p(&idx), "--seed-size", "4"]).status.success());
    let out = snapalign(&["align", p(&idx), p(&fq), p(&sam), "--seed-size", "4", "--max-dist", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&sam).unwrap();
    let rec: Vec<&str> = text.lines().find(|l| !l.starts_with('@')).unwrap().split('\t').collect();
    assert_eq!((rec[1], rec[2], rec[3], rec[5]), ("0", "tiny", "3", "8M"));
}

#[test]
fn simulate_align_eval_pipeline() {
    let fx = Fixture::new();
    let sim = |name: &str| {
        snapalign(&["simulate", p(&fx.path("ref.fa")), p(&fx.path(name)), "--count", "500", "--rng-seed", "42"])
    };
    assert!(sim("a.fq").status.success());
    assert!(sim("b.fq").status.success());
    assert_eq!(fs::read(fx.path("a.fq")).unwrap(), fs::read(fx.path("b.fq")).unwrap());

    let out = fx.align("a.fq", &["--threads", "3", "--stable-order"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fx.sam_records().len(), 500);
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fx.path("out.sam.stats")).unwrap()).unwrap();
    assert_eq!(stats["threads"], 3);
    assert_eq!(stats["stats"]["reads"], 500);

    let out = snapalign(&["eval", p(&fx.path("out.sam"))]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("total_reads=500\n"), "{text}");
    assert!(text.contains("reads_with_truth=500\n"), "{text}");
    let aligned: f64 = text.lines().find_map(|l| l.strip_prefix("aligned_pct=")).unwrap().parse().unwrap();
    assert!(aligned > 95.0, "{text}");

    let out = snapalign(&["eval", p(&fx.path("out.sam")), "--format", "json"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["counts"]["total"], 500);
}

#[test]
fn gzip_input_matches_plain() {
    let fx = Fixture::new();
    let mut fq = String::new();
    for i in 0..50 {
        let start = i * 300;
        fq.push_str(&format!("@r{i}\n{}\n+\n{}\n", &fx.genome[start..start + 100], "I".repeat(100)));
    }
    fs::write(fx.path("plain.fq"), &fq).unwrap();
    let mut gz = GzEncoder::new(Vec::new(), Compression::default());
    gz.write_all(fq.as_bytes()).unwrap();
    fs::write(fx.path("reads.fq.gz"), gz.finish().unwrap()).unwrap();

    assert!(fx.align("plain.fq", &["--stable-order"]).status.success());
    let plain = fx.sam_records();
    assert!(fx.align("reads.fq.gz", &["--stable-order"]).status.success());
    assert_eq!(fx.sam_records(), plain);
    for (i, rec) in plain.iter().enumerate() {
        assert_eq!(rec[3], (i * 300 + 1).to_string());
    }
}

#[test]
fn empty_reads_give_header_only() {
    let fx = Fixture::new();
    fs::write(fx.path("empty.fq"), "").unwrap();
    assert!(fx.align("empty.fq", &[]).status.success());
    let text = fs::read_to_string(fx.path("out.sam")).unwrap();
    assert!(text.starts_with("@HD"));
    assert!(fx.sam_records().is_empty());
}

#[test]
fn exit_codes() {
    let fx = Fixture::new();
    assert_eq!(snapalign(&["--help"]).status.code(), Some(0));
    assert_eq!(snapalign(&["align"]).status.code(), Some(1));
    assert_eq!(fx.align("reads.fq", &["--max-dist", "lots"]).status.code(), Some(1));
    assert_eq!(fx.align("missing.fq", &[]).status.code(), Some(2));
    fs::write(fx.path("bad.fq"), "@r1\nACGT\n+\nII\n").unwrap();
    assert_eq!(fx.align("bad.fq", &[]).status.code(), Some(3));
    fs::write(fx.path("ok.fq"), "@r1\nACGTACGTACGTACGTACGTAC\n+\nIIIIIIIIIIIIIIIIIIIIII\n").unwrap();
    assert_eq!(fx.align("ok.fq", &["--seed-size", "16"]).status.code(), Some(3));
    fs::write(fx.path("other.fa"), ">x\nACGTACGTACGTACGTACGTACGTACGT\n").unwrap();
    assert_eq!(fx.align("ok.fq", &["--reference", p(&fx.path("other.fa"))]).status.code(), Some(3));
}
