use std::ffi::{CStr, CString};
use std::ptr;

use snapalign_ffi::*;

/// Deterministic pseudo-random bases.
fn bases(n: usize, mut state: u64) -> Vec<u8> {
    (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            b"ACGT"[(state >> 33) as usize & 3]
        })
        .collect()
}

fn last_error() -> String {
    let p = snap_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Fixture {
    _dir: tempfile::TempDir,
    fasta: CString,
    index_path: CString,
    genome: Vec<u8>,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let genome = bases(50_000, 7);
    let fasta = dir.path().join("ref.fa");
    let mut text = b">chr1\n".to_vec();
    for line in genome.chunks(60) {
        text.extend_from_slice(line);
        text.push(b'\n');
    }
    std::fs::write(&fasta, text).unwrap();
    Fixture {
        fasta: CString::new(fasta.to_str().unwrap()).unwrap(),
        index_path: CString::new(dir.path().join("ref.idx").to_str().unwrap()).unwrap(),
        _dir: dir,
        genome,
    }
}

#[test]
fn build_save_load_and_align() {
    let f = fixture();
    unsafe {
        let mut index = ptr::null_mut();
        assert_eq!(snap_index_build(f.fasta.as_ptr(), 20, &mut index), SnapStatus::Ok);
        assert_eq!(snap_index_genome_length(index), 50_000);
        assert_eq!(snap_index_save(index, f.index_path.as_ptr()), SnapStatus::Ok);
        snap_index_free(index);

        let mut index = ptr::null_mut();
        assert_eq!(snap_index_load(f.index_path.as_ptr(), &mut index), SnapStatus::Ok);
        let mut params = std::mem::zeroed();
        assert_eq!(snap_params_default(&mut params), SnapStatus::Ok);
        assert_eq!(params.seed_size, 20);
        assert_eq!(params.max_distance_percent, 12);
        let mut aligner = ptr::null_mut();
        assert_eq!(snap_aligner_new(index, &params, &mut aligner), SnapStatus::Ok);
        // The aligner keeps the index alive.
        snap_index_free(index);

        let mut read = f.genome[12_000..12_100].to_vec();
        read[40] = if read[40] == b'A' { b'C' } else { b'A' };
        let mut out = std::mem::zeroed();
        assert_eq!(snap_align_read(aligner, read.as_ptr(), read.len(), &mut out), SnapStatus::Ok);
        assert_eq!(out.kind, SnapResultKind::SingleHit);
        assert_eq!(out.has_hit, 1);
        assert_eq!(out.position, 12_000);
        assert_eq!(out.direction, SnapDirection::Forward);
        assert_eq!(out.distance, 1);

        let junk = bases(100, 99);
        assert_eq!(snap_align_read(aligner, junk.as_ptr(), junk.len(), &mut out), SnapStatus::Ok);
        assert_eq!(out.kind, SnapResultKind::NotFound);
        assert_eq!(out.has_hit, 0);
        snap_aligner_free(aligner);
    }
}

#[test]
fn error_codes() {
    let f = fixture();
    unsafe {
        let mut index = ptr::null_mut();
        let missing = CString::new("/nonexistent/ref.fa").unwrap();
        assert_eq!(snap_index_build(missing.as_ptr(), 20, &mut index), SnapStatus::Io);
        assert!(last_error().contains("I/O"));
        assert_eq!(snap_index_build(ptr::null(), 20, &mut index), SnapStatus::NullPointer);
        assert_eq!(snap_index_build(f.fasta.as_ptr(), 40, &mut index), SnapStatus::InvalidArgument);
        assert_eq!(snap_index_load(f.fasta.as_ptr(), &mut index), SnapStatus::Format);
        assert_eq!(snap_params_default(ptr::null_mut()), SnapStatus::NullPointer);

        assert_eq!(snap_index_build(f.fasta.as_ptr(), 16, &mut index), SnapStatus::Ok);
        let mut aligner = ptr::null_mut();
        let mut params = std::mem::zeroed();
        snap_params_default(&mut params);
        assert_eq!(snap_aligner_new(index, &params, &mut aligner), SnapStatus::InvalidArgument);
        assert!(last_error().contains("seed size"));
        params.seed_size = 16;
        assert_eq!(snap_aligner_new(index, &params, &mut aligner), SnapStatus::Ok);
        let read = b"ACGTXACGT";
        let mut out = std::mem::zeroed();
        assert_eq!(snap_align_read(aligner, read.as_ptr(), read.len(), &mut out), SnapStatus::InvalidArgument);
        assert_eq!(snap_align_read(ptr::null_mut(), read.as_ptr(), read.len(), &mut out), SnapStatus::NullPointer);
        snap_aligner_free(aligner);
        snap_index_free(index);
        snap_index_free(ptr::null_mut());
        snap_aligner_free(ptr::null_mut());
    }
}

#[test]
fn bounded_distance_through_c() {
    let mut d = 0i64;
    unsafe {
        let (r, w) = (b"ACGTACGT", b"ACGACGTAA");
        assert_eq!(snap_bounded_distance(r.as_ptr(), r.len(), w.as_ptr(), w.len(), 2, &mut d), SnapStatus::Ok);
        assert_eq!(d, 1);
        let (r, w) = (b"AAAA", b"TTTTTT");
        assert_eq!(snap_bounded_distance(r.as_ptr(), r.len(), w.as_ptr(), w.len(), 2, &mut d), SnapStatus::Ok);
        assert_eq!(d, -1);
        assert_eq!(
            snap_bounded_distance(r.as_ptr(), r.len(), w.as_ptr(), w.len(), -1, &mut d),
            SnapStatus::InvalidArgument
        );
    }
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/snapalign.h")).unwrap();
    for name in [
        "snap_index_build",
        "snap_index_load",
        "snap_index_save",
        "snap_index_free",
        "snap_index_genome_length",
        "snap_aligner_new",
        "snap_aligner_free",
        "snap_align_read",
        "snap_bounded_distance",
        "snap_params_default",
        "snap_last_error_message",
        "typedef struct SnapIndex SnapIndex",
        "SNAP_STATUS_CHECKSUM_MISMATCH = 5",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"snapalign.h\"\n\
         int main(void) {\n\
           SnapParams p; SnapIndex *idx = 0; SnapAligner *al = 0; SnapAlignment out;\n\
           if (snap_params_default(&p) != SNAP_STATUS_OK) return 1;\n\
           (void)idx; (void)al; (void)out;\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}
