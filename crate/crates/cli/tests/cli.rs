use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hdrsteg::image_io::{read_cover, write_cover};
use hdrsteg::CoverImage;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hdrsteg"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .env("HDRSTEG_THREADS", "1")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Textured gray image; pixel 0 is `min`, everything else is larger.
fn cover(w: usize, h: usize, min: f32) -> CoverImage {
    let px = (0..w * h)
        .map(|i| {
            if i == 0 {
                return min;
            }
            let (r, c) = ((i / w) as f32, (i % w) as f32);
            let hash = (i as u32).wrapping_mul(2_654_435_761) >> 8;
            let noise = hash as f32 / (1u32 << 24) as f32;
            min + 0.5 + (r * 0.21).sin().abs() * 40.0 + c * 0.05 + noise
        })
        .collect();
    CoverImage::new(w, h, px).unwrap()
}

fn setup(min: f32) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cover.tif");
    write_cover(&cover(64, 64, min), &path).unwrap();
    (dir, path)
}

fn keygen(dir: &Path, planes: &str) {
    let o = run(
        dir,
        &["keygen", "--out", "k.key", "--payload", "0.1", "--planes", planes, "--seed", "77"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn embed_extract_round_trip() {
    let (dir, _) = setup(0.3167254);
    let d = dir.path();
    keygen(d, "6");
    let message: Vec<u8> = (0..100u8).map(|i| i.wrapping_mul(37) ^ 0xA5).collect();
    fs::write(d.join("m.bin"), &message).unwrap();
    let cover_before = fs::read(d.join("cover.tif")).unwrap();

    let o = run(
        d,
        &["embed", "--cover", "cover.tif", "--key", "k.key", "--message", "m.bin", "--out", "s.tif"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(d, &["extract", "--stego", "s.tif", "--key", "k.key", "--out", "r.bin"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(d.join("r.bin")).unwrap(), message);

    // inputs untouched, reruns byte-identical
    assert_eq!(fs::read(d.join("cover.tif")).unwrap(), cover_before);
    let first = fs::read(d.join("s.tif")).unwrap();
    let o = run(
        d,
        &["embed", "--cover", "cover.tif", "--key", "k.key", "--message", "m.bin", "--out", "s2.tif"],
    );
    assert!(o.status.success());
    assert_eq!(fs::read(d.join("s2.tif")).unwrap(), first);
}

#[test]
fn inspect_reports_nx() {
    let (dir, _) = setup(0.3167254);
    let o = run(dir.path(), &["inspect", "cover.tif", "--capacity-map", "cap.pgm"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "n_x 14"), "{out}");
    assert!(out.contains("size 64x64"));
    let pgm = fs::read(dir.path().join("cap.pgm")).unwrap();
    let header = b"P5\n64 64\n16\n";
    assert!(pgm.starts_with(header));
    assert_eq!(pgm.len(), header.len() + 64 * 64);
    assert_eq!(pgm[header.len()], 14);
}

#[test]
fn too_many_planes_exit_3_without_output() {
    let (dir, _) = setup(0.3167254);
    let d = dir.path();
    keygen(d, "15");
    fs::write(d.join("m.bin"), b"hi").unwrap();
    let o = run(
        d,
        &["embed", "--cover", "cover.tif", "--key", "k.key", "--message", "m.bin", "--out", "s.tif"],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("hdrsteg: error[capacity]: "), "{}", stderr(&o));
    assert!(!d.join("s.tif").exists());
}

#[test]
fn oversized_message_exit_3() {
    let (dir, _) = setup(1.0);
    let d = dir.path();
    keygen(d, "2");
    fs::write(d.join("m.bin"), vec![7u8; 4096]).unwrap();
    let o = run(
        d,
        &["embed", "--cover", "cover.tif", "--key", "k.key", "--message", "m.bin", "--out", "s.tif"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!d.join("s.tif").exists());
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["embed", "--cover"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("hdrsteg: error[usage]: "));
    let o = run(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(dir.path(), &["keygen", "--out", "k.key", "--seed", "1", "--payload", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("k.key").exists());
    let o = run(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));

    let o = bin()
        .current_dir(dir.path())
        .env("HDRSTEG_THREADS", "zero")
        .args(["inspect", "x.tif"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn data_errors_exit_2() {
    let (dir, _) = setup(1.0);
    let d = dir.path();
    fs::write(d.join("junk.tif"), b"not a tiff").unwrap();
    let o = run(d, &["inspect", "junk.tif"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("hdrsteg: error[data]: "));

    fs::write(d.join("bad.key"), "key_version=1\nplanes=3\n").unwrap();
    fs::write(d.join("m.bin"), b"x").unwrap();
    let o = run(
        d,
        &["embed", "--cover", "cover.tif", "--key", "bad.key", "--message", "m.bin", "--out", "s.tif"],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = run(d, &["inspect", "missing.tif"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn refuses_to_overwrite_input() {
    let (dir, _) = setup(1.0);
    let d = dir.path();
    keygen(d, "2");
    fs::write(d.join("m.bin"), b"x").unwrap();
    let before = fs::read(d.join("cover.tif")).unwrap();
    let o = run(
        d,
        &["embed", "--cover", "cover.tif", "--key", "k.key", "--message", "m.bin", "--out", "cover.tif"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read(d.join("cover.tif")).unwrap(), before);
}

#[test]
fn simulate_and_report() {
    let (dir, _) = setup(1.0);
    let d = dir.path();
    keygen(d, "4");
    let sim = |out: &str| {
        run(
            d,
            &[
                "simulate", "--cover", "cover.tif", "--key", "k.key", "--seed", "5", "--out", out,
                "--change-map", "sim.pgm",
            ],
        )
    };
    let o = sim("sim.tif");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("bits 1638"));
    let o = sim("sim2.tif");
    assert!(o.status.success());
    assert_eq!(
        fs::read(d.join("sim.tif")).unwrap(),
        fs::read(d.join("sim2.tif")).unwrap()
    );

    let o = run(
        d,
        &[
            "report", "--cover", "cover.tif", "--stego", "sim.tif", "--change-map", "rep.pgm",
            "--export", "stego.int",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("out_of_domain_bits 0"), "{out}");
    let changed: usize = out
        .lines()
        .find_map(|l| l.strip_prefix("changed_pixels "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(changed > 0);
    // simulator and report agree on which pixels changed
    assert_eq!(
        fs::read(d.join("sim.pgm")).unwrap(),
        fs::read(d.join("rep.pgm")).unwrap()
    );
    let export = fs::read(d.join("stego.int")).unwrap();
    assert_eq!(&export[..8], b"HDRSINT1");
    assert_eq!(export.len(), 16 + 4 * 64 * 64);
}

#[test]
fn prep_tiles_and_filters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // 64x32: left tile has n_x 16 and wide range, right tile is flat
    let px: Vec<f32> = (0..64 * 32)
        .map(|i| {
            let c = i % 64;
            if c < 32 {
                1.0 + (i % 29) as f32 * 20.0
            } else {
                2.0
            }
        })
        .collect();
    write_cover(&CoverImage::new(64, 32, px).unwrap(), d.join("src.tif")).unwrap();
    fs::write(d.join("list.txt"), "# sources\nsrc.tif\n").unwrap();
    let o = run(
        d,
        &["prep", "--manifest", "list.txt", "--out-dir", "tiles", "--tile", "32", "--min-nx", "10"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("kept 1 of 2 tiles"), "{}", stdout(&o));
    let tile = read_cover(d.join("tiles/src_r0_c0.tif")).unwrap();
    assert_eq!((tile.width(), tile.height()), (32, 32));
    assert!(!d.join("tiles/src_r0_c1.tif").exists());

    let o = run(d, &["prep", "--out-dir", "tiles"]);
    assert_eq!(o.status.code(), Some(1));
}
