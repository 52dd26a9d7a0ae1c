use std::fs;
use std::path::Path;

use sapg_crr::cli::dispatch;

fn run(args: &[String]) -> i32 {
    dispatch(args)
}

fn args(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

const SMALL: &str = "\
seed = 3
n_images = 8
height = 12
width = 12
noise = gaussian
operator = identity
sigma = 0.1
B = 2
iterations = 200
crr_mid_ch = 2
crr_channels = 4
crr_kernel_size = 3
delta0 = 3e-4
gamma = 1e-3
gamma_prime = 1e-3
checkpoint_every = 100
map_iters = 200
map_step = 1e-2
lambda_grid = 0.3,1,3
";

fn pipeline(dir: &Path) {
    let conf = dir.join("run.conf");
    fs::write(&conf, SMALL).unwrap();
    let base = |cmd: &str, out: &str| {
        vec![
            cmd.to_string(),
            format!("--config={}", conf.display()),
            format!("--data={}", dir.join("data").display()),
            format!("--out={}", dir.join(out).display()),
        ]
    };
    assert_eq!(run(&base("corrupt", "data")), 0);
    assert_eq!(run(&base("train", "train")), 0);
    let mut map = base("map", "map");
    map.push(format!("--checkpoint={}", dir.join("train/final.crr").display()));
    assert_eq!(run(&map), 0);
    assert_eq!(
        run(&[
            "eval".into(),
            format!("--data={}", dir.join("data").display()),
            format!("--estimate={}", dir.join("map/map.tnsr").display()),
        ]),
        0
    );
}

#[test]
fn corrupt_train_map_eval() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let d = dir.path();
    for f in ["train/ckpt_000100.crr", "train/ckpt_000200.crr", "train/final.crr", "train/loss.csv", "train/run.log"] {
        assert!(d.join(f).is_file(), "missing {f}");
    }
    let csv = fs::read_to_string(d.join("map/map.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("name,psnr,ssim,lambda"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    for r in rows {
        let cols: Vec<&str> = r.split(',').collect();
        assert_eq!(cols.len(), 4);
        assert!(cols[1].parse::<f64>().unwrap() > 10.0);
    }
    let log = fs::read_to_string(d.join("train/run.log")).unwrap();
    assert!(log.starts_with("# sapg-crr train"));
    assert!(log.contains("iterations = 200"));
}

#[test]
fn equal_seeds_give_identical_checkpoints() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    for f in ["train/final.crr", "train/ckpt_000100.crr", "map/map.tnsr"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]), 1);
    assert_eq!(run(&args(&["frobnicate"])), 1);
    assert_eq!(run(&args(&["train", "--not_a_key=1"])), 1);
    assert_eq!(run(&args(&["train"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = format!("--out={}", dir.path().display());
    assert_eq!(run(&args(&["corrupt", &out, "--n_images=many"])), 1);
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    let out = format!("--out={}", dir.path().join("out").display());
    assert_eq!(run(&args(&["train", &out, &format!("--data={}", missing.display())])), 2);
}

#[test]
fn check_passes() {
    assert_eq!(run(&args(&["check"])), 0);
}
