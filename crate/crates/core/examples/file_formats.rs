//! TNSR tensors, PNM images and CRR checkpoints written and read back.

use sapg_crr::crr::{read_checkpoint, write_checkpoint, Checkpoint, CrrArchitecture, CrrParams};
use sapg_crr::io::{read_pnm, read_tensor, write_pnm, write_tensor};
use sapg_crr::rng::RngStream;
use sapg_crr::synthetic::blob_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("sapg_crr_formats");
    std::fs::create_dir_all(&dir)?;

    let img = blob_dataset(1, 3, 16, 16, 0)?.items()[0].clone();
    write_tensor(dir.join("x.tnsr"), img.tensor())?;
    println!("tnsr exact: {}", read_tensor(dir.join("x.tnsr"))? == *img.tensor());

    write_pnm(dir.join("x.ppm"), &img)?;
    let back = read_pnm(dir.join("x.ppm"))?;
    let err = back.tensor().sub(img.tensor()).max_abs();
    println!("pnm max quantization error {err:.4} (≤ 1/510)");

    let arch = CrrArchitecture { use_diff: true, use_bias: true, learn_log_scale: true, ..Default::default() };
    let ck = Checkpoint { params: CrrParams::init(arch, &mut RngStream::new(0, 0))?, iteration: 42, seed: 7 };
    write_checkpoint(dir.join("theta.crr"), &ck)?;
    let loaded = read_checkpoint(dir.join("theta.crr"))?;
    println!("checkpoint exact: {}, {} parameters", loaded == ck, loaded.params.parameter_count());
    Ok(())
}
