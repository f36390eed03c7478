//! Writes three small checkpoints, reads them back and averages them, the
//! way the best fine-tuned checkpoint is blended with its neighbours.
//!
//!     cargo run --example average_checkpoints

use domainsmith::ckpt::{average, read_archive, write_archive, Tensor, TensorArchive};

fn checkpoint(step: u32) -> domainsmith::Result<TensorArchive> {
    let s = step as f32;
    let mut a = TensorArchive::new();
    a.insert("encoder.layer0.weight", Tensor::new(vec![2, 3], (0..6).map(|i| s + i as f32 * 0.1).collect())?)?;
    a.insert("decoder.bias", Tensor::filled(vec![4], s / 1000.0)?)?;
    a.meta.insert("step".into(), step.to_string());
    Ok(a)
}

fn main() -> domainsmith::Result<()> {
    let dir = tempfile_dir();
    let mut loaded = Vec::new();
    for step in [500, 1000, 1500] {
        let path = dir.join(format!("checkpoint_{step}.tarc"));
        write_archive(&checkpoint(step)?, &path)?;
        loaded.push(read_archive(&path)?);
    }

    let uniform = average(&loaded, None)?;
    let weighted = average(&loaded, Some(&[1.0, 1.0, 2.0]))?;
    for (name, t) in uniform.iter() {
        println!("{name} {:?}", t.shape());
        println!("  uniform  {:?}", t.data());
        println!("  weighted {:?}", weighted.get(name).unwrap().data());
    }
    println!("checksum {}", uniform.checksum()?);
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("domainsmith-ckpt");
    std::fs::create_dir_all(&dir).expect("temp dir is writable");
    dir
}
