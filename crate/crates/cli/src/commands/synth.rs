//! `shapcal synth`: seeded Gaussian-blob dataset generation.

use shapcal_core::dataset::synth_blobs;

use crate::{resolve_seed, CliError, SynthArgs};

pub fn run(args: SynthArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    let ds = synth_blobs(
        args.n,
        args.dim,
        args.classes,
        args.separation,
        args.noise_std,
        seed,
    )?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    ds.to_csv_file(&args.out)?;
    println!(
        "wrote {} samples (dim {}, {} classes, seed {}) to {}",
        ds.len(),
        ds.dim(),
        ds.num_classes(),
        seed,
        args.out.display()
    );
    Ok(())
}
