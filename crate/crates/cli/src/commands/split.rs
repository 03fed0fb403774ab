//! `shapcal split`: seeded train/val/test partition of a CSV dataset.

use shapcal_core::dataset::{load_csv, split};

use crate::output::{ensure_out_dir, out_path};
use crate::{resolve_seed, CliError, SplitArgs};

fn parse_fractions(text: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::usage(format!(
            "--fractions expects three comma-separated numbers, got {text:?}"
        )));
    }
    let mut nums = [0.0f64; 3];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("--fractions: {part:?} is not a number")))?;
    }
    Ok((nums[0], nums[1], nums[2]))
}

pub fn run(args: SplitArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    let fractions = parse_fractions(&args.fractions)?;
    let mut ds = load_csv(&args.input, &args.label, !args.no_header)?;
    if args.balance {
        ds = ds.balanced_subsample(seed)?;
    }
    let (train, val, test) = split(&ds, fractions, seed)?;
    ensure_out_dir(&args.out_dir)?;
    let mut written = Vec::new();
    for (part, name) in [(train, "train.csv"), (val, "val.csv"), (test, "test.csv")] {
        if let Some(part) = part {
            let path = out_path(&args.out_dir, name);
            part.to_csv_file(&path)?;
            written.push(format!("{} ({} rows)", path.display(), part.len()));
        }
    }
    println!("seed {seed}; wrote {}", written.join(", "));
    Ok(())
}
