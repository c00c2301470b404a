use std::path::PathBuf;

use specreg::rng::DEFAULT_SEED;

pub mod cluster;
pub mod crosstalk;
pub mod fit;
pub mod ramsey;
pub mod sample;
pub mod yield_sweep;

/// Global options shared by every subcommand.
pub struct Context {
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub verbose: u8,
}

impl Context {
    /// Flag beats config file beats the built-in default.
    pub fn seed(&self, from_file: Option<u64>) -> u64 {
        self.seed.or(from_file).unwrap_or(DEFAULT_SEED)
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Overwrites `slot` when the flag was given.
pub(crate) fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}
