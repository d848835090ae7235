//! Drives an experiment from a TOML config and lists the files it writes.

use age_invariance::cli::{self, Config};

fn main() -> age_invariance::Result<()> {
    let text = cli::config::DEFAULT_CONFIG.replace("beta = 1.5", "beta = 4.0");
    let cfg = Config::parse(&text)?;
    let out = std::env::temp_dir().join("age-invariance-example");
    let outcome = cli::invariance_report(&cfg, &out)?;
    for line in outcome.summary {
        println!("{line}");
    }
    for file in outcome.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}
