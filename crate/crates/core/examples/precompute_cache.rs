//! Builds the offline tables for one instance, writes them to disk and loads
//! them back.

use adhoc_edp::bench::{generate_instance, PrecomputeCache, SweepConfig};
use std::time::Instant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SweepConfig::desk();
    let inst = generate_instance(&config, 1)?;
    let t = Instant::now();
    let cache = PrecomputeCache::build(&inst, &config.edp_config())?;
    println!(
        "built {} EDP tables in {:.3}s, digest {}",
        cache.tables.edp_tables().len(),
        t.elapsed().as_secs_f64(),
        cache.digest_hex()
    );
    let path = std::env::temp_dir().join("adhoc_edp_example.cache");
    cache.save(&path)?;
    println!("{} bytes at {}", std::fs::metadata(&path)?.len(), path.display());
    let loaded = PrecomputeCache::load(&path, &inst)?;
    println!("reloaded identical: {}", loaded == cache);

    let other = generate_instance(&config, 2)?;
    match PrecomputeCache::load(&path, &other) {
        Err(e) => println!("loading for another instance fails: {e}"),
        Ok(_) => println!("unexpected: cache accepted for another instance"),
    }
    std::fs::remove_file(path)?;
    Ok(())
}
