//! A five-instance desk sweep: summary table plus CSV and plot output.

use adhoc_edp::bench::{emit_plots, run_sweep, SweepConfig};

fn main() -> Result<(), adhoc_edp::Error> {
    let config = SweepConfig {
        instances: 5,
        ..SweepConfig::desk()
    };
    let out = run_sweep(&config, 0)?;
    for s in &out.summary {
        println!(
            "{:<28} {:.1} {:<16} {:>6.3} ± {:.3}  queries {:>4}  ezq better/worse {}/{}",
            s.prior.name(),
            s.per_station_cost,
            s.planner.name(),
            s.mean_marginal_cost,
            s.se_marginal_cost,
            s.total_queries,
            s.ezq_better,
            s.ezq_worse
        );
    }
    let dir = std::env::temp_dir().join("adhoc_edp_sweep_small");
    out.write(&dir)?;
    let plots = emit_plots(&out.summary, &out.histogram, &dir.join("plots"))?;
    println!("wrote CSVs and {} plot files under {}", plots.len(), dir.display());
    Ok(())
}
