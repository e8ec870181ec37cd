//! EDP of one goal pair over every worker cell, checked at the start cell
//! against a Monte Carlo estimate.

use adhoc_edp::domain::{Coord, DomainInstance, InstanceLayout, UroPolicies, WorkerSpace};
use adhoc_edp::edp::{edp_monte_carlo, edp_policy_evaluation, EdpConfig};

fn main() -> Result<(), adhoc_edp::Error> {
    let inst = DomainInstance::new(InstanceLayout {
        width: 7,
        height: 5,
        stations: vec![Coord::new(6, 4), Coord::new(6, 0)],
        toolboxes: vec![Coord::new(0, 2)],
        tool_of: vec![0, 0],
        worker_start: Coord::new(0, 2),
        fetcher_start: Coord::new(0, 0),
    })?;
    let policies = UroPolicies::new(&inst);
    let space = WorkerSpace::new(&inst);
    let table = edp_policy_evaluation(&space, &policies.worker[0], &policies.worker[1], &EdpConfig::default())?;
    println!("EDP(pi_0 | pi_1), {} sweeps:", table.sweeps);
    for y in (0..inst.height()).rev() {
        let row: Vec<String> = (0..inst.width())
            .map(|x| format!("{:5.2}", table.get(space.index(Coord::new(x, y)))))
            .collect();
        println!("  {}", row.join(" "));
    }

    let start = space.index(inst.worker_start());
    let mc = edp_monte_carlo(&space, &policies.worker[0], &policies.worker[1], start, 100_000, 7)?;
    println!(
        "start {}: exact {:.4}, sampled {:.4} ± {:.4}",
        inst.worker_start(),
        table.get(start),
        mc.mean,
        mc.std_error
    );
    Ok(())
}
