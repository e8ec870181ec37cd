//! One episode per planner on the same instance, goal and seed.

use adhoc_edp::belief::{prior, GoalPrior, PriorKind};
use adhoc_edp::bench::{generate_instance, SweepConfig};
use adhoc_edp::domain::UroPolicies;
use adhoc_edp::edp::EdpConfig;
use adhoc_edp::planners::{Decision, PlannerKind, PlanningContext};
use adhoc_edp::sim::{default_step_cap, run_episode};
use adhoc_edp::zones::ZoneTables;

fn main() -> Result<(), adhoc_edp::Error> {
    let config = SweepConfig::desk();
    let inst = generate_instance(&config, 3)?;
    let policies = UroPolicies::new(&inst);
    let tables = ZoneTables::build(&inst, &policies, &EdpConfig::default())?;
    let belief = prior(&inst, &GoalPrior::new(PriorKind::BoltzmannDistance))?;
    let goal = (0..inst.num_stations())
        .max_by(|&a, &b| belief.prob(a).total_cmp(&belief.prob(b)))
        .unwrap();
    println!("worker {} fetcher {} goal {goal} at {}", inst.worker_start(), inst.fetcher_start(), inst.stations()[goal]);

    for planner in PlannerKind::ALL {
        let ctx = PlanningContext {
            instance: &inst,
            policies: &policies,
            tables: &tables,
            cost: config.cost_model(0.1),
            ga: config.ga,
        };
        let r = run_episode(&ctx, goal, planner, &belief, 42, default_step_cap(&inst))?;
        println!(
            "\n{planner}: cost {:.2}, optimal {:.0}, marginal {:.2}, {} queries",
            r.total_cost,
            r.optimal_cost,
            r.marginal_cost,
            r.num_queries()
        );
        for s in &r.trace {
            let what = match &s.decision {
                Decision::Ask(q) => format!("ask {q}"),
                Decision::Ontic(a) => format!("{a}"),
            };
            println!(
                "  t={:<2} {:<14} worker {} fetcher {} goals left {}",
                s.timestep, what, s.worker, s.fetcher.pos, s.support
            );
        }
    }
    Ok(())
}
