//! Value and cost of candidate queries at the first decision of a random
//! desk-scale instance.

use adhoc_edp::belief::{prior, GoalPrior, PriorKind};
use adhoc_edp::bench::{generate_instance, SweepConfig};
use adhoc_edp::domain::{FetcherState, UroPolicies};
use adhoc_edp::edp::EdpConfig;
use adhoc_edp::planners::{snapshot, DecisionState, PlanningContext};
use adhoc_edp::query::{value_of_query, Query};
use adhoc_edp::zones::ZoneTables;

fn main() -> Result<(), adhoc_edp::Error> {
    let config = SweepConfig::desk();
    let inst = generate_instance(&config, 11)?;
    let policies = UroPolicies::new(&inst);
    let tables = ZoneTables::build(&inst, &policies, &EdpConfig::default())?;
    let belief = prior(&inst, &GoalPrior::new(PriorKind::BoltzmannDistance))?;
    let ctx = PlanningContext {
        instance: &inst,
        policies: &policies,
        tables: &tables,
        cost: config.cost_model(0.1),
        ga: config.ga,
    };
    let state = DecisionState {
        worker: inst.worker_start(),
        fetcher: FetcherState::empty_handed(inst.fetcher_start()),
        belief: &belief,
        t: 1,
    };
    let snap = snapshot(&ctx, &state);
    println!("in a zone of querying now: {}", snap.in_zone_querying(1));

    let mut rows: Vec<(Query, f64)> = Vec::new();
    for g in 0..inst.num_stations() {
        rows.push((Query::new([g])?, 0.0));
    }
    let mut by_prob: Vec<usize> = (0..inst.num_stations()).collect();
    by_prob.sort_by(|&a, &b| belief.prob(b).total_cmp(&belief.prob(a)));
    rows.push((Query::new(by_prob[..inst.num_stations() / 2].iter().copied())?, 0.0));
    for (q, v) in &mut rows {
        *v = value_of_query(q, &belief, &snap);
    }
    println!("{:<24} {:>8} {:>8} {:>8}", "query", "P(yes)", "value", "net");
    for (q, v) in rows {
        let p_yes: f64 = q.iter().map(|g| belief.prob(g)).sum();
        let cost = ctx.cost.query_cost(&q);
        println!("{:<24} {:>8.3} {:>8.3} {:>8.3}", q.to_string(), p_yes, v, v - cost);
    }
    Ok(())
}
