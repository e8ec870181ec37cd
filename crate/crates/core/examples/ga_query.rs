//! Query selection on one decision point: the GA used by eZ_Q against the
//! exhaustive optimum, and the XOR-objective choice of BL:Cost+Prob.

use adhoc_edp::belief::{prior, GoalPrior, PriorKind};
use adhoc_edp::bench::{generate_instance, SweepConfig};
use adhoc_edp::domain::{FetcherState, UroPolicies};
use adhoc_edp::edp::EdpConfig;
use adhoc_edp::optim::{ga_optimize, solve_query_objective, BitVector};
use adhoc_edp::planners::{snapshot, DecisionState, PlanningContext};
use adhoc_edp::query::QueryEvaluator;
use adhoc_edp::zones::ZoneTables;

fn main() -> Result<(), adhoc_edp::Error> {
    let config = SweepConfig {
        stations: 12,
        ..SweepConfig::desk()
    };
    // First seed whose start state sits inside some zone of querying.
    for seed in 1.. {
        let inst = generate_instance(&config, seed)?;
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
        if !snap.in_zone_querying(1) {
            continue;
        }
        let eval = QueryEvaluator::new(&snap, &belief);
        let net = |b: &BitVector| {
            eval.value_local(b.bits()) - (ctx.cost.query_base + ctx.cost.per_station * b.count_ones() as f64)
        };
        let n = snap.len();
        let (brute_v, brute_f) = (0..1u64 << n)
            .map(|m| BitVector::from_mask(m, n))
            .map(|v| {
                let f = net(&v);
                (v, f)
            })
            .fold((BitVector::zeros(n), f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        println!("instance seed {seed}, {n} candidate goals");
        println!("exhaustive: {:?} net {brute_f:.4}", brute_v.ones().collect::<Vec<_>>());
        for ga_seed in 0..5 {
            let (v, f) = ga_optimize(net, n, &ctx.ga.with_seed(ga_seed))?;
            println!("GA seed {ga_seed}: {:?} net {f:.4}", v.ones().collect::<Vec<_>>());
        }
        let probs: Vec<f64> = snap.goals().iter().map(|&g| belief.prob(g)).collect();
        let (x, obj) = solve_query_objective(&snap.branching_pairs(1), &probs, ctx.cost.per_station);
        println!("XOR objective: {:?} value {obj:.4}", x.ones().collect::<Vec<_>>());
        break;
    }
    Ok(())
}
