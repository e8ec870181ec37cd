//! Zones of information, branching and querying for two goals that share a
//! four-step prefix, with the fetcher near and far from the toolbox.

use adhoc_edp::domain::{Coord, DomainInstance, InstanceLayout, UroPolicies};
use adhoc_edp::edp::EdpConfig;
use adhoc_edp::zones::ZoneTables;

fn main() -> Result<(), adhoc_edp::Error> {
    for fetcher in [Coord::new(5, 4), Coord::new(2, 4)] {
        let inst = DomainInstance::new(InstanceLayout {
            width: 10,
            height: 8,
            stations: vec![Coord::new(8, 6), Coord::new(8, 0)],
            toolboxes: vec![Coord::new(8, 4)],
            tool_of: vec![0, 0],
            worker_start: Coord::new(4, 3),
            fetcher_start: fetcher,
        })?;
        let policies = UroPolicies::new(&inst);
        let tables = ZoneTables::build(&inst, &policies, &EdpConfig::default())?;
        let th = tables.thresholds(
            0,
            1,
            inst.cell_index(inst.worker_start()),
            inst.cell_index(fetcher),
        );
        let zq = th.zone_querying();
        println!("fetcher at {fetcher}:");
        println!("  Z_I = [1, {}], eZ_I upper edge {:.3}", th.info_until, th.expected_info_until);
        println!("  Z_B starts at {}", th.branch_from);
        if zq.is_empty() {
            println!("  Z_Q empty: the fetcher commits after the worker has revealed its goal");
        } else {
            let ez = th.expected_zone_querying();
            let ez = if ez.is_empty() {
                "empty".to_string()
            } else {
                format!("[{}, {}]", ez.first, ez.last)
            };
            println!("  Z_Q = [{}, {}], eZ_Q {ez}", zq.first, zq.last);
        }
    }
    Ok(())
}
