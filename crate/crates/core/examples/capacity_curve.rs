//! Conflict-point capacity against platoon size, and the accumulation delay it costs.

use cmat::analytics::{capacity_platoon, expected_platoon_delay, simulate_platoon_accumulation, Interarrival};
use cmat::params::{vps_to_vph, FlowParameters};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fp = FlowParameters::default();
    let mu = 3.6;
    println!("{:>4} {:>10} {:>12} {:>12}", "N", "veh/h", "delay (s)", "simulated");
    for n in [1, 2, 3, 5, 10, 20, 50, 96] {
        let cap = vps_to_vph(capacity_platoon(&fp, n)?);
        let d = expected_platoon_delay(n, mu)?;
        let mc = simulate_platoon_accumulation(n, mu, Interarrival::Exponential, 20_000, 7)?;
        println!("{n:>4} {cap:>10.1} {d:>12.2} {:>12.2}", mc.mean_wait);
    }
    println!("saturation limit {:.0} veh/h", vps_to_vph(fp.q_max()));
    Ok(())
}
