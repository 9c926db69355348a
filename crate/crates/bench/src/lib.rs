//! Benchmark fixtures.

use etcoord::scenario::ScenarioFile;
use etcoord::sim::Scenario;

/// The bundled scenario at the given step size and horizon.
pub fn bundled(dt: f64, t_end: f64) -> Scenario {
    let mut f = ScenarioFile::bundled();
    f.sim.dt = dt;
    f.sim.t_end = t_end;
    f.into_scenario().expect("bundled scenario is valid")
}
