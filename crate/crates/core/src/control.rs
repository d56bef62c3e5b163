//! The shared fixed-cadence control loop used by baselines and the agent.

use crate::controllers::{Controller, ControllerInputs};
use crate::net::PhaseId;
use crate::sim::{SimError, SimEvent, SimState};

/// Anything that can pick a phase for a junction at a decision point.
pub trait PhaseDecider {
    /// `None` leaves the signal as it is.
    fn decide(&mut self, sim: &SimState, junction: &str, cycle: u64) -> Result<Option<PhaseId>, SimError>;
}

impl PhaseDecider for Controller {
    fn decide(&mut self, sim: &SimState, junction: &str, _cycle: u64) -> Result<Option<PhaseId>, SimError> {
        let inputs = ControllerInputs::gather(sim, junction)?;
        Ok(Some(Controller::decide(self, &inputs)))
    }
}

/// Every `delta_t` seconds asks `decider` for each junction showing green
/// (in id order), applies the phases and advances the simulation, until the
/// horizon. Returns all simulation events.
pub fn run_control_loop(
    sim: &mut SimState,
    decider: &mut dyn PhaseDecider,
    delta_t: u64,
) -> Result<Vec<SimEvent>, SimError> {
    let junctions: Vec<String> = sim.junction_ids().map(str::to_string).collect();
    let mut events = Vec::new();
    let mut cycle = 0;
    while sim.clock() < sim.horizon() {
        for junction in &junctions {
            if !sim.signal(junction)?.is_green() {
                continue;
            }
            if let Some(phase) = decider.decide(sim, junction, cycle)? {
                sim.command_phase(junction, phase)?;
            }
        }
        let until = sim.clock() + delta_t.max(1);
        events.extend(sim.run_until(until)?);
        cycle += 1;
    }
    Ok(events)
}
