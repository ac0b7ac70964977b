use super::StepInfo;
use crate::complex::LandmarkComplex;
use crate::world::{Action, SensorReading, World};

/// What a policy sees before choosing the actions of one step.
pub struct PolicyView<'a> {
    pub step: u64,
    pub world: &'a World,
    /// One reading per agent; dead agents get a blank reading.
    pub readings: &'a [SensorReading],
    /// Observations queued by each agent and not yet acknowledged.
    pub pending: &'a [usize],
    /// The server's complex. Built-in planners read it directly.
    pub shared: &'a LandmarkComplex,
    pub info: StepInfo,
}

/// Chooses one action per agent. `None` disconnects that agent for the rest
/// of the episode.
pub trait Policy {
    fn name(&self) -> &str;

    /// Called once per episode before the first step.
    fn reset(&mut self, _world: &World, _seed: u64) {}

    fn act(&mut self, view: &PolicyView<'_>) -> Vec<Option<Action>>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn reset(&mut self, world: &World, seed: u64) {
        (**self).reset(world, seed)
    }

    fn act(&mut self, view: &PolicyView<'_>) -> Vec<Option<Action>> {
        (**self).act(view)
    }
}
