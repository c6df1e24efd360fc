//! Single-airport Ground Delay Program simulation and offline RL agents.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: flight, airport quarter-hour and advisory records, CSV I/O.
//! - [`scope`]: which arrivals a program controls.
//! - [`rbs`]: ration-by-schedule slot allocation and the arrival queue.
//! - [`env`]: the quarter-hour environment, observation and reward.
//! - [`gen`]: synthetic scenarios, the scripted expert and offline datasets.
//! - [`nn`]: dense networks with exact backprop and Adam.
//! - [`agents`]: behavioral cloning, conservative Q-learning and evaluation.

pub mod agents;
pub mod data;
pub mod env;
pub mod gen;
pub mod nn;
pub mod rbs;
pub mod scope;

pub use agents::{evaluate, Agent, BcPolicy, CqlAgent, EvalSource, TrainConfig};
pub use data::{FlightRecord, GdpAdvisory, Quarter, Scenario, HORIZON};
pub use env::{Action, EnvConfig, Observation, Policy, SagdpEnv, LOOKAHEAD, OBS_DIM};
pub use gen::{gen_scenario, scripted_expert, GenConfig};
