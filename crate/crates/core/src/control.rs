//! The closed loop: a neural position controller driven by the control error
//! and its change, an inverse process model identified online, and the step
//! engine that wires their training signals together.
//!
//! With the default one-step actuation delay, step `k` runs:
//!
//! 1. measure `E_measured(k) = min(lut(U(k-1)) + E_daylight(k), 255)`
//! 2. `eps(k) = E_desired(k) - E_measured(k)`, `deps(k) = eps(k) - eps(k-1)`
//! 3. `U(k) = controller(eps(k), deps(k))`
//! 4. train the inverse model on `E_measured(k), E_measured(k-1), E_measured(k-2) -> U(k)`
//! 5. `U_IM(k) = inverse(E_desired(k), E_desired(k-1), E_desired(k-2))`
//! 6. train the controller on `eps(k-1), deps(k-1) -> U_IM(k)` (from `k = 1`)
//!
//! With zero delay the command is computed first from `eps(k-1), deps(k-1)`
//! and the plant responds within the same step.

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::plant::{DaylightTrajectory, ProcessLut};
use crate::signals::{
    clamp8_sum, scale_error_pair, scale_to_unit, unit_to_d8bv, D8bv, ErrorScaling, UnitSignal,
};
use crate::tinynet::{Activation, Mlp};

const ACTIVATIONS: [Activation; 2] = [Activation::Tanh, Activation::Linear];

/// Default learning rate of both networks.
pub const DEFAULT_GAMMA: f64 = 0.15;

/// 2-input, 1-output controller network.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerNet {
    net: Mlp,
    scaling: ErrorScaling,
}

impl ControllerNet {
    pub fn new(hidden: usize, gamma: f64, use_bias: bool, seed: u64) -> Result<Self> {
        let net = Mlp::init(&[2, hidden, 1], &ACTIVATIONS, gamma, seed)?;
        Self::from_net(if use_bias { net } else { net.without_bias() })
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        if net.input_width() != 2 || net.output_width() != 1 {
            return Err(Error::InvalidNetwork(format!(
                "controller needs 2 inputs and 1 output, got {:?}",
                net.widths()
            )));
        }
        Ok(Self {
            net,
            scaling: ErrorScaling::default(),
        })
    }

    pub fn with_scaling(mut self, scaling: ErrorScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn scaling(&self) -> ErrorScaling {
        self.scaling
    }

    fn inputs(&self, eps: i32, deps: i32) -> Result<[f64; 2]> {
        scale_error_pair(eps, deps, self.scaling)
    }

    /// Raw (unlimited) network output.
    pub fn raw_output(&self, eps: i32, deps: i32) -> Result<f64> {
        Ok(self.net.predict(&self.inputs(eps, deps)?)?[0])
    }

    /// Network output limited to `[-1, 1]` and converted to a command code.
    pub fn action(&self, eps: i32, deps: i32) -> Result<D8bv> {
        Ok(unit_to_d8bv(self.raw_output(eps, deps)?))
    }

    /// Network output limited to `[-1, 1]`.
    pub fn limited_output(&self, eps: i32, deps: i32) -> Result<UnitSignal> {
        Ok(UnitSignal::limited(self.raw_output(eps, deps)?))
    }

    /// One update toward `u_im`; returns the loss before the update.
    pub fn train(&mut self, eps_prev: i32, deps_prev: i32, u_im: D8bv) -> Result<f64> {
        self.train_unit(eps_prev, deps_prev, scale_to_unit(u_im))
    }

    /// One update toward a target already on the network scale.
    pub fn train_unit(&mut self, eps_prev: i32, deps_prev: i32, target: UnitSignal) -> Result<f64> {
        let x = self.inputs(eps_prev, deps_prev)?;
        self.net.train_step(&x, &[target.get()])
    }
}

/// 3-input, 1-output inverse process model.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseModelNet {
    net: Mlp,
}

fn scaled_triple(e: [D8bv; 3]) -> [f64; 3] {
    e.map(|v| scale_to_unit(v).get())
}

impl InverseModelNet {
    pub fn new(hidden: usize, gamma: f64, use_bias: bool, seed: u64) -> Result<Self> {
        let net = Mlp::init(&[3, hidden, 1], &ACTIVATIONS, gamma, seed)?;
        Self::from_net(if use_bias { net } else { net.without_bias() })
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        if net.input_width() != 3 || net.output_width() != 1 {
            return Err(Error::InvalidNetwork(format!(
                "inverse model needs 3 inputs and 1 output, got {:?}",
                net.widths()
            )));
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    /// Raw output for an illuminance triple, newest first.
    pub fn raw_output(&self, e: [D8bv; 3]) -> Result<f64> {
        Ok(self.net.predict(&scaled_triple(e))?[0])
    }

    pub fn action(&self, e: [D8bv; 3]) -> Result<D8bv> {
        Ok(unit_to_d8bv(self.raw_output(e)?))
    }

    pub fn limited_output(&self, e: [D8bv; 3]) -> Result<UnitSignal> {
        Ok(UnitSignal::limited(self.raw_output(e)?))
    }

    /// One update mapping a measured triple (newest first) to `u_target`.
    pub fn train(&mut self, measured: [D8bv; 3], u_target: D8bv) -> Result<f64> {
        self.train_unit(measured, scale_to_unit(u_target))
    }

    pub fn train_unit(&mut self, measured: [D8bv; 3], target: UnitSignal) -> Result<f64> {
        self.net
            .train_step(&scaled_triple(measured), &[target.get()])
    }
}

/// Which command the inverse model is taught to associate with the newest measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InverseTargetLag {
    /// `U(k)`, issued in the same step as `E_measured(k)`.
    #[default]
    Same,
    /// `U(k-1)`, the command the plant actually responded to under a one-step delay.
    Previous,
}

/// Steps between issuing a command and measuring its effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlantDelay {
    Zero,
    #[default]
    One,
}

/// Resolution of the command signals used as training targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainingTargets {
    /// Targets are the 8-bit codes `U` and `U_IM` as logged.
    #[default]
    Quantized,
    /// Targets are the limited network outputs before conversion to codes.
    /// Only the command sent to the plant is quantized.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoopOptions {
    pub inverse_target_lag: InverseTargetLag,
    pub plant_delay: PlantDelay,
    pub training_targets: TrainingTargets,
}

/// Everything the step rules need from earlier steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopState {
    pub k: usize,
    /// Newest first.
    pub e_measured_hist: [D8bv; 3],
    /// Newest first.
    pub e_desired_hist: [D8bv; 3],
    pub eps_prev: i32,
    pub deps_prev: i32,
    pub u_prev: D8bv,
    /// `u_prev` before quantization.
    pub u_prev_unit: UnitSignal,
}

impl Default for LoopState {
    fn default() -> Self {
        Self {
            k: 0,
            e_measured_hist: [D8bv::MIN; 3],
            e_desired_hist: [D8bv::MIN; 3],
            eps_prev: 0,
            deps_prev: 0,
            u_prev: D8bv::MIN,
            u_prev_unit: scale_to_unit(D8bv::MIN),
        }
    }
}

impl LoopState {
    /// Lamps off, zero error history. Illuminance histories are filled with the
    /// first observed values at step 0.
    pub fn new() -> Self {
        Self::default()
    }
}

fn push(hist: &mut [D8bv; 3], v: D8bv) {
    hist.rotate_right(1);
    hist[0] = v;
}

/// One row of the simulation log.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub e_desired: D8bv,
    pub e_daylight: D8bv,
    pub e_electric: D8bv,
    pub e_measured: D8bv,
    pub eps: i32,
    pub deps: i32,
    pub u: D8bv,
    pub u_im: D8bv,
    pub loss_inverse: f64,
    /// `None` at the first step, which has no previous error to train on.
    pub loss_controller: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Measure,
    Control,
    TrainInverse,
    InverseAction,
    TrainController,
}

/// Instrumentation hook called as each phase of a step begins.
pub trait StepObserver {
    fn phase(&mut self, _k: usize, _phase: Phase) {}
}

impl StepObserver for () {}

impl StepObserver for Vec<(usize, Phase)> {
    fn phase(&mut self, k: usize, phase: Phase) {
        self.push((k, phase));
    }
}

/// Advances the loop by one step.
#[allow(clippy::too_many_arguments)]
pub fn loop_step(
    state: &mut LoopState,
    ctl: &mut ControllerNet,
    inv: &mut InverseModelNet,
    lut: &ProcessLut,
    options: LoopOptions,
    e_desired: D8bv,
    e_daylight: D8bv,
    observer: &mut dyn StepObserver,
) -> Result<StepRecord> {
    let k = state.k;
    let measure = |obs: &mut dyn StepObserver, u_applied: D8bv| {
        obs.phase(k, Phase::Measure);
        let e_electric = lut.eval(u_applied);
        (e_electric, clamp8_sum(e_electric, e_daylight))
    };

    let (e_electric, e_measured, u_unit) = match options.plant_delay {
        PlantDelay::One => {
            let (ee, em) = measure(observer, state.u_prev);
            let eps = e_desired.as_i32() - em.as_i32();
            observer.phase(k, Phase::Control);
            let u = ctl.limited_output(eps, eps - state.eps_prev)?;
            (ee, em, u)
        }
        PlantDelay::Zero => {
            observer.phase(k, Phase::Control);
            let u = ctl.limited_output(state.eps_prev, state.deps_prev)?;
            let (ee, em) = measure(observer, unit_to_d8bv(u.get()));
            (ee, em, u)
        }
    };
    let u = unit_to_d8bv(u_unit.get());
    let target = |unit: UnitSignal, code: D8bv| match options.training_targets {
        TrainingTargets::Continuous => unit,
        TrainingTargets::Quantized => scale_to_unit(code),
    };
    let eps = e_desired.as_i32() - e_measured.as_i32();
    let deps = eps - state.eps_prev;

    if k == 0 {
        state.e_measured_hist = [e_measured; 3];
        state.e_desired_hist = [e_desired; 3];
    } else {
        push(&mut state.e_measured_hist, e_measured);
        push(&mut state.e_desired_hist, e_desired);
    }

    observer.phase(k, Phase::TrainInverse);
    let inverse_target = match options.inverse_target_lag {
        InverseTargetLag::Same => target(u_unit, u),
        InverseTargetLag::Previous => target(state.u_prev_unit, state.u_prev),
    };
    let loss_inverse = inv.train_unit(state.e_measured_hist, inverse_target)?;

    observer.phase(k, Phase::InverseAction);
    let u_im_unit = inv.limited_output(state.e_desired_hist)?;
    let u_im = unit_to_d8bv(u_im_unit.get());

    let loss_controller = if k > 0 {
        observer.phase(k, Phase::TrainController);
        Some(ctl.train_unit(state.eps_prev, state.deps_prev, target(u_im_unit, u_im))?)
    } else {
        None
    };

    state.eps_prev = eps;
    state.deps_prev = deps;
    state.u_prev = u;
    state.u_prev_unit = u_unit;
    state.k += 1;

    Ok(StepRecord {
        k,
        e_desired,
        e_daylight,
        e_electric,
        e_measured,
        eps,
        deps,
        u,
        u_im,
        loss_inverse,
        loss_controller,
    })
}

/// A closed loop that owns its networks, plant and state.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub state: LoopState,
    pub controller: ControllerNet,
    pub inverse: InverseModelNet,
    pub lut: ProcessLut,
    pub options: LoopOptions,
}

impl ClosedLoop {
    pub fn new(
        controller: ControllerNet,
        inverse: InverseModelNet,
        lut: ProcessLut,
        options: LoopOptions,
    ) -> Self {
        Self {
            state: LoopState::new(),
            controller,
            inverse,
            lut,
            options,
        }
    }

    pub fn step(&mut self, e_desired: D8bv, e_daylight: D8bv) -> Result<StepRecord> {
        self.step_observed(e_desired, e_daylight, &mut ())
    }

    pub fn step_observed(
        &mut self,
        e_desired: D8bv,
        e_daylight: D8bv,
        observer: &mut dyn StepObserver,
    ) -> Result<StepRecord> {
        loop_step(
            &mut self.state,
            &mut self.controller,
            &mut self.inverse,
            &self.lut,
            self.options,
            e_desired,
            e_daylight,
            observer,
        )
    }
}

/// Result of [`run_simulation`].
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub records: Vec<StepRecord>,
    pub controller: ControllerNet,
    pub inverse: InverseModelNet,
    pub lut: ProcessLut,
    pub daylight: DaylightTrajectory,
}

/// Steps `closed_loop` once per daylight sample at a fixed setpoint.
pub fn simulate(
    closed_loop: &mut ClosedLoop,
    e_desired: D8bv,
    daylight: &DaylightTrajectory,
) -> Result<Vec<StepRecord>> {
    daylight
        .samples()
        .iter()
        .map(|&day| closed_loop.step(e_desired, day))
        .collect()
}

/// Builds networks, plant and daylight from `config` and runs the loop over
/// the whole trajectory.
pub fn run_simulation(config: &SimConfig) -> Result<SimulationRun> {
    config.validate()?;
    let lut = config.lut.build()?;
    let daylight = config.daylight_trajectory()?;
    let controller = ControllerNet::new(
        config.hidden_controller,
        config.gamma_controller,
        config.use_bias,
        config.seed_controller,
    )?
    .with_scaling(config.error_scaling);
    let inverse = InverseModelNet::new(
        config.hidden_inverse,
        config.gamma_inverse,
        config.use_bias,
        config.seed_inverse,
    )?;
    let options = LoopOptions {
        inverse_target_lag: config.inverse_target_lag,
        plant_delay: config.plant_delay,
        training_targets: config.training_targets,
    };
    let mut cl = ClosedLoop::new(controller, inverse, lut, options);
    let records = simulate(&mut cl, config.e_desired, &daylight)?;
    Ok(SimulationRun {
        records,
        controller: cl.controller,
        inverse: cl.inverse,
        lut: cl.lut,
        daylight,
    })
}
