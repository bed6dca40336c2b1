//! Classical RK4 time stepping with per-stage boundary projection, plus the
//! simulation driver that records probe histories and snapshots.

use crate::error::{Error, Result};
use crate::models::{BoundaryPolicy, Rhs};
use crate::nodes::NodeSet;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// States whose max-norm exceeds this are treated as blow-up.
pub const BLOWUP_LIMIT: f64 = 1e6;

/// Anything integrable by `rk4_step`: a right-hand side plus an optional
/// constraint projection applied to every stage state.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, u: &[f64], t: f64, out: &mut [f64]) -> Result<()>;
    fn project(&self, _u: &mut [f64], _t: f64) -> Result<()> {
        Ok(())
    }
}

/// A PDE discretized in space: RHS evaluator + boundary projection.
#[derive(Debug, Clone)]
pub struct MethodOfLines {
    rhs: Rhs,
    boundary: BoundaryPolicy,
}

impl MethodOfLines {
    pub fn new(rhs: Rhs, boundary: BoundaryPolicy) -> Result<Self> {
        if rhs.n_nodes() != boundary.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: rhs.n_nodes(),
                got: boundary.n_nodes(),
            });
        }
        Ok(Self { rhs, boundary })
    }

    pub fn rhs_evaluator(&self) -> &Rhs {
        &self.rhs
    }

    pub fn boundary(&self) -> &BoundaryPolicy {
        &self.boundary
    }
}

impl OdeSystem for MethodOfLines {
    fn dim(&self) -> usize {
        self.rhs.n_nodes()
    }

    fn rhs(&self, u: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self.rhs.eval(u, t, out)
    }

    fn project(&self, u: &mut [f64], t: f64) -> Result<()> {
        self.boundary.apply(u, t)
    }
}

/// One classical RK4 step from (u, t) to t + dt. Stage states and the result
/// are projected onto the system's constraints at their respective times.
pub fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, u: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    let n = u.len();
    if n != sys.dim() {
        return Err(Error::LengthMismatch { expected: sys.dim(), got: n });
    }
    let half = 0.5 * dt;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];

    sys.rhs(u, t, &mut k1)?;

    for i in 0..n {
        stage[i] = u[i] + half * k1[i];
    }
    sys.project(&mut stage, t + half)?;
    sys.rhs(&stage, t + half, &mut k2)?;

    for i in 0..n {
        stage[i] = u[i] + half * k2[i];
    }
    sys.project(&mut stage, t + half)?;
    sys.rhs(&stage, t + half, &mut k3)?;

    for i in 0..n {
        stage[i] = u[i] + dt * k3[i];
    }
    sys.project(&mut stage, t + dt)?;
    sys.rhs(&stage, t + dt, &mut k4)?;

    let mut next = vec![0.0; n];
    for i in 0..n {
        next[i] = u[i] + dt * ((k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
    }
    sys.project(&mut next, t + dt)?;

    if let Some(bad) = next.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: t + dt, node: bad });
    }
    Ok(next)
}

fn default_snapshot_stride() -> usize {
    100
}

/// Run parameters for `simulate`. `snapshot_stride` = 0 disables snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "default_snapshot_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub probes: Vec<f64>,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::BadTimeStep(self.dt));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(Error::Config(format!("t_max = {} must be >= 0", self.t_max)));
        }
        self.steps()?;
        Ok(())
    }

    /// Number of steps; t_max must be an integer multiple of dt within 1e-9.
    pub fn steps(&self) -> Result<usize> {
        let raw = self.t_max / self.dt;
        let steps = raw.round();
        if (steps * self.dt - self.t_max).abs() > 1e-9 {
            return Err(Error::HorizonNotMultipleOfDt { t_max: self.t_max, dt: self.dt });
        }
        Ok(steps as usize)
    }
}

/// One probe's (requested coordinate -> nearest node) mapping and its full
/// time history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub requested_x: f64,
    pub node_index: usize,
    pub node_x: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub state: Vec<f64>,
}

/// Everything a run produces: probe histories at every step, periodic state
/// snapshots, and the final state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub dt: f64,
    pub times: Vec<f64>,
    pub probes: Vec<ProbeSeries>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: Vec<f64>,
    pub wall_seconds: f64,
}

/// Integrate `sys` from `initial` over [0, t_max]. The initial state is
/// projected onto the constraints at t = 0 before recording; probe values are
/// recorded at every step including t = 0.
pub fn simulate<S: OdeSystem + ?Sized>(
    sys: &S,
    nodes: &NodeSet,
    cfg: &IntegratorConfig,
    initial: &[f64],
) -> Result<SimulationRecord> {
    simulate_with(sys, nodes, cfg, initial, |_, _, _| Ok(()))
}

/// `simulate` with a per-step observer called after each recorded state
/// (including the projected initial state at step 0).
pub fn simulate_with<S, F>(
    sys: &S,
    nodes: &NodeSet,
    cfg: &IntegratorConfig,
    initial: &[f64],
    mut observe: F,
) -> Result<SimulationRecord>
where
    S: OdeSystem + ?Sized,
    F: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    cfg.validate()?;
    if initial.len() != sys.dim() || initial.len() != nodes.len() {
        return Err(Error::LengthMismatch { expected: sys.dim(), got: initial.len() });
    }
    let steps = cfg.steps()?;
    let started = Instant::now();

    let mut probes = Vec::with_capacity(cfg.probes.len());
    for &px in &cfg.probes {
        let idx = nodes.nearest_node(px)?;
        probes.push(ProbeSeries {
            requested_x: px,
            node_index: idx,
            node_x: nodes.x(idx),
            values: Vec::with_capacity(steps + 1),
        });
    }

    let mut u = initial.to_vec();
    sys.project(&mut u, 0.0)?;

    let mut times = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::new();
    let record = |u: &[f64],
                  step: usize,
                  t: f64,
                  times: &mut Vec<f64>,
                  probes: &mut Vec<ProbeSeries>,
                  snapshots: &mut Vec<Snapshot>| {
        times.push(t);
        for p in probes.iter_mut() {
            p.values.push(u[p.node_index]);
        }
        if cfg.snapshot_stride > 0 && step.is_multiple_of(cfg.snapshot_stride) {
            snapshots.push(Snapshot { step, t, state: u.to_vec() });
        }
    };
    record(&u, 0, 0.0, &mut times, &mut probes, &mut snapshots);
    observe(0, 0.0, &u)?;

    for step in 0..steps {
        let t = step as f64 * cfg.dt;
        u = rk4_step(sys, &u, t, cfg.dt)?;
        let t_next = (step + 1) as f64 * cfg.dt;
        let max_abs = u.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if max_abs > BLOWUP_LIMIT {
            return Err(Error::BlowUp { t: t_next, max_abs });
        }
        record(&u, step + 1, t_next, &mut times, &mut probes, &mut snapshots);
        observe(step + 1, t_next, &u)?;
    }

    Ok(SimulationRecord {
        dt: cfg.dt,
        times,
        probes,
        snapshots,
        final_state: u,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelConfig;
    use crate::models::{build_rhs, BoundaryPolicy, ForcingSpec, ModelSpec, OperatorSet};
    use crate::nodes::{build_nodes, build_stencils, Layout};

    struct Decay;
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, u: &[f64], _t: f64, out: &mut [f64]) -> Result<()> {
            out[0] = -u[0];
            Ok(())
        }
    }

    #[test]
    fn one_decay_step_matches_stability_polynomial() {
        let u = rk4_step(&Decay, &[1.0], 0.0, 0.1).unwrap();
        assert!((u[0] - 0.9048375).abs() < 1e-12, "{}", u[0]);
    }

    #[test]
    fn constant_rhs_steps_exactly() {
        struct Constant;
        impl OdeSystem for Constant {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&self, _u: &[f64], _t: f64, out: &mut [f64]) -> Result<()> {
                out[0] = 1.0;
                Ok(())
            }
        }
        let u = rk4_step(&Constant, &[2.5], 0.0, 0.125).unwrap();
        assert_eq!(u[0], 2.625);
    }

    #[test]
    fn two_steps_track_exponential() {
        let mut u = vec![1.0];
        for k in 0..2 {
            u = rk4_step(&Decay, &u, k as f64 * 0.1, 0.1).unwrap();
        }
        assert!((u[0] - (-0.2f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn halving_dt_shows_fourth_order() {
        let err_at = |dt: f64| {
            let steps = (1.0 / dt).round() as usize;
            let mut u = vec![1.0];
            for k in 0..steps {
                u = rk4_step(&Decay, &u, k as f64 * dt, dt).unwrap();
            }
            (u[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err_at(0.1) / err_at(0.05);
        assert!((14.0..=18.0).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn non_finite_states_are_rejected_with_location() {
        struct Poison;
        impl OdeSystem for Poison {
            fn dim(&self) -> usize {
                3
            }
            fn rhs(&self, _u: &[f64], _t: f64, out: &mut [f64]) -> Result<()> {
                out[0] = 0.0;
                out[1] = f64::NAN;
                out[2] = 0.0;
                Ok(())
            }
        }
        match rk4_step(&Poison, &[0.0; 3], 1.0, 0.5) {
            Err(Error::NonFiniteState { t, node }) => {
                assert_eq!(node, 1);
                assert_eq!(t, 1.5);
            }
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    fn small_pde(n: usize) -> (MethodOfLines, NodeSet) {
        let ns = build_nodes(-1.0, 1.0, n, Layout::Uniform).unwrap();
        let sm = build_stencils(&ns, 6).unwrap();
        let kc = KernelConfig::new(0.05).unwrap();
        let model = ModelSpec::kdv(1.0, 0.0, 1e-5).unwrap();
        let ops = OperatorSet::for_model(&ns, &sm, &model, &kc).unwrap();
        let bp = BoundaryPolicy::forced(ForcingSpec::Zero, &ns, ops.d1(), true).unwrap();
        let rhs = build_rhs(&model, &ops, &bp).unwrap();
        (MethodOfLines::new(rhs, bp).unwrap(), ns)
    }

    #[test]
    fn zero_forcing_zero_state_stays_zero() {
        let (sys, ns) = small_pde(16);
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_max: 0.1,
            snapshot_stride: 5,
            probes: vec![0.0],
        };
        let rec = simulate(&sys, &ns, &cfg, &[0.0; 16]).unwrap();
        assert!(rec.final_state.iter().all(|&v| v == 0.0));
        assert!(rec.probes[0].values.iter().all(|&v| v == 0.0));
        assert_eq!(rec.times.len(), 11);
        assert_eq!(rec.snapshots.len(), 3); // steps 0, 5, 10
    }

    #[test]
    fn simulation_is_bitwise_deterministic() {
        let (sys, ns) = small_pde(20);
        let cfg = IntegratorConfig {
            dt: 0.005,
            t_max: 0.05,
            snapshot_stride: 0,
            probes: vec![-0.5, 0.25],
        };
        let init: Vec<f64> = ns.coords().iter().map(|&x| 0.1 * (1.0 - x * x)).collect();
        let a = simulate(&sys, &ns, &cfg, &init).unwrap();
        let b = simulate(&sys, &ns, &cfg, &init).unwrap();
        assert_eq!(a.final_state, b.final_state);
        assert_eq!(a.probes, b.probes);
        assert!(a.snapshots.is_empty());
    }

    #[test]
    fn probe_at_node_coordinate_reads_state_exactly() {
        let (sys, ns) = small_pde(16);
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_max: 0.02,
            snapshot_stride: 1,
            probes: vec![ns.x(7)],
        };
        let init: Vec<f64> = ns.coords().iter().map(|&x| (1.5 * x).sin()).collect();
        let rec = simulate(&sys, &ns, &cfg, &init).unwrap();
        assert_eq!(rec.probes[0].node_index, 7);
        assert_eq!(rec.probes[0].node_x, ns.x(7));
        for (k, snap) in rec.snapshots.iter().enumerate() {
            assert_eq!(rec.probes[0].values[k], snap.state[7]);
        }
    }

    #[test]
    fn config_invariants_are_enforced() {
        let base = IntegratorConfig { dt: 0.1, t_max: 1.0, snapshot_stride: 0, probes: vec![] };
        assert_eq!(base.steps().unwrap(), 10);
        let zero = IntegratorConfig { t_max: 0.0, ..base.clone() };
        assert_eq!(zero.steps().unwrap(), 0);
        let bad_dt = IntegratorConfig { dt: -0.1, ..base.clone() };
        assert!(bad_dt.validate().is_err());
        let misaligned = IntegratorConfig { t_max: 1.03, ..base.clone() };
        assert!(matches!(misaligned.steps(), Err(Error::HorizonNotMultipleOfDt { .. })));
    }

    #[test]
    fn probe_outside_interval_is_rejected() {
        let (sys, ns) = small_pde(12);
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_max: 0.01,
            snapshot_stride: 0,
            probes: vec![1.2],
        };
        assert!(matches!(
            simulate(&sys, &ns, &cfg, &[0.0; 12]),
            Err(Error::ProbeOutsideDomain(_))
        ));
    }

    #[test]
    fn blow_up_is_detected() {
        struct Explode;
        impl OdeSystem for Explode {
            fn dim(&self) -> usize {
                4
            }
            fn rhs(&self, _u: &[f64], _t: f64, out: &mut [f64]) -> Result<()> {
                out.fill(1e7);
                Ok(())
            }
        }
        let nodes = build_nodes(0.0, 1.0, 4, Layout::Uniform).unwrap();
        let cfg = IntegratorConfig { dt: 1.0, t_max: 2.0, snapshot_stride: 0, probes: vec![] };
        match simulate(&Explode, &nodes, &cfg, &[0.0; 4]) {
            Err(Error::BlowUp { t, max_abs }) => {
                assert_eq!(t, 1.0);
                assert!(max_abs > BLOWUP_LIMIT);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn zero_horizon_runs_zero_steps() {
        let (sys, ns) = small_pde(12);
        let cfg = IntegratorConfig { dt: 0.01, t_max: 0.0, snapshot_stride: 0, probes: vec![0.0] };
        let init: Vec<f64> = ns.coords().iter().map(|&x| x.abs()).collect();
        let rec = simulate(&sys, &ns, &cfg, &init).unwrap();
        assert_eq!(rec.times, vec![0.0]);
        assert_eq!(rec.probes[0].values.len(), 1);
    }
}
