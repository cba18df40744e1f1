//! The collision protocol: schedules of pairwise partial swaps between the
//! shuttle and the registers, register noise, and the two ways of discarding
//! the shuttle afterwards.

use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::densemath::{
    hermitian_eig, kron, partial_trace, reduced_density_of_vector, ComplexMatrix, C64, ONE,
    ZERO,
};
use crate::error::{Error, Result};
use crate::qstate::{fidelity, gibbs_qubit, purity, w_state, StateVector, SystemLayout, Temperature};

/// `cos(g) I + i sin(g) SWAP` in the basis `|00>, |01>, |10>, |11>`.
pub fn partial_swap(gamma: f64) -> ComplexMatrix {
    let c = C64::new(gamma.cos(), 0.0);
    let s = C64::new(0.0, gamma.sin());
    let mut u = ComplexMatrix::zeros(4);
    u[(0, 0)] = c + s;
    u[(3, 3)] = c + s;
    u[(1, 1)] = c;
    u[(2, 2)] = c;
    u[(1, 2)] = s;
    u[(2, 1)] = s;
    u
}

/// `exp(i theta sigma.sigma)` for the isotropic exchange coupling, built from
/// the spectrum of `sigma.sigma` (1 on the triplet, -3 on the singlet).
pub fn exchange_propagator(theta: f64) -> ComplexMatrix {
    let triplet = C64::from_polar(1.0, theta);
    let singlet = C64::from_polar(1.0, -3.0 * theta);
    let mut u = ComplexMatrix::zeros(4);
    u[(0, 0)] = triplet;
    u[(3, 3)] = triplet;
    // |01>, |10> mix into the m = 0 triplet and the singlet
    let sum = (triplet + singlet) * 0.5;
    let diff = (triplet - singlet) * 0.5;
    u[(1, 1)] = sum;
    u[(2, 2)] = sum;
    u[(1, 2)] = diff;
    u[(2, 1)] = diff;
    u
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollisionKind {
    ShuttleRegister,
    IntraRegister,
}

/// One partial swap between two qubits of the full system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pair: (usize, usize),
    gamma: f64,
    kind: CollisionKind,
}

impl CollisionEvent {
    pub fn new(a: usize, b: usize, gamma: f64, layout: &SystemLayout) -> Result<Self> {
        let n = layout.total_qubits();
        for q in [a, b] {
            if q >= n {
                return Err(Error::IndexOutOfRange {
                    index: q,
                    num_qubits: n,
                });
            }
        }
        if a == b {
            return Err(Error::DuplicateIndex(a));
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidConfig(format!("collision angle {gamma} is not finite")));
        }
        let shuttle = layout.shuttle_index();
        let kind = if a == shuttle || b == shuttle {
            CollisionKind::ShuttleRegister
        } else if (layout.is_r(a) && layout.is_r(b)) || (layout.is_s(a) && layout.is_s(b)) {
            CollisionKind::IntraRegister
        } else {
            return Err(Error::InvalidConfig(format!(
                "qubits {} and {} sit in different registers; only the shuttle couples them",
                layout.label(a),
                layout.label(b)
            )));
        };
        Ok(Self {
            pair: (a, b),
            gamma,
            kind,
        })
    }

    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kind(&self) -> CollisionKind {
        self.kind
    }

    /// The register qubit of a shuttle-register event.
    pub fn register_qubit(&self, layout: &SystemLayout) -> Option<usize> {
        match self.kind {
            CollisionKind::ShuttleRegister if self.pair.0 == layout.shuttle_index() => {
                Some(self.pair.1)
            }
            CollisionKind::ShuttleRegister => Some(self.pair.0),
            CollisionKind::IntraRegister => None,
        }
    }
}

/// The ordered events making up one protocol iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionSchedule {
    events: Vec<CollisionEvent>,
}

impl CollisionSchedule {
    pub fn new(events: Vec<CollisionEvent>) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::InvalidConfig("a schedule needs at least one event".into()));
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[CollisionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Register qubits that no chain of events links to the shuttle. Such
    /// qubits never take part in the dynamics.
    pub fn unreachable_qubits(&self, layout: &SystemLayout) -> Vec<usize> {
        let n = layout.total_qubits();
        let mut reached = vec![false; n];
        reached[layout.shuttle_index()] = true;
        loop {
            let mut grew = false;
            for e in &self.events {
                let (a, b) = e.pair;
                if e.gamma.sin() != 0.0 && reached[a] != reached[b] {
                    reached[a] = true;
                    reached[b] = true;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        (0..n).filter(|&q| !reached[q]).collect()
    }

    /// Human-readable warnings about the schedule.
    pub fn warnings(&self, layout: &SystemLayout) -> Vec<String> {
        let missing = self.unreachable_qubits(layout);
        if missing.is_empty() {
            Vec::new()
        } else {
            let names: Vec<String> = missing.iter().map(|&q| layout.label(q).to_string()).collect();
            vec![format!(
                "qubits {} are not connected to the shuttle by the schedule",
                names.join(", ")
            )]
        }
    }
}

/// How the shuttle is routed through the registers in each iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `edge` when the registers have internal couplings, `sweep` otherwise.
    Default,
    /// Shuttle meets every register qubit: `A-r1 .. A-rL`, then the `r`
    /// chain, then `A-s1 .. A-sL`, then the `s` chain.
    Sweep,
    /// Shuttle meets only the first qubit of each register, which passes the
    /// excitation down its chain: `A-r1`, `r` chain, `A-s1`, `s` chain.
    Edge,
}

fn register_chain(
    layout: &SystemLayout,
    site: impl Fn(usize) -> usize,
    gamma: f64,
) -> Result<Vec<CollisionEvent>> {
    (1..layout.register_size())
        .map(|k| CollisionEvent::new(site(k), site(k + 1), gamma, layout))
        .collect()
}

pub fn sweep_schedule(layout: &SystemLayout, gamma_shuttle: f64, gamma_intra: f64) -> Result<CollisionSchedule> {
    let l = layout.register_size();
    let a = layout.shuttle_index();
    let mut events = Vec::new();
    for site in 0..2 {
        let q = |k: usize| if site == 0 { layout.r(k) } else { layout.s(k) };
        for k in 1..=l {
            events.push(CollisionEvent::new(a, q(k), gamma_shuttle, layout)?);
        }
        if gamma_intra != 0.0 {
            events.extend(register_chain(layout, q, gamma_intra)?);
        }
    }
    CollisionSchedule::new(events)
}

pub fn edge_schedule(layout: &SystemLayout, gamma_shuttle: f64, gamma_intra: f64) -> Result<CollisionSchedule> {
    let a = layout.shuttle_index();
    let mut events = Vec::new();
    for site in 0..2 {
        let q = |k: usize| if site == 0 { layout.r(k) } else { layout.s(k) };
        events.push(CollisionEvent::new(a, q(1), gamma_shuttle, layout)?);
        if gamma_intra != 0.0 {
            events.extend(register_chain(layout, q, gamma_intra)?);
        }
    }
    CollisionSchedule::new(events)
}

/// Edge routing when the registers are internally coupled, sweep routing
/// when they are not (the edge route would leave the far qubits untouched).
pub fn default_schedule(layout: &SystemLayout, gamma_shuttle: f64, gamma_intra: f64) -> Result<CollisionSchedule> {
    build_schedule(ScheduleKind::Default, layout, gamma_shuttle, gamma_intra)
}

pub fn build_schedule(
    kind: ScheduleKind,
    layout: &SystemLayout,
    gamma_shuttle: f64,
    gamma_intra: f64,
) -> Result<CollisionSchedule> {
    match kind {
        ScheduleKind::Sweep => sweep_schedule(layout, gamma_shuttle, gamma_intra),
        ScheduleKind::Edge => edge_schedule(layout, gamma_shuttle, gamma_intra),
        ScheduleKind::Default if gamma_intra != 0.0 => edge_schedule(layout, gamma_shuttle, gamma_intra),
        ScheduleKind::Default => sweep_schedule(layout, gamma_shuttle, gamma_intra),
    }
}

/// Register noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Probability that a shuttle-register collision does not happen.
    #[serde(default)]
    pub p_miss: f64,
    /// Dephasing channel `q rho + (1 - q) Z rho Z` on the register qubit.
    #[serde(default = "one")]
    pub q_dephase: f64,
    /// Initial temperature of the `r` register.
    #[serde(default)]
    pub t1: Temperature,
    /// Initial temperature of the `s` register.
    #[serde(default)]
    pub t2: Temperature,
}

fn one() -> f64 {
    1.0
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            p_miss: 0.0,
            q_dephase: 1.0,
            t1: Temperature::ZERO,
            t2: Temperature::ZERO,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_miss) {
            return Err(Error::OutOfRange {
                name: "p_miss",
                value: self.p_miss,
                range: "[0, 1]",
            });
        }
        check_q(self.q_dephase)
    }

    /// No dephasing and zero temperature: pure states stay pure.
    pub fn keeps_purity(&self) -> bool {
        self.q_dephase == 1.0 && self.t1.value() == 0.0 && self.t2.value() == 0.0
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&q) {
        return Err(Error::OutOfRange {
            name: "q_dephase",
            value: q,
            range: "[0.5, 1]",
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "state")]
pub enum ShuttleInit {
    Excited,
    Ground,
    /// `cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>`
    Superposition { theta: f64, phi: f64 },
}

impl ShuttleInit {
    fn amplitudes(&self) -> [C64; 2] {
        match *self {
            ShuttleInit::Excited => [ZERO, ONE],
            ShuttleInit::Ground => [ONE, ZERO],
            ShuttleInit::Superposition { theta, phi } => [
                C64::new((theta / 2.0).cos(), 0.0),
                C64::from_polar((theta / 2.0).sin(), phi),
            ],
        }
    }
}

/// How the shuttle is removed from the register state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// Partial trace over the shuttle.
    Trace,
    /// Post-selection on the shuttle found in `|0>`.
    Project,
}

impl Reduction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Reduction::Trace => "trace",
            Reduction::Project => "project",
        }
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where dephasing acts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DephasingPlacement {
    /// On the register qubit right after each shuttle collision that happened.
    #[default]
    AfterShuttleCollision,
    /// On every register qubit once per iteration, after all collisions.
    EndOfIteration,
}

pub const DEFAULT_GAMMA_SHUTTLE: f64 = 0.05;
pub const STRONG_GAMMA_INTRA: f64 = 0.95 * std::f64::consts::FRAC_PI_2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub register_size: usize,
    #[serde(default = "default_gamma_shuttle")]
    pub gamma_shuttle: f64,
    #[serde(default)]
    pub gamma_intra: f64,
    pub iterations: usize,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default = "default_shuttle")]
    pub shuttle_init: ShuttleInit,
    #[serde(default = "default_schedule_kind")]
    pub schedule: ScheduleKind,
    #[serde(default)]
    pub dephasing: DephasingPlacement,
}

fn default_gamma_shuttle() -> f64 {
    DEFAULT_GAMMA_SHUTTLE
}

fn default_shuttle() -> ShuttleInit {
    ShuttleInit::Excited
}

fn default_schedule_kind() -> ScheduleKind {
    ScheduleKind::Default
}

impl EngineConfig {
    /// Clean protocol with the default shuttle coupling.
    pub fn clean(register_size: usize, gamma_intra: f64, iterations: usize) -> Self {
        Self {
            register_size,
            gamma_shuttle: DEFAULT_GAMMA_SHUTTLE,
            gamma_intra,
            iterations,
            noise: NoiseSpec::default(),
            shuttle_init: ShuttleInit::Excited,
            schedule: ScheduleKind::Default,
            dephasing: DephasingPlacement::AfterShuttleCollision,
        }
    }

    pub fn layout(&self) -> Result<SystemLayout> {
        SystemLayout::new(self.register_size)
    }

    pub fn validate(&self) -> Result<()> {
        self.layout()?;
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        for (name, g) in [("gamma_shuttle", self.gamma_shuttle), ("gamma_intra", self.gamma_intra)] {
            if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&g) {
                return Err(Error::OutOfRange {
                    name,
                    value: g,
                    range: "[0, pi/2]",
                });
            }
        }
        if let ShuttleInit::Superposition { theta, phi } = self.shuttle_init {
            if !theta.is_finite() || !phi.is_finite() {
                return Err(Error::InvalidConfig("shuttle angles must be finite".into()));
            }
        }
        self.noise.validate()
    }

    pub fn schedule(&self) -> Result<CollisionSchedule> {
        build_schedule(self.schedule, &self.layout()?, self.gamma_shuttle, self.gamma_intra)
    }

    pub fn is_pure(&self) -> bool {
        self.noise.keeps_purity()
    }

    pub fn initial_state(&self) -> Result<QuantumState> {
        let layout = self.layout()?;
        let l = layout.register_size();
        let shuttle = self.shuttle_init.amplitudes();
        if self.is_pure() {
            let dim = layout.dim();
            let mut amps = vec![ZERO; dim];
            let bit = 1usize << (layout.total_qubits() - 1 - layout.shuttle_index());
            amps[0] = shuttle[0];
            amps[bit] = shuttle[1];
            return Ok(QuantumState::Pure(amps));
        }
        let r = gibbs_qubit(self.noise.t1);
        let s = gibbs_qubit(self.noise.t2);
        let mut rho = ComplexMatrix::identity(1);
        for _ in 0..l {
            rho = kron(&rho, &r);
        }
        rho = kron(&rho, &ComplexMatrix::outer(&shuttle));
        for _ in 0..l {
            rho = kron(&rho, &s);
        }
        Ok(QuantumState::Mixed(rho))
    }
}

/// State of the full system.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(Vec<C64>),
    Mixed(ComplexMatrix),
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Mixed(m) => m.dim(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn density(&self) -> ComplexMatrix {
        match self {
            QuantumState::Pure(v) => ComplexMatrix::outer(v),
            QuantumState::Mixed(m) => m.clone(),
        }
    }

    pub fn into_mixed(self) -> Self {
        match self {
            QuantumState::Pure(v) => QuantumState::Mixed(ComplexMatrix::outer(&v)),
            m => m,
        }
    }

    /// `<psi| rho |psi>`.
    pub fn fidelity_with(&self, psi: &[C64]) -> f64 {
        match self {
            QuantumState::Pure(v) => {
                let ov: C64 = psi.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
                ov.norm_sqr()
            }
            QuantumState::Mixed(m) => m.sandwich(psi, psi).re,
        }
    }
}

/// Applies `u` (4x4, basis `|ab>`) to qubits `a`, `b` of a vector.
fn apply_two_qubit(psi: &mut [C64], u: &ComplexMatrix, ma: usize, mb: usize) {
    for i in 0..psi.len() {
        if i & ma != 0 || i & mb != 0 {
            continue;
        }
        let idx = [i, i | mb, i | ma, i | ma | mb];
        let v = [psi[idx[0]], psi[idx[1]], psi[idx[2]], psi[idx[3]]];
        for r in 0..4 {
            let mut acc = ZERO;
            for c in 0..4 {
                acc += u[(r, c)] * v[c];
            }
            psi[idx[r]] = acc;
        }
    }
}

/// Applies the collision unitary to the two named qubits of `state`.
pub fn apply_collision(state: &mut QuantumState, event: &CollisionEvent) -> Result<()> {
    let n = state.num_qubits();
    let (a, b) = event.pair;
    for q in [a, b] {
        if q >= n {
            return Err(Error::IndexOutOfRange {
                index: q,
                num_qubits: n,
            });
        }
    }
    let u = partial_swap(event.gamma);
    let ma = 1usize << (n - 1 - a);
    let mb = 1usize << (n - 1 - b);
    match state {
        QuantumState::Pure(v) => apply_two_qubit(v, &u, ma, mb),
        QuantumState::Mixed(rho) => {
            let dim = rho.dim();
            // U rho U^dagger = U (U rho^dagger)^dagger, and rho is Hermitian
            let mut cols = vec![ZERO; dim];
            for _ in 0..2 {
                let mut next = ComplexMatrix::zeros(dim);
                for c in 0..dim {
                    for r in 0..dim {
                        cols[r] = rho[(r, c)];
                    }
                    apply_two_qubit(&mut cols, &u, ma, mb);
                    for r in 0..dim {
                        // store transposed-conjugated: next = (U rho)^dagger
                        next[(c, r)] = cols[r].conj();
                    }
                }
                *rho = next;
            }
        }
    }
    Ok(())
}

/// Dephasing channel with Kraus operators `sqrt(q) I`, `sqrt(1-q) Z` on one
/// qubit; coherences of that qubit shrink by `2q - 1`.
pub fn apply_dephasing(state: &mut QuantumState, qubit: usize, q: f64) -> Result<()> {
    check_q(q)?;
    let n = state.num_qubits();
    if qubit >= n {
        return Err(Error::IndexOutOfRange {
            index: qubit,
            num_qubits: n,
        });
    }
    if q == 1.0 {
        return Ok(());
    }
    if let QuantumState::Pure(_) = state {
        *state = std::mem::replace(state, QuantumState::Pure(Vec::new())).into_mixed();
    }
    let QuantumState::Mixed(rho) = state else {
        unreachable!()
    };
    let m = 1usize << (n - 1 - qubit);
    let f = 2.0 * q - 1.0;
    let dim = rho.dim();
    for r in 0..dim {
        for c in 0..dim {
            if (r ^ c) & m != 0 {
                rho[(r, c)] *= f;
            }
        }
    }
    Ok(())
}

/// Fixed per-run data for [`step`].
#[derive(Clone, Debug)]
pub struct Protocol {
    pub layout: SystemLayout,
    pub schedule: CollisionSchedule,
    pub noise: NoiseSpec,
    pub dephasing: DephasingPlacement,
}

impl Protocol {
    pub fn from_config(config: &EngineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            layout: config.layout()?,
            schedule: config.schedule()?,
            noise: config.noise,
            dephasing: config.dephasing,
        })
    }
}

/// One protocol iteration. Each shuttle-register event is skipped with
/// probability `p_miss`; the generator is not consulted when `p_miss` is 0.
pub fn step<R: Rng + ?Sized>(state: &mut QuantumState, protocol: &Protocol, rng: &mut R) -> Result<()> {
    let noise = &protocol.noise;
    for event in protocol.schedule.events() {
        let register = event.register_qubit(&protocol.layout);
        if register.is_some() && noise.p_miss > 0.0 && rng.gen::<f64>() < noise.p_miss {
            continue;
        }
        apply_collision(state, event)?;
        if let (Some(q), DephasingPlacement::AfterShuttleCollision) = (register, protocol.dephasing) {
            apply_dephasing(state, q, noise.q_dephase)?;
        }
    }
    if protocol.dephasing == DephasingPlacement::EndOfIteration {
        for q in protocol.layout.register_qubits() {
            apply_dephasing(state, q, noise.q_dephase)?;
        }
    }
    Ok(())
}

/// Register state with the shuttle traced out.
pub fn reduce_trace(state: &QuantumState, layout: &SystemLayout) -> Result<ComplexMatrix> {
    let keep = layout.register_qubits();
    match state {
        QuantumState::Pure(v) => reduced_density_of_vector(v, &keep),
        QuantumState::Mixed(m) => partial_trace(m, &keep),
    }
}

/// Smallest shuttle-ground probability accepted by [`reduce_project`].
pub const MIN_PROJECTION_PROBABILITY: f64 = 1e-12;

/// Register state after finding the shuttle in `|0>`, with the probability
/// of that outcome.
pub fn reduce_project(state: &QuantumState, layout: &SystemLayout) -> Result<(RegisterState, f64)> {
    let n = layout.total_qubits();
    let shift = n - 1 - layout.shuttle_index();
    let low = (1usize << shift) - 1;
    // register index -> full index with the shuttle bit cleared
    let embed = |i: usize| ((i & !low) << 1) | (i & low);
    let rdim = 1usize << (n - 1);
    match state {
        QuantumState::Pure(v) => {
            let amps: Vec<C64> = (0..rdim).map(|i| v[embed(i)]).collect();
            let prob: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            if prob <= MIN_PROJECTION_PROBABILITY {
                return Err(Error::ZeroProbabilityOutcome(prob));
            }
            let s = 1.0 / prob.sqrt();
            Ok((RegisterState::Pure(amps.iter().map(|a| a * s).collect()), prob))
        }
        QuantumState::Mixed(m) => {
            let prob: f64 = (0..rdim).map(|i| m[(embed(i), embed(i))].re).sum();
            if prob <= MIN_PROJECTION_PROBABILITY {
                return Err(Error::ZeroProbabilityOutcome(prob));
            }
            let s = 1.0 / prob;
            let out = ComplexMatrix::from_fn(rdim, |r, c| m[(embed(r), embed(c))] * s);
            Ok((RegisterState::Mixed(out), prob))
        }
    }
}

/// State of the registers once the shuttle is gone.
#[derive(Clone, Debug, PartialEq)]
pub enum RegisterState {
    Pure(Vec<C64>),
    Mixed(ComplexMatrix),
}

impl RegisterState {
    pub fn density(&self) -> ComplexMatrix {
        match self {
            RegisterState::Pure(v) => ComplexMatrix::outer(v),
            RegisterState::Mixed(m) => m.clone(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        let dim = match self {
            RegisterState::Pure(v) => v.len(),
            RegisterState::Mixed(m) => m.dim(),
        };
        dim.trailing_zeros() as usize
    }

    /// Reduced density matrix on `keep` (register indices).
    pub fn reduced(&self, keep: &[usize]) -> Result<ComplexMatrix> {
        match self {
            RegisterState::Pure(v) => reduced_density_of_vector(v, keep),
            RegisterState::Mixed(m) => partial_trace(m, keep),
        }
    }

    pub fn purity(&self) -> f64 {
        match self {
            RegisterState::Pure(_) => 1.0,
            RegisterState::Mixed(m) => purity(m),
        }
    }
}

/// Magnitudes of the single-excitation amplitudes of a (nearly) pure register
/// state, ordered `b_1 .. b_n` with `b_1` on the last qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct WCoefficients {
    pub magnitudes: Vec<f64>,
    /// Weight of the dominant eigenvector outside the single-excitation sector.
    pub residual_weight: f64,
}

pub fn extract_w_coefficients(state: &RegisterState) -> Result<WCoefficients> {
    let vector = match state {
        RegisterState::Pure(v) => v.clone(),
        RegisterState::Mixed(m) => {
            let p = purity(m);
            if p < 1.0 - 1e-6 {
                return Err(Error::NotPure(p));
            }
            let eig = hermitian_eig(m)?;
            eig.eigenvector(m.dim() - 1)
        }
    };
    let n = vector.len().trailing_zeros() as usize;
    let magnitudes: Vec<f64> = (0..n).map(|j| vector[1 << j].norm()).collect();
    let total: f64 = vector.iter().map(|a| a.norm_sqr()).sum();
    let inside: f64 = magnitudes.iter().map(|m| m * m).sum();
    Ok(WCoefficients {
        magnitudes,
        residual_weight: (total - inside).max(0.0),
    })
}

/// Everything recorded after one iteration.
#[derive(Clone, Debug)]
pub struct TrajectoryStep {
    pub iteration: usize,
    pub state: QuantumState,
    /// Probability of the shuttle-ground outcome.
    pub projection_probability: f64,
    /// `None` when that outcome has (numerically) zero probability.
    pub projected: Option<RegisterState>,
    pub w_coefficients: Option<WCoefficients>,
}

impl TrajectoryStep {
    pub fn traced(&self, layout: &SystemLayout) -> Result<ComplexMatrix> {
        reduce_trace(&self.state, layout)
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub layout: SystemLayout,
    pub initial: QuantumState,
    pub steps: Vec<TrajectoryStep>,
}

impl TrajectoryRecord {
    /// Overlap of every recorded state with the initial pure state.
    pub fn return_fidelities(&self) -> Option<Vec<f64>> {
        let QuantumState::Pure(psi0) = &self.initial else {
            return None;
        };
        Some(self.steps.iter().map(|s| s.state.fidelity_with(psi0)).collect())
    }

    /// Fidelity of each projected register state with the register W state.
    pub fn w_fidelities(&self) -> Result<Vec<Option<f64>>> {
        let w = w_state(self.layout.register_qubit_count())?;
        self.steps
            .iter()
            .map(|s| match &s.projected {
                Some(p) => Ok(Some(register_w_fidelity(p, &w)?)),
                None => Ok(None),
            })
            .collect()
    }
}

fn register_w_fidelity(state: &RegisterState, w: &StateVector) -> Result<f64> {
    match state {
        RegisterState::Pure(v) => {
            let ov: C64 = w.amplitudes().iter().zip(v).map(|(a, b)| a.conj() * b).sum();
            Ok(ov.norm_sqr())
        }
        RegisterState::Mixed(m) => fidelity(m, w),
    }
}

/// First iteration at which `fidelities` climbs back above `threshold` after
/// having dropped below it.
pub fn first_recurrence(fidelities: &[f64], threshold: f64) -> Option<usize> {
    let mut dropped = false;
    for (k, &f) in fidelities.iter().enumerate() {
        if f < threshold {
            dropped = true;
        } else if dropped && f > threshold {
            return Some(k + 1);
        }
    }
    None
}

/// Stream of random numbers for realization `index` of a seeded ensemble.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs one trajectory, drawing skips from `rng`.
pub fn run_with_rng<R: Rng + ?Sized>(config: &EngineConfig, rng: &mut R) -> Result<TrajectoryRecord> {
    let protocol = Protocol::from_config(config)?;
    let initial = config.initial_state()?;
    let mut state = initial.clone();
    let mut steps = Vec::with_capacity(config.iterations);
    for iteration in 1..=config.iterations {
        step(&mut state, &protocol, rng)?;
        let (projected, prob) = match reduce_project(&state, &protocol.layout) {
            Ok((p, prob)) => (Some(p), prob),
            Err(Error::ZeroProbabilityOutcome(prob)) => (None, prob),
            Err(e) => return Err(e),
        };
        let w_coefficients = match &projected {
            Some(p) if p.purity() >= 1.0 - 1e-6 => Some(extract_w_coefficients(p)?),
            _ => None,
        };
        steps.push(TrajectoryStep {
            iteration,
            state: state.clone(),
            projection_probability: prob,
            projected,
            w_coefficients,
        });
    }
    Ok(TrajectoryRecord {
        layout: protocol.layout,
        initial,
        steps,
    })
}

/// Runs one trajectory with realization 0 of `seed` (irrelevant when
/// `p_miss` is 0).
pub fn run(config: &EngineConfig) -> Result<TrajectoryRecord> {
    run_with_rng(config, &mut realization_rng(0, 0))
}
