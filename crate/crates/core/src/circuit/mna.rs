//! Modified nodal analysis with unknowns `y = (u, j_L, j_V)`:
//!
//! ```text
//! A_C d/dt q_C(A_Cᵀu) + A_R g_R(A_Rᵀu) + A_L j_L + A_V j_V = -A_M j_M
//! d/dt φ_L(j_L) - A_Lᵀu = 0
//! A_Vᵀu - v_s(t) = 0
//! ```
//!
//! Diodes are nonlinear resistors.

use super::devices::{shockley, BranchLaw, Linear};
use super::netlist::{ElementKind, ElementParams, Netlist};
use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};
use crate::lti::PortMap;
use crate::steppers::{Coupling, NonlinearSubsystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MnaOptions {
    /// Offset used by diodes that do not state one.
    pub diode_offset: f64,
}

impl Default for MnaOptions {
    fn default() -> Self {
        MnaOptions { diode_offset: 1.0 }
    }
}

/// Two-terminal branch between rows `a` and `b` of `u` (`None` is ground).
#[derive(Debug)]
pub struct Branch {
    pub name: String,
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub law: Box<dyn BranchLaw>,
}

impl Branch {
    fn voltage(&self, u: &[f64]) -> f64 {
        self.a.map_or(0.0, |i| u[i]) - self.b.map_or(0.0, |i| u[i])
    }

    fn stamp_vec(&self, val: f64, out: &mut [f64]) {
        if let Some(i) = self.a {
            out[i] += val;
        }
        if let Some(i) = self.b {
            out[i] -= val;
        }
    }

    /// `out += val · a aᵀ` with `a` the incidence column.
    fn stamp_outer(&self, val: f64, out: &mut RMat) {
        for (r, sr) in [(self.a, 1.0), (self.b, -1.0)] {
            for (c, sc) in [(self.a, 1.0), (self.b, -1.0)] {
                if let (Some(r), Some(c)) = (r, c) {
                    out[(r, c)] += sr * sc * val;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineSource {
    pub amp: f64,
    pub omega: f64,
}

impl SineSource {
    pub fn at(&self, t: f64) -> f64 {
        self.amp * (self.omega * t).sin()
    }
}

#[derive(Debug)]
pub struct MnaModel {
    n_nodes: usize,
    capacitors: Vec<Branch>,
    resistors: Vec<Branch>,
    inductors: Vec<Branch>,
    sources: Vec<(Option<usize>, Option<usize>, SineSource)>,
    ports: Option<PortMap>,
    coupling: Coupling,
}

fn row(node: usize) -> Option<usize> {
    node.checked_sub(1)
}

/// Builds the MNA model. `device_ports` is the port count of the attached
/// electromagnetic device (`None` if there is none).
pub fn build_mna(net: &Netlist, device_ports: Option<usize>, opts: &MnaOptions) -> Result<MnaModel> {
    let n_nodes = net.n_nodes();
    let dim = net.unknowns();
    let mut m = MnaModel {
        n_nodes,
        capacitors: Vec::new(),
        resistors: Vec::new(),
        inductors: Vec::new(),
        sources: Vec::new(),
        ports: None,
        coupling: Coupling::none(dim, 0, 0),
    };
    for e in &net.elements {
        let (a, b) = (row(e.terminals[0]), row(e.terminals[1]));
        let branch = |law: Box<dyn BranchLaw>| Branch { name: e.name.clone(), a, b, law };
        match (&e.kind, &e.params) {
            (ElementKind::Resistor, ElementParams::Value(r)) => m.resistors.push(branch(Box::new(Linear(1.0 / r)))),
            (ElementKind::Capacitor, ElementParams::Value(c)) => m.capacitors.push(branch(Box::new(Linear(*c)))),
            (ElementKind::Inductor, ElementParams::Value(l)) => m.inductors.push(branch(Box::new(Linear(*l)))),
            (ElementKind::Diode, ElementParams::Diode { is, k, offset }) => {
                let off = offset.unwrap_or(opts.diode_offset);
                m.resistors.push(branch(Box::new(shockley(*is, *k, off))));
            }
            (ElementKind::VoltageSource, ElementParams::Sine { amp, omega }) => {
                m.sources.push((a, b, SineSource { amp: *amp, omega: *omega }))
            }
            (ElementKind::Device, ElementParams::Device { .. }) => {
                let cols: Vec<Vec<(usize, f64)>> = e
                    .pairs()
                    .map(|(p, q)| {
                        let mut col = Vec::new();
                        if let Some(i) = row(p) {
                            col.push((i, 1.0));
                        }
                        if let Some(i) = row(q) {
                            col.push((i, -1.0));
                        }
                        col
                    })
                    .collect();
                let pm = PortMap::new(dim, cols)?;
                match device_ports {
                    Some(n) if n == pm.n_ports() => {}
                    Some(n) => {
                        return Err(Error::Dimension(format!(
                            "element {} has {} ports, device has {n}",
                            e.name,
                            pm.n_ports()
                        )))
                    }
                    None => return Err(Error::Config(format!("no device model supplied for element {}", e.name))),
                }
                m.coupling = Coupling::from_ports(&pm);
                m.ports = Some(pm);
            }
            _ => return Err(Error::Netlist(format!("element {} has inconsistent parameters", e.name))),
        }
    }
    if m.ports.is_none() {
        if let Some(n) = device_ports {
            return Err(Error::Dimension(format!("device with {n} ports supplied but netlist has no M element")));
        }
    }
    Ok(m)
}

impl MnaModel {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }
    pub fn n_inductors(&self) -> usize {
        self.inductors.len()
    }
    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }
    pub fn ports(&self) -> Option<&PortMap> {
        self.ports.as_ref()
    }
    pub fn capacitors(&self) -> &[Branch] {
        &self.capacitors
    }
    pub fn resistors(&self) -> &[Branch] {
        &self.resistors
    }
    pub fn inductors(&self) -> &[Branch] {
        &self.inductors
    }

    fn l_off(&self) -> usize {
        self.n_nodes
    }
    fn v_off(&self) -> usize {
        self.n_nodes + self.inductors.len()
    }

    /// Port voltages `v_M = A_Mᵀ u`.
    pub fn port_voltages(&self, y: &[f64]) -> Vec<f64> {
        self.ports.as_ref().map(|p| p.select(y)).unwrap_or_default()
    }

    /// Ground-reduced incidence matrix of a branch list.
    pub fn incidence(&self, kind: ElementKind) -> RMat {
        let (pairs, cols): (Vec<(Option<usize>, Option<usize>)>, usize) = match kind {
            ElementKind::Capacitor => (self.capacitors.iter().map(|b| (b.a, b.b)).collect(), self.capacitors.len()),
            ElementKind::Resistor | ElementKind::Diode => {
                (self.resistors.iter().map(|b| (b.a, b.b)).collect(), self.resistors.len())
            }
            ElementKind::Inductor => (self.inductors.iter().map(|b| (b.a, b.b)).collect(), self.inductors.len()),
            ElementKind::VoltageSource => (self.sources.iter().map(|s| (s.0, s.1)).collect(), self.sources.len()),
            ElementKind::Device => {
                return self.ports.as_ref().map(|p| p.to_dense().rows(0, self.n_nodes).into_owned()).unwrap_or_else(
                    || RMat::zeros(self.n_nodes, 0),
                )
            }
        };
        let mut a = RMat::zeros(self.n_nodes, cols);
        for (k, (p, q)) in pairs.into_iter().enumerate() {
            if let Some(i) = p {
                a[(i, k)] = 1.0;
            }
            if let Some(i) = q {
                a[(i, k)] = -1.0;
            }
        }
        a
    }
}

impl NonlinearSubsystem for MnaModel {
    fn dim(&self) -> usize {
        self.v_off() + self.sources.len()
    }

    fn mass(&self, y: &[f64]) -> RMat {
        let dim = self.dim();
        let mut m = RMat::zeros(dim, dim);
        for c in &self.capacitors {
            c.stamp_outer(c.law.slope(c.voltage(y)), &mut m);
        }
        let lo = self.l_off();
        for (k, l) in self.inductors.iter().enumerate() {
            m[(lo + k, lo + k)] = l.law.slope(y[lo + k]);
        }
        m
    }

    fn force(&self, y: &[f64], t: f64) -> RVec {
        let mut f = RVec::zeros(self.dim());
        let out = f.as_mut_slice();
        for r in &self.resistors {
            r.stamp_vec(r.law.value(r.voltage(y)), out);
        }
        let lo = self.l_off();
        for (k, l) in self.inductors.iter().enumerate() {
            l.stamp_vec(y[lo + k], out);
            out[lo + k] -= l.voltage(y);
        }
        let vo = self.v_off();
        for (k, &(a, b, src)) in self.sources.iter().enumerate() {
            if let Some(i) = a {
                out[i] += y[vo + k];
            }
            if let Some(i) = b {
                out[i] -= y[vo + k];
            }
            out[vo + k] = a.map_or(0.0, |i| y[i]) - b.map_or(0.0, |i| y[i]) - src.at(t);
        }
        f
    }

    fn jac_force(&self, y: &[f64], _t: f64) -> Option<RMat> {
        let dim = self.dim();
        let mut j = RMat::zeros(dim, dim);
        for r in &self.resistors {
            r.stamp_outer(r.law.slope(r.voltage(y)), &mut j);
        }
        let lo = self.l_off();
        for (k, l) in self.inductors.iter().enumerate() {
            for (node, s) in [(l.a, 1.0), (l.b, -1.0)] {
                if let Some(i) = node {
                    j[(i, lo + k)] += s;
                    j[(lo + k, i)] -= s;
                }
            }
        }
        let vo = self.v_off();
        for (k, &(a, b, _)) in self.sources.iter().enumerate() {
            for (node, s) in [(a, 1.0), (b, -1.0)] {
                if let Some(i) = node {
                    j[(i, vo + k)] += s;
                    j[(vo + k, i)] += s;
                }
            }
        }
        Some(j)
    }

    fn jac_mass_dir(&self, y: &[f64], w: &[f64]) -> Option<RMat> {
        let dim = self.dim();
        let mut j = RMat::zeros(dim, dim);
        for c in &self.capacitors {
            let curv = c.law.curvature(c.voltage(y));
            if curv != 0.0 {
                c.stamp_outer(curv * c.voltage(w), &mut j);
            }
        }
        let lo = self.l_off();
        for (k, l) in self.inductors.iter().enumerate() {
            j[(lo + k, lo + k)] += l.law.curvature(y[lo + k]) * w[lo + k];
        }
        Some(j)
    }

    fn mass_is_constant(&self) -> bool {
        self.capacitors.iter().chain(&self.inductors).all(|b| b.law.is_linear())
    }

    fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    fn check_state(&self, y: &[f64]) -> Result<()> {
        for r in &self.resistors {
            r.law.check(r.voltage(y))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::netlist::parse_netlist;
    use crate::steppers::fd_jacobian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MIXED: &str = "V1 1 0 sin 2 3\nR1 1 2 5\nC1 2 0 0.5\nL1 2 3 0.25\nD1 3 0 1e-3 2\nC2 3 4 2\nR2 4 0 1\n";

    #[test]
    fn model_problem_by_hand() {
        let net = parse_netlist("V1 1 0 sin 1 4.712388980384690\nM1 1 0 model=synthetic\n", "mp").unwrap();
        let m = build_mna(&net, Some(1), &MnaOptions::default()).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.mass(&[0.3, -0.7]), RMat::zeros(2, 2));
        let t = 0.2;
        let f = m.force(&[0.3, -0.7], t);
        assert_eq!(f[0], -0.7);
        assert_eq!(f[1], 0.3 - (4.712388980384690 * t).sin());
        assert_eq!(m.coupling().select(&[0.3, -0.7]), vec![0.3]);
        let mut inj = vec![0.0; 2];
        m.coupling().inject_add(&[1.5], &mut inj);
        assert_eq!(inj, vec![-1.5, 0.0]);
    }

    #[test]
    fn jacobians_match_differences() {
        let net = parse_netlist(MIXED, "mixed").unwrap();
        let m = build_mna(&net, None, &MnaOptions::default()).unwrap();
        let dim = m.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let y = RVec::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            let t = rng.gen_range(0.0..1.0);
            let f0 = m.force(y.as_slice(), t);
            let fd = fd_jacobian(&y, &f0, &mut |x: &RVec| Ok(m.force(x.as_slice(), t))).unwrap();
            let an = m.jac_force(y.as_slice(), t).unwrap();
            assert!((&fd - &an).amax() <= 1e-6 * (1.0 + an.amax()));
            let w = RVec::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            let mw0 = m.mass(y.as_slice()) * &w;
            let fdm = fd_jacobian(&y, &mw0, &mut |x: &RVec| Ok(m.mass(x.as_slice()) * &w)).unwrap();
            let anm = m.jac_mass_dir(y.as_slice(), w.as_slice()).unwrap();
            assert!((&fdm - &anm).amax() <= 1e-6 * (1.0 + anm.amax()));
        }
    }

    #[test]
    fn kcl_rows_match_per_element_stamping() {
        let net = parse_netlist(MIXED, "mixed").unwrap();
        let m = build_mna(&net, None, &MnaOptions { diode_offset: -1.0 }).unwrap();
        let y = [0.4, -0.2, 0.9, 0.1, 0.05, -0.3];
        let f = m.force(&y, 0.0);
        let u = &y[..4];
        let v = |a: usize, b: usize| (if a > 0 { u[a - 1] } else { 0.0 }) - (if b > 0 { u[b - 1] } else { 0.0 });
        let i_r1 = v(1, 2) / 5.0;
        let i_d = 1e-3 * ((2.0 * v(3, 0)).exp() - 1.0);
        let i_r2 = v(4, 0);
        let (j_l, j_v) = (y[4], y[5]);
        let kcl = [i_r1 + j_v, -i_r1 + j_l, -j_l + i_d, i_r2];
        for k in 0..4 {
            assert!((f[k] - kcl[k]).abs() < 1e-15, "row {k}");
        }
        assert!((f[4] + v(2, 3)).abs() < 1e-15);
        assert_eq!(f[5], v(1, 0));
    }

    #[test]
    fn mass_is_psd_and_structured() {
        let net = parse_netlist(MIXED, "mixed").unwrap();
        let m = build_mna(&net, None, &MnaOptions::default()).unwrap();
        let mm = m.mass(&[0.0; 6]);
        assert_eq!(mm, mm.transpose());
        assert!(mm.symmetric_eigenvalues().iter().all(|&l| l >= -1e-14));
        assert_eq!(mm[(4, 4)], 0.25);
        assert!(m.mass_is_constant());
    }

    #[test]
    fn incidence_columns() {
        let net = parse_netlist(MIXED, "mixed").unwrap();
        let m = build_mna(&net, None, &MnaOptions::default()).unwrap();
        for kind in [ElementKind::Capacitor, ElementKind::Resistor, ElementKind::Inductor, ElementKind::VoltageSource] {
            let a = m.incidence(kind);
            for col in a.column_iter() {
                assert!(col.iter().filter(|&&v| v == 1.0).count() <= 1);
                assert!(col.iter().filter(|&&v| v == -1.0).count() <= 1);
                assert!(col.iter().all(|&v| v == 0.0 || v == 1.0 || v == -1.0));
                assert!(col.iter().any(|&v| v != 0.0));
            }
        }
    }

    #[test]
    fn port_count_checked() {
        let net = parse_netlist("V1 1 0 sin 1 1\nM1 1 0 model=synthetic\n", "mp").unwrap();
        assert!(matches!(build_mna(&net, Some(2), &MnaOptions::default()), Err(Error::Dimension(_))));
        assert!(matches!(build_mna(&net, None, &MnaOptions::default()), Err(Error::Config(_))));
    }
}
