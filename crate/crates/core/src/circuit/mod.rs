//! Circuits coupled to an electromagnetic device.

mod devices;
mod mna;
mod netlist;

use std::path::Path;

pub use devices::{shockley, BranchLaw, Linear, Shockley, EXP_ARG_MAX};
pub use mna::{build_mna, Branch, MnaModel, MnaOptions, SineSource};
pub use netlist::{parse_netlist, Element, ElementKind, ElementParams, Netlist};

use crate::em_device::{build_synthetic_eddy, build_synthetic_transformer, SyntheticEddyParams};
use crate::error::{Error, Result};
use crate::lti::matio::{load_device, DeviceBundle};
use crate::lti::DescriptorSystem;

/// Default grid of the synthetic presets.
pub const DEFAULT_CELLS: usize = 200;

/// Voltage source `sin(3π/2 t)` driving the synthetic eddy-current device.
pub const MODEL_PROBLEM: &str = "V1 1 0 sin 1 4.712388980384690\nM1 1 0 model=synthetic\n";

/// Paper-style rectifier parameters.
pub const RECTIFIER_C: f64 = 1e-12;
pub const RECTIFIER_R: f64 = 10000.0;
pub const RECTIFIER_AMP: f64 = 250.0;
pub const RECTIFIER_OMEGA: f64 = 5.0 * std::f64::consts::PI;
pub const DIODE_IS: f64 = 2.5e-6;
pub const DIODE_K: f64 = 4.0;

/// Model problem with an eddy-current surrogate of `n_cells` cells.
pub fn model_problem_netlist(n_cells: usize) -> String {
    format!("V1 1 0 sin 1 4.712388980384690\nM1 1 0 model=synthetic:eddy:{n_cells}\n")
}

/// Half-wave rectifier: source on the primary, secondary reversed into a
/// smoothing capacitor, diode and load resistor.
pub fn rectifier_netlist(n_cells: usize) -> String {
    format!(
        "V1 1 0 sin {RECTIFIER_AMP} {RECTIFIER_OMEGA:.17}\n\
         MT 1 0 0 2 model=synthetic:transformer:{n_cells}\n\
         C1 2 0 {RECTIFIER_C:e}\n\
         D1 2 3 {DIODE_IS:e} {DIODE_K}\n\
         R1 3 0 {RECTIFIER_R}\n"
    )
}

/// Resolves a device model token: `synthetic`, `synthetic:eddy[:n]`,
/// `synthetic:transformer[:n]`, or a manifest path relative to `base`.
pub fn resolve_device(model: &str, base: &Path) -> Result<DeviceBundle> {
    if let Some(rest) = model.strip_prefix("synthetic") {
        let parts: Vec<&str> = rest.split(':').skip(1).collect();
        let cells = |tok: Option<&&str>| -> Result<usize> {
            match tok {
                None => Ok(DEFAULT_CELLS),
                Some(t) => t.parse().map_err(|_| Error::Config(format!("bad cell count '{t}' in model '{model}'"))),
            }
        };
        if !rest.is_empty() && !rest.starts_with(':') {
            return Err(Error::Config(format!("unknown model '{model}'")));
        }
        return match parts.first().copied() {
            None | Some("eddy") if parts.len() <= 2 => Ok(DeviceBundle::Solid(build_synthetic_eddy(
                &SyntheticEddyParams::with_cells(cells(parts.get(1))?),
            )?)),
            Some("transformer") if parts.len() <= 2 => {
                Ok(DeviceBundle::Stranded(build_synthetic_transformer(cells(parts.get(1))?)?))
            }
            _ => Err(Error::Config(format!("unknown synthetic preset '{model}'"))),
        };
    }
    load_device(base.join(model))
}

/// Parsed netlist, its MNA model and the attached device.
#[derive(Debug)]
pub struct Circuit {
    pub netlist: Netlist,
    pub model: MnaModel,
    pub device: Option<DeviceBundle>,
}

impl Circuit {
    pub fn from_text(text: &str, origin: &str, base: &Path, opts: &MnaOptions) -> Result<Self> {
        let netlist = parse_netlist(text, origin)?;
        let device = match netlist.device().map(|e| &e.params) {
            Some(ElementParams::Device { model }) => Some(resolve_device(model, base)?),
            _ => None,
        };
        let model = build_mna(&netlist, device.as_ref().map(|d| d.n_ports()), opts)?;
        Ok(Circuit { netlist, model, device })
    }

    pub fn load(path: impl AsRef<Path>, opts: &MnaOptions) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, &path.display().to_string(), base, opts)
    }

    /// Port-level descriptor of the device, for the coupled solvers.
    pub fn linear_block(&self) -> Result<DescriptorSystem> {
        self.device
            .as_ref()
            .ok_or_else(|| Error::Config("circuit has no electromagnetic device".into()))?
            .to_port_descriptor()
    }
}
