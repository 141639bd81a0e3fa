use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error};
use crate::signal::{delay_to_distance, doppler_to_velocity};

/// Estimator selection, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Periodogram,
    Lorentzian,
    Tsuchida,
    MatchedFilter,
    MatchedFilterJoint,
    Iff,
    IffJoint,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Periodogram,
        Method::Lorentzian,
        Method::Tsuchida,
        Method::MatchedFilter,
        Method::MatchedFilterJoint,
        Method::Iff,
        Method::IffJoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Periodogram => "periodogram",
            Method::Lorentzian => "lorentzian",
            Method::Tsuchida => "tsuchida",
            Method::MatchedFilter => "mf",
            Method::MatchedFilterJoint => "mf-joint",
            Method::Iff => "iff",
            Method::IffJoint => "iff-joint",
        }
    }

    /// Whether the method needs the ĥ calibration table.
    pub fn needs_calibration(self) -> bool {
        matches!(self, Method::Iff | Method::IffJoint)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub starts_tried: usize,
    /// Initial (τ, f) of the winning start.
    pub chosen_start: Option<(f64, f64)>,
    pub converged: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Delay τ̂, s.
    pub tau: f64,
    /// Doppler f̂, Hz.
    pub doppler: f64,
    /// d̂ = τ̂c/2, m.
    pub distance: f64,
    /// v̂ = f̂c/(2f_c), m/s.
    pub velocity: f64,
    pub objective: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl Estimate {
    pub fn new(tau: f64, doppler: f64, center_frequency: f64, objective: f64, method: Method, diagnostics: Diagnostics) -> Self {
        Self {
            tau,
            doppler,
            distance: delay_to_distance(tau),
            velocity: doppler_to_velocity(doppler, center_frequency),
            objective,
            method,
            diagnostics,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SPEED_OF_LIGHT;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn derived_fields() {
        let fc = 193e12;
        let e = Estimate::new(1e-6, 2e6, fc, 0.0, Method::Iff, Diagnostics::default());
        assert!((e.distance - SPEED_OF_LIGHT * 0.5e-6).abs() < 1e-9);
        assert!((e.velocity - 2e6 * SPEED_OF_LIGHT / (2.0 * fc)).abs() < 1e-12);
    }
}
