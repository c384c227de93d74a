//! Outcome of one verified inequality or identity.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

/// Anchor strings naming the inequality each check verifies.
pub mod anchors {
    pub const KATO_THRESHOLD: &str = "kato-threshold gamma_d";
    pub const KATO_NORM: &str = "kato-norm riesz-potential sup";
    pub const KATO_SMALLNESS: &str = "kato-smallness negative-part below gamma_d";
    pub const SELF_ADJOINT: &str = "self-adjointness nonnegativity of H_V";
    pub const FORM_IDENTITY: &str = "quadratic-form summation-by-parts";
    pub const FORM_BOUND: &str = "form-bound V+ eps-b and V- kato constant";
    pub const SEMIGROUP_LAW: &str = "heat-semigroup law";
    pub const POSITIVITY: &str = "heat-kernel positivity";
    pub const DOMINATION: &str = "heat-kernel domination by whole-space extension";
    pub const GAUSSIAN: &str = "heat-kernel gaussian pointwise bound";
    pub const SMOOTHING: &str = "heat-semigroup Lp-Lq smoothing";
    pub const EMBEDDING: &str = "amalgam embedding into Lp and Lq";
    pub const YOUNG: &str = "amalgam young inequality 3^d";
    pub const K0_AMALGAM: &str = "gaussian-profile amalgam estimate";
    pub const LAPLACE: &str = "resolvent-power laplace representation";
    pub const RESOLVENT_SCALING: &str = "resolvent-power Lp-Lq theta-scaling";
    pub const RESOLVENT_AMALGAM: &str = "resolvent-power Lp-amalgam theta-scaling";
    pub const RESOLVENT_IDENTITY: &str = "resolvent identity R(theta H + M) = I";
    pub const RESOLVENT_NORM: &str = "resolvent L2 bound 1/M";
    pub const GRADIENT_RESOLVENT: &str = "gradient-resolvent L2 bound";
    pub const BINOMIAL: &str = "commutator binomial expansion";
    pub const AD_RECURSION: &str = "commutator resolvent recursion";
    pub const DUHAMEL: &str = "commutator duhamel formula";
    pub const AD_UNITARY: &str = "commutator unitary-group polynomial growth";
    pub const FOURIER: &str = "multiplier fourier representation";
    pub const TRIPLE_NORM: &str = "triple-norm theta^(N/2) growth";
    pub const KEY_ESTIMATE: &str = "off-diagonal cube-sum estimate";
    pub const PSI_FACTOR: &str = "psi factorization phi = psi(R) R^beta";
    pub const UNIFORM_LP: &str = "multiplier uniform Lp bound";
    pub const LP_LQ_SCALING: &str = "multiplier Lp-Lq theta-scaling";
    pub const SCALE_IDENTITY: &str = "free-laplacian scaling identity";
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Computed but outside the resolved regime; not counted.
    Excluded,
    /// Hypothesis of the estimate fails for this input; computed but not counted.
    HypothesisUnmet,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Excluded => "excluded",
            Status::HypothesisUnmet => "hypothesis_unmet",
        };
        f.write_str(s)
    }
}

/// One verified inequality: measured left side against the bound.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub anchor: String,
    pub measured: f64,
    pub bound: f64,
    /// `measured / bound` for inequalities, the discrepancy for identities.
    pub ratio: f64,
    pub tolerance: f64,
    pub status: Status,
    pub notes: Vec<String>,
    pub parameters: BTreeMap<String, String>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, anchor: &str) -> Self {
        BoundReport {
            name: name.into(),
            anchor: anchor.to_string(),
            measured: f64::NAN,
            bound: f64::NAN,
            ratio: f64::NAN,
            tolerance: 0.0,
            status: Status::Fail,
            notes: Vec::new(),
            parameters: BTreeMap::new(),
        }
    }

    /// Inequality `measured ≤ bound·(1 + tol)`.
    pub fn inequality(mut self, measured: f64, bound: f64, tol: f64) -> Self {
        self.measured = measured;
        self.bound = bound;
        self.ratio = if bound != 0.0 {
            measured / bound
        } else if measured == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        self.tolerance = tol;
        self.status = if measured <= bound * (1.0 + tol) || measured <= bound + tol * bound.abs() {
            Status::Pass
        } else {
            Status::Fail
        };
        self
    }

    /// Identity with discrepancy `err` accepted up to `tol`.
    pub fn identity(mut self, err: f64, tol: f64) -> Self {
        self.measured = err;
        self.bound = tol;
        self.ratio = err;
        self.tolerance = tol;
        self.status = if err <= tol { Status::Pass } else { Status::Fail };
        self
    }

    /// Re-judges an identity report against another tolerance; other reports
    /// are returned unchanged.
    pub fn with_tol(self, tol: f64) -> Self {
        let is_identity = self.bound == self.tolerance && matches!(self.status, Status::Pass | Status::Fail);
        if is_identity {
            let err = self.measured;
            self.identity(err, tol)
        } else {
            self
        }
    }

    pub fn with_status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }

    pub fn param(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }

    /// Downgrades a computed status when a hypothesis is not met.
    pub fn unless_hypothesis(mut self, holds: bool, what: &str) -> Self {
        if !holds {
            self.notes.push(format!("hypothesis fails: {what}"));
            self.status = Status::HypothesisUnmet;
        }
        self
    }

    /// One-line summary.
    pub fn summary(&self) -> String {
        format!(
            "[{}] {} ({}): measured {:.6e} vs bound {:.6e} (ratio {:.4e}, tol {:.1e})",
            self.status, self.name, self.anchor, self.measured, self.bound, self.ratio, self.tolerance
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inequality_status() {
        assert!(BoundReport::new("a", anchors::GAUSSIAN).inequality(1.0, 1.0, 0.0).passed());
        assert!(BoundReport::new("a", anchors::GAUSSIAN).inequality(1.05, 1.0, 0.1).passed());
        assert!(BoundReport::new("a", anchors::GAUSSIAN).inequality(1.2, 1.0, 0.1).failed());
        let r = BoundReport::new("a", anchors::GAUSSIAN)
            .inequality(2.0, 1.0, 0.0)
            .unless_hypothesis(false, "x");
        assert_eq!(r.status, Status::HypothesisUnmet);
    }
}
