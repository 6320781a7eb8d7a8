//! Parameter-regime classification, blow-up certificates and small-data
//! reports.
//!
//! The qualitative behaviour of the model is organized by the boundary
//! power r against the interior power p:
//!
//! | regime                | condition            | blow-up      | global existence   | decay (a > 0)  |
//! |-----------------------|----------------------|--------------|--------------------|----------------|
//! | weak boundary         | r < 2                | no           | yes                | 2a − ε         |
//! | interior dominated    | 2 ≤ r < p/2          | no           | yes                | aμ − ε         |
//! | critical boundary     | r = 2, p ≤ 4         | open         | small data only    | 2a             |
//! | balanced (open)       | r > 2, p/2 ≤ r ≤ p−2 | open         | small data only    | 2a             |
//! | boundary dominated    | r > 2, r > p−2       | conditional  | small data only    | 2a             |
//!
//! Blow-up in the boundary-dominated regime is *certified* by the triple of
//! hypotheses checked in [`check_blowup_hypotheses`]: negative energy,
//! the momentum/variance inequality, and r above the critical curve
//! r* = max{2, p − 2}.

use crate::diagnostics;
use crate::error::{ParamError, TheoryError};
use crate::grid::{DerivMode, Field};
use crate::params::ModelParams;
use serde::{Deserialize, Serialize};

/// Which row of the behaviour table the parameters fall into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// r < 2: boundary injection too weak to beat dispersion.
    WeakBoundary,
    /// 2 ≤ r < p/2: defocusing interior dominates; decay exponent aμ.
    InteriorDominated,
    /// r = 2, p ≤ 4: critical boundary power, only small data controlled.
    CriticalBoundary,
    /// r > 2 with p/2 ≤ r ≤ p − 2: powers balanced, behaviour open.
    BalancedOpen,
    /// r > 2 and r > p − 2: boundary dominates; blow-up under the
    /// certificate hypotheses.
    BoundaryDominated,
}

impl Regime {
    /// Stable short label used in CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            Regime::WeakBoundary => "weak-boundary",
            Regime::InteriorDominated => "interior-dominated",
            Regime::CriticalBoundary => "critical-boundary",
            Regime::BalancedOpen => "balanced-open",
            Regime::BoundaryDominated => "boundary-dominated",
        }
    }
}

/// Finite-time blow-up prediction for the regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlowupStatus {
    /// Solutions never blow up.
    No,
    /// Unknown either way.
    Open,
    /// Blow-up occurs for data satisfying the certificate hypotheses.
    ConditionalYes,
}

impl BlowupStatus {
    pub fn label(&self) -> &'static str {
        match self {
            BlowupStatus::No => "no",
            BlowupStatus::Open => "open",
            BlowupStatus::ConditionalYes => "conditional-yes",
        }
    }
}

/// Global-existence prediction for the regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GlobalStatus {
    /// All data lead to global solutions.
    Yes,
    /// Global existence is known for small data only.
    SmallDataOnly,
    /// Unknown.
    Open,
}

impl GlobalStatus {
    pub fn label(&self) -> &'static str {
        match self {
            GlobalStatus::Yes => "yes",
            GlobalStatus::SmallDataOnly => "small-data-only",
            GlobalStatus::Open => "open",
        }
    }
}

/// Predicted exponential decay of the H¹ norm (squared quantities decay
/// with this exponent: mass + ‖u_x‖² ≲ e^{−exponent·t}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPrediction {
    /// Nominal exponent (2a or aμ).
    pub exponent: f64,
    /// True when the guarantee is only "exponent − ε for every ε > 0":
    /// numerical fits should target the exponent minus a margin.
    pub epsilon_discounted: bool,
}

/// Full classification of one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeClass {
    pub regime: Regime,
    pub blowup: BlowupStatus,
    pub global: GlobalStatus,
    /// Present only when a > 0; decay statements are empty without damping.
    pub decay: Option<DecayPrediction>,
}

/// Classify valid physical-mode parameters into exactly one regime row.
pub fn classify_regime(params: &ModelParams) -> Result<RegimeClass, ParamError> {
    params.require_physical()?;
    let (r, p, a) = (params.r, params.p, params.a);
    let regime = if r < 2.0 {
        Regime::WeakBoundary
    } else if r < p / 2.0 {
        Regime::InteriorDominated
    } else if r == 2.0 {
        // Here r ≥ p/2, so p ≤ 4 automatically.
        Regime::CriticalBoundary
    } else if r <= p - 2.0 {
        Regime::BalancedOpen
    } else {
        Regime::BoundaryDominated
    };
    let (blowup, global) = match regime {
        Regime::WeakBoundary | Regime::InteriorDominated => (BlowupStatus::No, GlobalStatus::Yes),
        Regime::CriticalBoundary | Regime::BalancedOpen => {
            (BlowupStatus::Open, GlobalStatus::SmallDataOnly)
        }
        Regime::BoundaryDominated => (BlowupStatus::ConditionalYes, GlobalStatus::SmallDataOnly),
    };
    let decay = if a > 0.0 {
        Some(match regime {
            Regime::WeakBoundary => DecayPrediction {
                exponent: 2.0 * a,
                epsilon_discounted: true,
            },
            Regime::InteriorDominated => DecayPrediction {
                exponent: a * mu_exponent(params)?,
                epsilon_discounted: true,
            },
            _ => DecayPrediction {
                exponent: 2.0 * a,
                epsilon_discounted: false,
            },
        })
    } else {
        None
    };
    Ok(RegimeClass {
        regime,
        blowup,
        global,
        decay,
    })
}

/// The critical boundary power r*(p) = max{2, p − 2}. Blow-up is proven
/// above this curve and ruled out well below it; the curve itself is the
/// conjectured sharp threshold.
pub fn critical_boundary_power(p: f64) -> f64 {
    2.0f64.max(p - 2.0)
}

/// Constants of the blow-up machinery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupCoefficients {
    /// M = max(8, 2p), the constant in the θ₁ ≤ M·θ bound.
    pub m: f64,
    /// Exponent shift b = a(r+2)(4−M) / (4(r+2) − 2M); zero when a = 0 and
    /// strictly negative for a > 0 in the boundary-dominated regime.
    pub b: f64,
    /// κ = (r − 2)/2, the undamped blow-up rate constant.
    pub kappa: f64,
}

/// Compute (M, b, κ). Errors when the denominator 4(r+2) − 2M vanishes:
/// at those powers no finite exponent shift balances the boundary term.
pub fn blowup_coefficients(params: &ModelParams) -> Result<BlowupCoefficients, ParamError> {
    let (r, p, a) = (params.r, params.p, params.a);
    let m = diagnostics::m_constant(p);
    let den = 4.0 * (r + 2.0) - 2.0 * m;
    if den.abs() < 1e-12 * (4.0 * (r + 2.0) + 2.0 * m) {
        return Err(ParamError::DegenerateCoefficient { r, p });
    }
    let b = a * (r + 2.0) * (4.0 - m) / den;
    Ok(BlowupCoefficients {
        m,
        b,
        kappa: 0.5 * (r - 2.0),
    })
}

/// Decay interpolation exponent for the interior-dominated regime,
///
/// ```text
///     μ = (p+2)(p−2r) / (p(p+2) − 2r)  ∈ (0, 2)   for 2 ≤ r < p/2.
/// ```
pub fn mu_exponent(params: &ModelParams) -> Result<f64, ParamError> {
    let (r, p) = (params.r, params.p);
    if !(2.0 <= r && r < p / 2.0) {
        return Err(ParamError::OutOfDecayRegime { r, p });
    }
    Ok((p + 2.0) * (p - 2.0 * r) / (p * (p + 2.0) - 2.0 * r))
}

/// Everything the blow-up theorems need to know about one initial datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupCertificate {
    pub params: ModelParams,
    pub coefficients: BlowupCoefficients,
    /// Energy of the initial data.
    pub e0: f64,
    /// Second moment I(0) = ∫x²|u₀|².
    pub i0: f64,
    /// y(0) = Im ∫x ū₀ u₀′; positive means net momentum toward x = 0.
    pub y0: f64,
    /// V(0) = −4y(0).
    pub v0: f64,
    /// Left side of the momentum condition: (a − b)/2 · I(0).
    pub cond3_lhs: f64,
    /// Right side: y(0). The condition is lhs < rhs strictly. When a = 0
    /// (so b = 0) it reduces to y(0) > 0.
    pub cond3_rhs: f64,
    /// r > max{2, p−2} ∧ E(0) ≤ 0 ∧ momentum condition.
    pub hypotheses_met: bool,
    /// Upper bound for the blow-up time; present iff hypotheses_met.
    pub t_predicted: Option<f64>,
}

/// Evaluate the blow-up hypotheses on initial data.
///
/// Requires physical-mode parameters, a well-resolved truncation (tail
/// watchdog) and non-degenerate coefficients. `hypotheses_met` does not
/// error when the hypotheses fail — that is a legitimate outcome — but the
/// structural prerequisites do.
pub fn check_blowup_hypotheses(
    params: &ModelParams,
    u0: &Field,
) -> Result<BlowupCertificate, TheoryError> {
    params.require_physical().map_err(TheoryError::Param)?;
    u0.check_tail().map_err(TheoryError::Grid)?;
    let coefficients = blowup_coefficients(params).map_err(TheoryError::Param)?;
    let e0 = diagnostics::energy(params, u0);
    let (i0, v0, y0) = diagnostics::virial(u0);
    let cond3_lhs = 0.5 * (params.a - coefficients.b) * i0;
    let cond3_rhs = y0;
    let supercritical = params.r > critical_boundary_power(params.p);
    let hypotheses_met = supercritical && e0 <= 0.0 && cond3_lhs < cond3_rhs;
    let mut cert = BlowupCertificate {
        params: *params,
        coefficients,
        e0,
        i0,
        y0,
        v0,
        cond3_lhs,
        cond3_rhs,
        hypotheses_met,
        t_predicted: None,
    };
    if hypotheses_met {
        cert.t_predicted = Some(predicted_blowup_time(&cert)?);
    }
    Ok(cert)
}

/// Upper bound for the blow-up time of a certified datum:
///
/// - a = 0:  T = I(0) / (κ y(0))           (κ = (r−2)/2 > 0 here),
/// - a > 0:  T = −ln(A) / (2a − 2b) with A = ((2a−2b) I(0) + V(0)) / V(0).
///
/// The momentum condition guarantees A ∈ (0, 1); leaving that interval
/// despite a passing certificate is an internal-consistency error.
pub fn predicted_blowup_time(cert: &BlowupCertificate) -> Result<f64, TheoryError> {
    if !cert.hypotheses_met {
        return Err(TheoryError::NotCertified);
    }
    let a = cert.params.a;
    let b = cert.coefficients.b;
    if a == 0.0 {
        let t = cert.i0 / (cert.coefficients.kappa * cert.y0);
        if !(t.is_finite() && t > 0.0) {
            return Err(TheoryError::InconsistentCertificate { log_arg: t });
        }
        return Ok(t);
    }
    let rate = 2.0 * a - 2.0 * b;
    let log_arg = (rate * cert.i0 + cert.v0) / cert.v0;
    if !(log_arg > 0.0 && log_arg < 1.0) {
        return Err(TheoryError::InconsistentCertificate { log_arg });
    }
    Ok(-log_arg.ln() / rate)
}

/// Gradient-norm lower envelope for an undamped certified datum:
///
/// ```text
///     ‖u_x(t)‖ ≥ y(0) √I(0) / (I(0) − κ y(0) t),
/// ```
///
/// valid while the denominator stays positive (it hits zero at the
/// predicted blow-up time).
pub fn gradient_envelope(cert: &BlowupCertificate, t: f64) -> Option<f64> {
    let den = cert.i0 - cert.coefficients.kappa * cert.y0 * t;
    if den > 0.0 {
        Some(cert.y0 * cert.i0.sqrt() / den)
    } else {
        None
    }
}

/// Small-data stabilization report for one initial datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    /// σ = (r + 2)/4; the contraction branch needs σ > 1 (r > 2).
    pub sigma: f64,
    /// γ = 1/(σ − 1); only meaningful when σ > 1.
    pub gamma: f64,
    /// C₁ = ‖u₀′‖² + (2k/(p+2))‖u₀‖^{p+2}_{p+2}.
    pub c1: f64,
    /// C₂ = (2^{(r+4)/2} λ/(r+2)) ‖u₀‖^{(r+2)/2}.
    pub c2: f64,
    /// ‖u₀‖².
    pub mass: f64,
    /// The contraction branch applies only for r > 2 (σ > 1).
    pub contraction_applicable: bool,
    /// Φ(0) ≤ C₁ and C₁C₂^γ ≤ (σ−1)σ^{−γ−1}: the operational smallness
    /// test; guarantees Φ(t) = ‖u_x(t)‖²e^{2at} ≤ σ/(σ−1)·C₁.
    pub contraction_ok: bool,
    /// Critical-power branch: ‖u₀‖² < 1/(4λ).
    pub mass_gap_ok: bool,
    /// Decay interpolation exponent, present in the interior-dominated
    /// window 2 ≤ r < p/2.
    pub mu: Option<f64>,
    /// δ = 2 − 4r/p; positive exactly when p > 2r.
    pub delta: Option<f64>,
    /// σ/(σ−1)·C₁, the guaranteed ceiling for Φ(t); present iff the
    /// contraction test passes.
    pub phi_bound: Option<f64>,
}

/// Evaluate the small-data stabilization tests on initial data.
pub fn smallness_report(params: &ModelParams, u0: &Field) -> Result<SmallnessReport, TheoryError> {
    params.require_physical().map_err(TheoryError::Param)?;
    let (r, p) = (params.r, params.p);
    let norms = u0.norms(p, DerivMode::OneSided);
    let sigma = (r + 2.0) / 4.0;
    let gamma = 1.0 / (sigma - 1.0);
    let c1 = norms.ux_sq + 2.0 * params.k / (p + 2.0) * norms.lp_pp;
    let c2 = 2.0f64.powf(0.5 * (r + 4.0)) * params.lambda / (r + 2.0)
        * norms.mass.powf(0.25 * (r + 2.0));
    let contraction_applicable = sigma > 1.0;
    let contraction_ok = contraction_applicable && {
        let phi0 = norms.ux_sq;
        let threshold = (sigma - 1.0) * sigma.powf(-gamma - 1.0);
        phi0 <= c1 && c1 * c2.powf(gamma) <= threshold
    };
    let mass_gap_ok = norms.mass < 1.0 / (4.0 * params.lambda);
    let mu = mu_exponent(params).ok();
    let delta = Some(2.0 - 4.0 * r / p);
    let phi_bound = contraction_ok.then(|| sigma / (sigma - 1.0) * c1);
    Ok(SmallnessReport {
        sigma,
        gamma,
        c1,
        c2,
        mass: norms.mass,
        contraction_applicable,
        contraction_ok,
        mass_gap_ok,
        mu,
        delta,
        phi_bound,
    })
}
