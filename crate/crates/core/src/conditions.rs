//! Finite-n audit of the sieve conditions, the constraints on the free
//! constants, the lemma-level thresholds and the generic contraction bound.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use libm::{exp, log, pow, sqrt};

use crate::contraction::{rate_sequences, rho, RateSequences};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::special::compensated_sum;

/// Relative tolerance under which two sides count as equal.
pub const BOUNDARY_RTOL: f64 = 1e-9;

/// `c = 2^{-5/2}` of the SGCP sieve.
pub const SGCP_C: f64 = 0.176_776_695_296_636_9;

/// Default `L1 = 1/(36√2)`.
pub const DEFAULT_L1: f64 = 0.019_641_855_032_959_652;

/// `K` of the third threshold of the generic theorem.
pub const THEOREM3_K: f64 = 0.5;

/// Every named constant the conditions reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constant {
    Alpha,
    D,
    L1,
    L2,
    L3,
    L4,
    L5,
    L6,
    L7,
    L8,
    L9,
    L10,
    SmallC0,
    SmallC1,
    SmallC2,
    SmallC3,
    SmallC4,
    SmallC5,
    BigC0,
    BigC1,
    BigC2,
    D1,
    D2,
    Q1,
    Q2,
    K2,
    K3,
    K4,
    K5,
    MVdv,
    A,
    H,
    Tau,
    MuNorm,
    KappaTail,
    SupLambda0,
    SupG0,
    Lambda0Min,
    BigC,
    J,
    M,
}

impl Constant {
    pub const ALL: [Constant; 41] = [
        Constant::Alpha,
        Constant::D,
        Constant::L1,
        Constant::L2,
        Constant::L3,
        Constant::L4,
        Constant::L5,
        Constant::L6,
        Constant::L7,
        Constant::L8,
        Constant::L9,
        Constant::L10,
        Constant::SmallC0,
        Constant::SmallC1,
        Constant::SmallC2,
        Constant::SmallC3,
        Constant::SmallC4,
        Constant::SmallC5,
        Constant::BigC0,
        Constant::BigC1,
        Constant::BigC2,
        Constant::D1,
        Constant::D2,
        Constant::Q1,
        Constant::Q2,
        Constant::K2,
        Constant::K3,
        Constant::K4,
        Constant::K5,
        Constant::MVdv,
        Constant::A,
        Constant::H,
        Constant::Tau,
        Constant::MuNorm,
        Constant::KappaTail,
        Constant::SupLambda0,
        Constant::SupG0,
        Constant::Lambda0Min,
        Constant::BigC,
        Constant::J,
        Constant::M,
    ];

    /// Key used in ledger files.
    pub fn key(self) -> &'static str {
        match self {
            Constant::Alpha => "alpha",
            Constant::D => "d",
            Constant::L1 => "L1",
            Constant::L2 => "L2",
            Constant::L3 => "L3",
            Constant::L4 => "L4",
            Constant::L5 => "L5",
            Constant::L6 => "L6",
            Constant::L7 => "L7",
            Constant::L8 => "L8",
            Constant::L9 => "L9",
            Constant::L10 => "L10",
            Constant::SmallC0 => "c0",
            Constant::SmallC1 => "c1",
            Constant::SmallC2 => "c2",
            Constant::SmallC3 => "c3",
            Constant::SmallC4 => "c4",
            Constant::SmallC5 => "c5",
            Constant::BigC0 => "C0",
            Constant::BigC1 => "C1",
            Constant::BigC2 => "C2",
            Constant::D1 => "D1",
            Constant::D2 => "D2",
            Constant::Q1 => "q1",
            Constant::Q2 => "q2",
            Constant::K2 => "K2",
            Constant::K3 => "K3",
            Constant::K4 => "K4",
            Constant::K5 => "K5",
            Constant::MVdv => "m",
            Constant::A => "A",
            Constant::H => "H",
            Constant::Tau => "tau",
            Constant::MuNorm => "mu_norm",
            Constant::KappaTail => "kappa_tail",
            Constant::SupLambda0 => "sup_lambda0",
            Constant::SupG0 => "sup_g0",
            Constant::Lambda0Min => "lambda0_min",
            Constant::BigC => "C",
            Constant::J => "J",
            Constant::M => "M",
        }
    }

    pub fn from_key(key: &str) -> Option<Constant> {
        Constant::ALL.iter().copied().find(|c| c.key() == key)
    }

    fn may_be_non_positive(self) -> bool {
        matches!(self, Constant::Q1 | Constant::Q2)
    }
}

/// Which form of the QGCP sequences to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// `‖g0‖∞` inside `δ_n` and the appendix `ζ_n` exponents.
    #[default]
    Appendix,
    /// `√‖λ0‖∞` inside `δ_n` and the main-text `ζ_n` exponents.
    MainText,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Appendix => "appendix",
            Variant::MainText => "main",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "appendix" => Some(Variant::Appendix),
            "main" | "main_text" | "maintext" => Some(Variant::MainText),
            _ => None,
        }
    }
}

/// Exponent on `λ_n` in the SGCP tail condition `c0 λ_n^e > c5 n δ_n²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailExponent {
    /// The contraction-rate `ρ`.
    #[default]
    RhoRate,
    /// The tail exponent `κ` of the `λ*` prior.
    KappaTail,
}

impl TailExponent {
    pub fn name(self) -> &'static str {
        match self {
            TailExponent::RhoRate => "rho_rate",
            TailExponent::KappaTail => "kappa_tail",
        }
    }

    pub fn parse(s: &str) -> Option<TailExponent> {
        match s {
            "rho_rate" | "rho" => Some(TailExponent::RhoRate),
            "kappa_tail" | "kappa" => Some(TailExponent::KappaTail),
            _ => None,
        }
    }
}

/// Named constants plus the switches that select formula variants.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstantLedger {
    values: BTreeMap<Constant, f64>,
    pub variant: Variant,
    pub tail_exponent: TailExponent,
}

impl ConstantLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets a constant after checking it is finite, and positive where the
    /// paper requires it.
    pub fn set(&mut self, c: Constant, value: f64) -> Result<&mut Self> {
        if !value.is_finite() {
            return Err(Error::Precondition(format!("{} must be finite, got {value}", c.key())));
        }
        if !c.may_be_non_positive() && value <= 0.0 {
            return Err(Error::Precondition(format!("{} must be positive, got {value}", c.key())));
        }
        if c == Constant::D && (libm::trunc(value) != value || value < 1.0) {
            return Err(Error::Precondition(format!("d must be a positive integer, got {value}")));
        }
        self.values.insert(c, value);
        Ok(self)
    }

    pub fn with(mut self, c: Constant, value: f64) -> Result<Self> {
        self.set(c, value)?;
        Ok(self)
    }

    pub fn remove(&mut self, c: Constant) -> Option<f64> {
        self.values.remove(&c)
    }

    pub fn contains(&self, c: Constant) -> bool {
        self.values.contains_key(&c)
    }

    /// Value of `c`; `L1` falls back to `1/(36√2)`.
    pub fn get(&self, c: Constant) -> Result<f64> {
        match self.values.get(&c) {
            Some(v) => Ok(*v),
            None if c == Constant::L1 => Ok(DEFAULT_L1),
            None => Err(Error::MissingConstant(c.key())),
        }
    }

    pub fn dimension(&self) -> Result<usize> {
        Ok(self.get(Constant::D)? as usize)
    }

    /// The quantity playing the role of `‖g0‖∞` in the QGCP sequences.
    pub fn qgcp_g0(&self) -> Result<f64> {
        match self.variant {
            Variant::Appendix => self.get(Constant::SupG0),
            Variant::MainText => Ok(sqrt(self.get(Constant::SupLambda0)?)),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Constant, f64)> + '_ {
        self.values.iter().map(|(c, v)| (*c, *v))
    }

    /// Constants the condition checks for `kind` need but the ledger lacks.
    pub fn missing(&self, kind: ModelKind) -> Vec<Constant> {
        let common = [
            Constant::Alpha,
            Constant::D,
            Constant::Tau,
            Constant::A,
            Constant::MVdv,
            Constant::MuNorm,
            Constant::K5,
            Constant::D1,
            Constant::Q1,
            Constant::SmallC2,
            Constant::SmallC5,
        ];
        let specific: &[Constant] = match kind {
            ModelKind::Qgcp => &[
                Constant::L2,
                Constant::L3,
                Constant::L4,
                Constant::L5,
                Constant::L6,
                Constant::L7,
                Constant::Q2,
            ],
            ModelKind::Sgcp => &[
                Constant::L8,
                Constant::L9,
                Constant::L10,
                Constant::KappaTail,
                Constant::K3,
                Constant::K4,
                Constant::SmallC0,
            ],
        };
        let mut out: Vec<Constant> = common.iter().chain(specific).copied().filter(|c| !self.contains(*c)).collect();
        if kind == ModelKind::Qgcp && self.qgcp_g0().is_err() {
            out.push(match self.variant {
                Variant::Appendix => Constant::SupG0,
                Variant::MainText => Constant::SupLambda0,
            });
        }
        out
    }

    /// A complete ledger with the documented example defaults: theory
    /// constants 1, `L2..L10 = 10`, `c5 = c2 + 2.5`, `q1 = d − 1` (the
    /// Gamma(1, 1) prior), `q2 = 0`, `C = 1`, `J = 2`, `M = 4`.
    pub fn example(alpha: f64, d: usize, g0: f64) -> ConstantLedger {
        let mut l = ConstantLedger::new();
        let df = d as f64;
        let entries = [
            (Constant::Alpha, alpha),
            (Constant::D, df),
            (Constant::L2, 10.0),
            (Constant::L3, 10.0),
            (Constant::L4, 10.0),
            (Constant::L5, 10.0),
            (Constant::L6, 10.0),
            (Constant::L7, 10.0),
            (Constant::L8, 10.0),
            (Constant::L9, 10.0),
            (Constant::L10, 10.0),
            (Constant::SmallC0, 1.0),
            (Constant::SmallC1, 1.0),
            (Constant::SmallC2, 1.0),
            (Constant::SmallC3, 1.0),
            (Constant::SmallC4, 1.0),
            (Constant::SmallC5, 3.5),
            (Constant::BigC0, 1.0),
            (Constant::BigC1, 1.0),
            (Constant::BigC2, 1.0),
            (Constant::D1, 1.0),
            (Constant::D2, 1.0),
            (Constant::Q1, df - 1.0),
            (Constant::Q2, 0.0),
            (Constant::K2, 1.0),
            (Constant::K3, 1.0),
            (Constant::K4, 1.0),
            (Constant::K5, 1.0),
            (Constant::MVdv, 1.0),
            (Constant::A, 1.0),
            (Constant::H, 1.0),
            (Constant::Tau, 1.0),
            (Constant::MuNorm, 1.0),
            (Constant::KappaTail, 1.0),
            (Constant::SupLambda0, g0 * g0),
            (Constant::SupG0, g0),
            (Constant::Lambda0Min, 0.1),
            (Constant::BigC, 1.0),
            (Constant::J, 2.0),
            (Constant::M, 4.0),
        ];
        for (c, v) in entries {
            l.values.insert(c, v);
        }
        l
    }
}

/// Direction of an inequality `lhs ∘ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Gt,
    Ge,
    Lt,
    Le,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Gt => ">",
            Relation::Ge => ">=",
            Relation::Lt => "<",
            Relation::Le => "<=",
        }
    }
}

fn near(lhs: f64, rhs: f64) -> bool {
    if lhs == rhs {
        return true;
    }
    let scale = lhs.abs().max(rhs.abs());
    scale.is_finite() && (lhs - rhs).abs() <= BOUNDARY_RTOL * scale
}

/// Evaluates `lhs ∘ rhs`. Non-strict relations accept values within the
/// boundary tolerance; strict ones reject them.
pub fn compare(lhs: f64, rhs: f64, rel: Relation) -> (bool, bool) {
    if lhs.is_nan() || rhs.is_nan() {
        return (false, false);
    }
    let b = near(lhs, rhs);
    let holds = match rel {
        Relation::Gt => lhs > rhs && !b,
        Relation::Lt => lhs < rhs && !b,
        Relation::Ge => lhs >= rhs || b,
        Relation::Le => lhs <= rhs || b,
    };
    (holds, b)
}

/// One evaluated inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRecord {
    pub name: &'static str,
    pub n: Option<u64>,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub holds: bool,
    pub at_boundary: bool,
    /// Both sides are logarithms of the displayed inequality.
    pub log_scale: bool,
    pub minimal_n: Option<u64>,
    pub note: Option<&'static str>,
}

impl ConditionRecord {
    fn new(name: &'static str, n: Option<u64>, lhs: f64, rel: Relation, rhs: f64) -> Self {
        let (holds, at_boundary) = compare(lhs, rhs, rel);
        ConditionRecord {
            name,
            n,
            lhs,
            rhs,
            relation: rel,
            holds,
            at_boundary,
            log_scale: false,
            minimal_n: None,
            note: None,
        }
    }

    fn logged(mut self) -> Self {
        self.log_scale = true;
        self
    }

    fn noted(mut self, note: &'static str) -> Self {
        self.note = Some(note);
        self
    }
}

/// A batch of evaluated inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub model: ModelKind,
    pub records: Vec<ConditionRecord>,
    /// Upper end of the `minimal_n` scans, once attached.
    pub n_max: Option<u64>,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.records.iter().all(|r| r.holds)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn failing(&self) -> impl Iterator<Item = &ConditionRecord> {
        self.records.iter().filter(|r| !r.holds)
    }

    /// Fills `minimal_n` for every record that names an n-dependent condition.
    pub fn attach_minimal_n(&mut self, ledger: &ConstantLedger, n_max: u64) -> Result<()> {
        for r in self.records.iter_mut() {
            if r.n.is_some() {
                r.minimal_n = minimal_n(r.name, ledger, n_max)?;
            }
        }
        self.n_max = Some(n_max);
        Ok(())
    }
}

fn powi_signed(x: f64, k: usize) -> f64 {
    pow(x, k as f64)
}

fn qgcp_k1(ledger: &ConstantLedger) -> Result<f64> {
    let alpha = ledger.get(Constant::Alpha)?;
    let d = ledger.dimension()?;
    let df = d as f64;
    let r = rho(ModelKind::Qgcp, alpha, d);
    let g0 = ledger.qgcp_g0()?;
    let s = ledger.get(Constant::L2)? + ledger.get(Constant::L3)? + ledger.get(Constant::L4)?;
    Ok(compensated_sum([
        log(3.0 * s / f64::min(1.0, 2.0 * g0)),
        (2.0 * alpha * df + 2.0 * alpha + df) / (4.0 * alpha * df + df * df),
        4.0 * r - r / df - df - 1.0,
    ]))
}

fn sgcp_tail_exponent(ledger: &ConstantLedger) -> Result<f64> {
    let alpha = ledger.get(Constant::Alpha)?;
    let d = ledger.dimension()?;
    Ok(match ledger.tail_exponent {
        TailExponent::RhoRate => rho(ModelKind::Sgcp, alpha, d),
        TailExponent::KappaTail => ledger.get(Constant::KappaTail)?,
    })
}

/// Evaluates every constraint the paper places on the free constants of
/// `kind`'s sieve, plus `c5 > c2 + 2`.
pub fn check_constant_constraints(ledger: &ConstantLedger, kind: ModelKind) -> Result<ConditionReport> {
    use Relation::*;
    let d = ledger.dimension()?;
    let df = d as f64;
    let alpha = ledger.get(Constant::Alpha)?;
    let l1 = ledger.get(Constant::L1)?;
    let tau = ledger.get(Constant::Tau)?;
    let mu = ledger.get(Constant::MuNorm)?;
    let a = ledger.get(Constant::A)?;
    let c2 = ledger.get(Constant::SmallC2)?;
    let c5 = ledger.get(Constant::SmallC5)?;
    let d1 = ledger.get(Constant::D1)?;
    let mut recs = Vec::new();
    match kind {
        ModelKind::Qgcp => {
            let g0 = ledger.qgcp_g0()?;
            let k5 = ledger.get(Constant::K5)?;
            let r = rho(ModelKind::Qgcp, alpha, d);
            let [l2, l3, l4, l5, l6, l7] =
                [Constant::L2, Constant::L3, Constant::L4, Constant::L5, Constant::L6, Constant::L7].map(|c| ledger.get(c));
            let (l2, l3, l4, l5, l6, l7) = (l2?, l3?, l4?, l5?, l6?, l7?);
            let k1 = qgcp_k1(ledger)?;
            let g1 = g0.max(1.0);
            let ln3 = log(3.0);
            recs.push(ConditionRecord::new("L2+L3+L4 > max(A,e)", None, l2 + l3 + l4, Gt, a.max(core::f64::consts::E)));
            let base = 8.0 * g1 / (pow(3.0 / l1, 1.5) * pow(df, 0.25) * sqrt(2.0 * tau));
            recs.push(ConditionRecord::new("L2*L5^3 > bound", None, l2 * l5 * l5 * l5, Gt, base * base));
            recs.push(ConditionRecord::new("L5+L6+L7 > 4*L1*max(1,g0)/(3*sqrt(mu))", None, l5 + l6 + l7, Gt, 4.0 * l1 * g1 / (3.0 * sqrt(mu))));
            recs.push(ConditionRecord::new("L2 >= 8*c5*g0^2/D1", None, l2, Ge, 8.0 * c5 * g0 * g0 / d1));
            recs.push(ConditionRecord::new("L3 >= 8*c5*g0/D1", None, l3, Ge, 8.0 * c5 * g0 / d1));
            recs.push(ConditionRecord::new("L4 >= 2*c5/D1", None, l4, Ge, 2.0 * c5 / d1));
            let k1p = powi_signed(k1, d + 1);
            let lb = |l: f64, logp: f64, other: f64| f64::max(sqrt(16.0 * k5 * powi_signed(l, d) * k1p / pow(ln3, logp)), other);
            recs.push(ConditionRecord::new("L5 >= max(entropy bound, sqrt(32*g0^2*c5))", None, l5, Ge, lb(l2, 2.0 * r, sqrt(32.0 * g0 * g0 * c5))).noted("uses K1"));
            recs.push(ConditionRecord::new("L6 >= max(entropy bound, sqrt(32*g0*c5))", None, l6, Ge, lb(l3, 3.0 * r, sqrt(32.0 * g0 * c5))).noted("uses K1"));
            recs.push(ConditionRecord::new("L7 >= max(entropy bound, sqrt(8*c5))", None, l7, Ge, lb(l4, 4.0 * r, sqrt(8.0 * c5))).noted("uses K1"));
        }
        ModelKind::Sgcp => {
            let c0 = ledger.get(Constant::SmallC0)?;
            let (l8, l9, l10) = (ledger.get(Constant::L8)?, ledger.get(Constant::L9)?, ledger.get(Constant::L10)?);
            let e = sgcp_tail_exponent(ledger)?;
            let c = SGCP_C;
            recs.push(ConditionRecord::new("L8 > max(A,1,(2*c5/D1)^(1/d))", None, l8, Gt, a.max(1.0).max(pow(2.0 * c5 / d1, 1.0 / df))));
            recs.push(ConditionRecord::new("L9 >= sqrt(8*c5)", None, l9, Ge, sqrt(8.0 * c5)));
            recs.push(ConditionRecord::new("L10 > (c5/c0)^(1/e)", None, l10, Gt, pow(c5 / c0, 1.0 / e)).noted(match ledger.tail_exponent {
                TailExponent::RhoRate => "exponent bound to rho_rate",
                TailExponent::KappaTail => "exponent bound to kappa_tail",
            }));
            recs.push(ConditionRecord::new(
                "L8*L9^3*L10^(3/2) > 2/((6*c*L1)^(3/2)*tau*sqrt(d))",
                None,
                l8 * l9 * l9 * l9 * pow(l10, 1.5),
                Gt,
                2.0 / (pow(6.0 * c * l1, 1.5) * tau * sqrt(df)),
            ));
            recs.push(ConditionRecord::new("L9*L10^(1/2) > 1/(6*c*L1*sqrt(mu))", None, l9 * sqrt(l10), Gt, 1.0 / (6.0 * c * l1 * sqrt(mu))));
        }
    }
    recs.push(ConditionRecord::new("c5 > c2+2", None, c5, Gt, c2 + 2.0));
    Ok(ConditionReport { model: kind, records: recs, n_max: None })
}

/// Names of the n-dependent conditions, in order.
pub const QGCP_NAMES: [&str; 9] = ["QGCP1", "QGCP2", "QGCP3", "QGCP4", "QGCP5", "QGCP6", "QGCP7", "QGCP8", "QGCP9"];
pub const SGCP_NAMES: [&str; 11] = [
    "SGCP1", "SGCP2", "SGCP3", "SGCP4", "SGCP5", "SGCP6", "SGCP7", "SGCP8", "SGCP9", "SGCP10", "SGCP11",
];
pub const QGCP_THRESHOLDS: [&str; 3] = ["n3", "n4", "n5"];
pub const SGCP_THRESHOLDS: [&str; 3] = ["n6", "n7", "n8"];

fn qgcp_condition(i: usize, ledger: &ConstantLedger, s: &RateSequences) -> Result<ConditionRecord> {
    use Relation::*;
    let n = s.n;
    let nf = n as f64;
    let df = s.d as f64;
    let (zeta, beta, dl, db) = (s.zeta_n, s.beta_n, s.delta_n, s.delta_bar_n);
    let l1 = ledger.get(Constant::L1)?;
    let name = QGCP_NAMES[i - 1];
    let sieve = || -> Result<f64> { Ok(pow(3.0 / l1, 1.5) * pow(df, 0.25) * pow(beta, 1.5) * sqrt(2.0 * ledger.get(Constant::Tau)? * zeta)) };
    let rec = match i {
        1 => ConditionRecord::new(name, Some(n), zeta, Gt, ledger.get(Constant::A)?.max(1.0)),
        2 => ConditionRecord::new(name, Some(n), sieve()?, Gt, 2.0 * pow(db, 1.5)),
        3 => ConditionRecord::new(name, Some(n), (3.0 / l1) * beta * sqrt(ledger.get(Constant::MuNorm)?), Gt, db),
        4 => {
            let lhs = ledger.get(Constant::MVdv)? * powi_signed(zeta, s.d) * powi_signed(log(sieve()? / pow(db, 1.5)), s.d + 1);
            ConditionRecord::new(name, Some(n), lhs, Le, nf * db * db)
        }
        5 => {
            let lhs = 2.0 * log(6.0 * beta * sqrt(ledger.get(Constant::MuNorm)?) / (l1 * db));
            ConditionRecord::new(name, Some(n), lhs, Le, nf * db * db)
        }
        6 => {
            let rhs = 16.0 * ledger.get(Constant::K5)? * powi_signed(zeta, s.d) * powi_signed(log(3.0 * zeta / db), s.d + 1);
            ConditionRecord::new(name, Some(n), beta * beta, Gt, rhs)
        }
        7 => {
            let q2 = ledger.get(Constant::Q2)?;
            let lhs = ledger.get(Constant::D1)? * powi_signed(zeta, s.d) * pow(log(zeta), q2);
            ConditionRecord::new(name, Some(n), lhs, Ge, 2.0 * ledger.get(Constant::SmallC5)? * nf * dl * dl)
        }
        8 => ConditionRecord::new(name, Some(n), beta * beta, Ge, 8.0 * ledger.get(Constant::SmallC5)? * nf * dl * dl),
        9 => {
            let p = ledger.get(Constant::Q1)? - df + 1.0;
            ConditionRecord::new(name, Some(n), p * log(zeta), Le, ledger.get(Constant::SmallC5)? * nf * dl * dl).logged()
        }
        _ => return Err(Error::Precondition(format!("no condition QGCP{i}"))),
    };
    Ok(rec)
}

fn sgcp_condition(i: usize, ledger: &ConstantLedger, s: &RateSequences) -> Result<ConditionRecord> {
    use Relation::*;
    let n = s.n;
    let nf = n as f64;
    let df = s.d as f64;
    let lam = s.lambda_n.ok_or_else(|| Error::InconsistentState("SGCP sequences without lambda_n".into()))?;
    let (zeta, beta, dl, db) = (s.zeta_n, s.beta_n, s.delta_n, s.delta_bar_n);
    let l1 = ledger.get(Constant::L1)?;
    let c = SGCP_C;
    let name = SGCP_NAMES[i - 1];
    let sieve = || -> Result<f64> {
        Ok(pow(6.0 * c * l1, 1.5) * pow(df, 0.25) * pow(beta, 1.5) * pow(lam, 0.75) * sqrt(2.0 * ledger.get(Constant::Tau)? * zeta))
    };
    let ndb2 = nf * db * db;
    let ndl2 = nf * dl * dl;
    let rec = match i {
        1 => ConditionRecord::new(name, Some(n), sieve()?, Gt, 2.0 * pow(db, 1.5)),
        2 => ConditionRecord::new(name, Some(n), 6.0 * c * l1 * beta * sqrt(lam * ledger.get(Constant::MuNorm)?), Gt, db),
        3 => ConditionRecord::new(name, Some(n), zeta, Gt, ledger.get(Constant::A)?.max(1.0)),
        4 => {
            let lhs = ledger.get(Constant::MVdv)? * powi_signed(zeta, s.d) * powi_signed(log(sieve()? / pow(db, 1.5)), s.d + 1);
            ConditionRecord::new(name, Some(n), lhs, Lt, ledger.get(Constant::K3)? * ndb2)
        }
        5 => {
            let lhs = 2.0 * log(12.0 * c * l1 * beta * sqrt(lam * ledger.get(Constant::MuNorm)?) / db);
            ConditionRecord::new(name, Some(n), lhs, Lt, ledger.get(Constant::K4)? * ndb2)
        }
        6 => ConditionRecord::new(name, Some(n), log(2.0 * l1 * sqrt(lam) / db), Lt, ledger.get(Constant::K5)? * ndb2),
        7 => {
            let rhs = 16.0 * ledger.get(Constant::K5)? * powi_signed(zeta, s.d) * powi_signed(log(sqrt(lam) * zeta / db), s.d + 1);
            ConditionRecord::new(name, Some(n), beta * beta, Gt, rhs)
        }
        8 => {
            let e = sgcp_tail_exponent(ledger)?;
            let kappa = ledger.get(Constant::KappaTail)?;
            let rec = ConditionRecord::new(name, Some(n), ledger.get(Constant::SmallC0)? * pow(lam, e), Gt, ledger.get(Constant::SmallC5)? * ndl2);
            if e / kappa > 1.0 {
                rec.noted("resolved by constant rule on L10")
            } else {
                rec.noted("unresolved by constant rule; direct evaluation")
            }
        }
        9 => ConditionRecord::new(name, Some(n), ledger.get(Constant::D1)? * powi_signed(zeta, s.d), Ge, 2.0 * ledger.get(Constant::SmallC5)? * ndl2),
        10 => {
            let p = ledger.get(Constant::Q1)? - df + 1.0;
            ConditionRecord::new(name, Some(n), p * log(zeta), Le, ledger.get(Constant::SmallC5)? * ndl2).logged()
        }
        11 => ConditionRecord::new(name, Some(n), beta * beta, Ge, 8.0 * ledger.get(Constant::SmallC5)? * ndl2),
        _ => return Err(Error::Precondition(format!("no condition SGCP{i}"))),
    };
    Ok(rec)
}

fn warn_on_constraints(ledger: &ConstantLedger, kind: ModelKind) {
    match check_constant_constraints(ledger, kind) {
        Ok(rep) => {
            for r in rep.failing() {
                log::warn!("constant constraint fails: {} ({} vs {})", r.name, r.lhs, r.rhs);
            }
        }
        Err(e) => log::warn!("constant constraints not evaluable: {e}"),
    }
}

/// Both sides of QGCP1 through QGCP9 at `n`.
pub fn check_qgcp_conditions(ledger: &ConstantLedger, n: u64) -> Result<ConditionReport> {
    let s = rate_sequences(ModelKind::Qgcp, n, ledger)?;
    warn_on_constraints(ledger, ModelKind::Qgcp);
    let records = (1..=9).map(|i| qgcp_condition(i, ledger, &s)).collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport { model: ModelKind::Qgcp, records, n_max: None })
}

/// Both sides of SGCP1 through SGCP11 at `n`.
pub fn check_sgcp_conditions(ledger: &ConstantLedger, n: u64) -> Result<ConditionReport> {
    let s = rate_sequences(ModelKind::Sgcp, n, ledger)?;
    warn_on_constraints(ledger, ModelKind::Sgcp);
    let records = (1..=11).map(|i| sgcp_condition(i, ledger, &s)).collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport { model: ModelKind::Sgcp, records, n_max: None })
}

/// Checks for `kind` at `n`.
pub fn check_conditions(ledger: &ConstantLedger, kind: ModelKind, n: u64) -> Result<ConditionReport> {
    match kind {
        ModelKind::Qgcp => check_qgcp_conditions(ledger, n),
        ModelKind::Sgcp => check_sgcp_conditions(ledger, n),
    }
}

/// Evaluates one of the lemma-level sufficient conditions `n3..n8` at `n`.
pub fn lemma_threshold_record(name: &str, ledger: &ConstantLedger, n: u64) -> Result<ConditionRecord> {
    use Relation::*;
    if n < 3 {
        return Err(Error::Precondition(format!("thresholds need n >= 3, got {n}")));
    }
    let alpha = ledger.get(Constant::Alpha)?;
    let d = ledger.dimension()?;
    let df = d as f64;
    let nf = n as f64;
    let ln = log(nf);
    let l1 = ledger.get(Constant::L1)?;
    let tau = ledger.get(Constant::Tau)?;
    let m = ledger.get(Constant::MVdv)?;
    let rec = match name {
        "n3" | "n4" | "n5" => {
            let r = rho(ModelKind::Qgcp, alpha, d);
            let g0 = ledger.qgcp_g0()?;
            let s24 = ledger.get(Constant::L2)? + ledger.get(Constant::L3)? + ledger.get(Constant::L4)?;
            let s57 = ledger.get(Constant::L5)? + ledger.get(Constant::L6)? + ledger.get(Constant::L7)?;
            match name {
                "n3" => {
                    let lhs = 4.0 * g0 * g0 * pow(ln, 2.0 * df + 2.0 - 2.0 * r);
                    let inner = log(27.0 * tau * sqrt(df) * s57 * s57 * s57 * s24 / (4.0 * g0 * g0 * g0))
                        + (4.0 + (12.0 + df + df * df) / (8.0 * alpha * df + 2.0 * df * df)) * ln;
                    let rhs = m * powi_signed(s24, d) / pow(2.0, 1.0 + df) * powi_signed(inner, d + 1);
                    ConditionRecord::new("n3", Some(n), lhs, Ge, rhs)
                }
                "n4" => {
                    let mu = ledger.get(Constant::MuNorm)?;
                    let lhs = 2.0 * log(6.0 * sqrt(mu) * s57 / (2.0 * l1 * g0 + l1));
                    let rhs = 4.0 * g0 * g0 * pow(nf, (4.0 * alpha + 2.0 * df) / (8.0 * alpha + 2.0 * df)) * pow(ln, 2.0 * r + 2.0 * df + 2.0)
                        - ((6.0 * alpha + df) / (4.0 * alpha + df) * ln + 6.0 * r * log(ln));
                    ConditionRecord::new("n4", Some(n), lhs, Le, rhs)
                }
                _ => {
                    let q1 = ledger.get(Constant::Q1)?;
                    let c5 = ledger.get(Constant::SmallC5)?;
                    let lhs = pow(nf, (2.0 * alpha + df) / (4.0 * alpha + df)) * pow(ln, 2.0 * r);
                    let inner = log(s24) + (2.0 * alpha + df) / (4.0 * alpha * df + df * df) * ln + 4.0 * r / df * log(ln);
                    ConditionRecord::new("n5", Some(n), lhs, Ge, q1 / (4.0 * c5 * g0 * g0) * inner)
                }
            }
        }
        "n6" | "n7" | "n8" => {
            let r = rho(ModelKind::Sgcp, alpha, d);
            let kappa = ledger.get(Constant::KappaTail)?;
            let (l8, l9, l10) = (ledger.get(Constant::L8)?, ledger.get(Constant::L9)?, ledger.get(Constant::L10)?);
            let c = SGCP_C;
            let e = 2.0 * alpha + df;
            match name {
                "n6" => {
                    let c5 = ledger.get(Constant::SmallC5)?;
                    let q1 = ledger.get(Constant::Q1)?;
                    let rhs = f64::max(
                        f64::max(2.0 * log(12.0 * c * l1 * l9 * sqrt(l10)) + 1.0, log(2.0 * l1 * sqrt(l10)) + 1.0),
                        ((q1 - df + 1.0) * log(l8) + 1.0) / c5,
                    );
                    ConditionRecord::new("n6", Some(n), pow(nf, df / e), Gt, rhs)
                }
                "n7" => {
                    let lhs = pow(ln, 2.0 * df + 2.0);
                    let k = log(pow(6.0 * c * l1, 1.5) * sqrt(2.0 * tau * l8 * l9 * l9 * l9) * pow(l10, 0.75) * pow(df, 0.25));
                    let slope = (kappa * (6.0 * df + 6.0 * alpha + 2.0) + 3.0 * df) / (4.0 * kappa * e);
                    let lp = 1.5 * r + 3.0 * r / kappa + r / df - df - 1.0;
                    let inner = k + slope * ln + lp * log(ln);
                    ConditionRecord::new("n7", Some(n), lhs, Gt, m * powi_signed(l8, d) * powi_signed(inner, d + 1)).noted("entropy constant m")
                }
                _ => {
                    let k5 = ledger.get(Constant::K5)?;
                    let d1 = ledger.get(Constant::D1)?;
                    let lhs = pow(ln, 2.0 * r);
                    let slope = (2.0 * alpha * kappa + 2.0 * kappa + df) / (2.0 * kappa * e);
                    let lp = r * (2.0 / kappa + 2.0 / df - 1.0) - df - 1.0;
                    let inner = (log(sqrt(l10) * l8) + slope * ln + lp * log(ln)) / ln;
                    let rhs = 16.0 * k5 * d1 * powi_signed(l8, d) / (l9 * l9) * powi_signed(inner, d + 1);
                    ConditionRecord::new("n8", Some(n), lhs, Gt, rhs)
                }
            }
        }
        _ => return Err(Error::Precondition(format!("unknown threshold {name}"))),
    };
    Ok(rec)
}

/// Evaluates any named n-dependent condition at `n`.
pub fn evaluate_condition(name: &str, ledger: &ConstantLedger, n: u64) -> Result<ConditionRecord> {
    if let Some(i) = QGCP_NAMES.iter().position(|x| *x == name) {
        let s = rate_sequences(ModelKind::Qgcp, n, ledger)?;
        return qgcp_condition(i + 1, ledger, &s);
    }
    if let Some(i) = SGCP_NAMES.iter().position(|x| *x == name) {
        let s = rate_sequences(ModelKind::Sgcp, n, ledger)?;
        return sgcp_condition(i + 1, ledger, &s);
    }
    lemma_threshold_record(name, ledger, n)
}

/// Smallest `n` in `[3, n_max]` from which `holds` is true for every `n'`
/// up to `n_max`.
pub fn minimal_n_by<F>(n_max: u64, mut holds: F) -> Result<Option<u64>>
where
    F: FnMut(u64) -> Result<bool>,
{
    if n_max < 3 {
        return Err(Error::Precondition(format!("n_max must be >= 3, got {n_max}")));
    }
    let mut first = None;
    let mut n = n_max;
    while n >= 3 {
        if !holds(n)? {
            break;
        }
        first = Some(n);
        n -= 1;
    }
    Ok(first)
}

/// [`minimal_n_by`] for a named condition (`QGCP1`..`SGCP11`, `n3`..`n8`).
pub fn minimal_n(name: &str, ledger: &ConstantLedger, n_max: u64) -> Result<Option<u64>> {
    minimal_n_by(n_max, |n| Ok(evaluate_condition(name, ledger, n)?.holds))
}

/// The four terms of the generic contraction bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem3Bound {
    pub value: f64,
    pub terms: [f64; 4],
    /// Every exponent decays: `c2 M² J²/4 > C + 1` and `M²/2 > c3`.
    pub useful_regime: bool,
}

/// `1/(C² nε²) + e^{−M² nε²/4} + 2e^{−(M²/2−c3) nε²} + (2/c1) e^{−(c2 M² J²/4 − C − 1) nε²}`.
pub fn theorem3_bound(ledger: &ConstantLedger, n: u64, epsilon_n: f64) -> Result<Theorem3Bound> {
    let nf = n as f64;
    theorem3_bound_at(ledger, nf * epsilon_n * epsilon_n)
}

/// [`theorem3_bound`] as a function of `nε²` directly.
pub fn theorem3_bound_at(ledger: &ConstantLedger, n_eps2: f64) -> Result<Theorem3Bound> {
    let big_c = ledger.get(Constant::BigC)?;
    let j = ledger.get(Constant::J)?;
    let m = ledger.get(Constant::M)?;
    if !(big_c > 0.0 && j >= 1.0 && m >= 2.0) {
        return Err(Error::Precondition(format!("need C > 0, J >= 1, M >= 2; got C={big_c}, J={j}, M={m}")));
    }
    if !(n_eps2 > 0.0) {
        return Err(Error::Precondition(format!("n*eps^2 must be positive, got {n_eps2}")));
    }
    let c1 = ledger.get(Constant::SmallC1)?;
    let c2 = ledger.get(Constant::SmallC2)?;
    let c3 = ledger.get(Constant::SmallC3)?;
    let m2 = m * m;
    let e4 = c2 * m2 * j * j / 4.0 - big_c - 1.0;
    let e3 = m2 / 2.0 - c3;
    let terms = [
        1.0 / (big_c * big_c * n_eps2),
        exp(-m2 * n_eps2 / 4.0),
        2.0 * exp(-e3 * n_eps2),
        2.0 / c1 * exp(-e4 * n_eps2),
    ];
    let useful_regime = e4 > 0.0 && e3 > 0.0;
    if !useful_regime {
        log::warn!("contraction bound parameters outside the useful regime (exponents {e3}, {e4})");
    }
    Ok(Theorem3Bound {
        value: compensated_sum(terms),
        terms,
        useful_regime,
    })
}

/// First `n` in `[3, n_max]` reaching each of the three thresholds of the
/// generic theorem, with `K = 1/2`.
pub fn theorem3_thresholds<F>(ledger: &ConstantLedger, epsilon: F, n_max: u64) -> Result<[Option<u64>; 3]>
where
    F: Fn(u64) -> f64,
{
    if n_max < 3 {
        return Err(Error::Precondition(format!("n_max must be >= 3, got {n_max}")));
    }
    let lmin = ledger.get(Constant::Lambda0Min)?;
    let m = ledger.get(Constant::M)?;
    let mut out = [None; 3];
    for n in 3..=n_max {
        let e = epsilon(n);
        let tests = [
            compare(e, lmin, Relation::Le).0,
            compare(e, 1.0 / (sqrt(2.0) * m), Relation::Le).0,
            compare(n as f64 * e * e * THEOREM3_K * m * m / 4.0, log(2.0), Relation::Ge).0,
        ];
        for (slot, t) in out.iter_mut().zip(tests) {
            if slot.is_none() && t {
                *slot = Some(n);
            }
        }
        if out.iter().all(Option::is_some) {
            break;
        }
    }
    Ok(out)
}
