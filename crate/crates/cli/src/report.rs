//! Structured run reports, rendered as deterministic TOML: fixed key order,
//! 17-significant-digit floats, byte-identical across runs on the same
//! config.

use flowsect::criterion::{CriterionReport, HarmonicityReport, HondaReport, Verdict};
use flowsect::scenario::ValidationReport;
use flowsect::section::{IntegratorStats, MeasureReport, PeriodData};

/// Final pipeline verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunVerdict {
    SectionFoundCriterionPass,
    SectionFoundCriterionInconclusive,
    NoSectionConstructed,
    InvalidScenario,
}

impl RunVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunVerdict::SectionFoundCriterionPass => "SECTION_FOUND_CRITERION_PASS",
            RunVerdict::SectionFoundCriterionInconclusive => {
                "SECTION_FOUND_CRITERION_INCONCLUSIVE"
            }
            RunVerdict::NoSectionConstructed => "NO_SECTION_CONSTRUCTED",
            RunVerdict::InvalidScenario => "INVALID_SCENARIO",
        }
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.17e}")
}

fn fmt_ints(v: &[i64]) -> String {
    let items: Vec<String> = v.iter().map(|k| k.to_string()).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_floats(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|c| fmt_f(*c)).collect();
    format!("[{}]", items.join(", "))
}

/// Accumulates report sections; the `[run]` header with the final verdict
/// is prepended on [`ReportBuilder::finish`].
pub struct ReportBuilder {
    command: String,
    config: String,
    body: String,
}

impl ReportBuilder {
    pub fn new(command: &str, config_name: &str) -> Self {
        Self { command: command.to_string(), config: config_name.to_string(), body: String::new() }
    }

    pub fn validation(&mut self, report: &ValidationReport) -> &mut Self {
        self.body.push_str("\n[validation]\n");
        self.body.push_str(&format!("passed = {}\n", report.passed()));
        for check in &report.checks {
            self.body.push_str(&format!(
                "{}_passed = {}\n{}_residual = {}\n",
                check.name,
                check.passed,
                check.name,
                fmt_f(check.residual)
            ));
        }
        self
    }

    pub fn criterion(&mut self, r: &CriterionReport) -> &mut Self {
        self.body.push_str("\n[criterion]\n");
        self.body.push_str(&format!("m_squared = {}\n", fmt_f(r.m_squared)));
        self.body.push_str(&format!("delta_norm = {}\n", fmt_f(r.delta_norm)));
        self.body.push_str(&format!("d_flat_norm = {}\n", fmt_f(r.d_flat_norm)));
        self.body.push_str(&format!("margin = {}\n", fmt_f(r.margin)));
        self.body.push_str(&format!(
            "norm_chain_residual = {}\n",
            fmt_f(r.norm_chain_residual)
        ));
        self.body.push_str(&format!(
            "verdict = \"{}\"\n",
            if r.verdict == Verdict::Pass { "PASS" } else { "FAIL" }
        ));
        self
    }

    pub fn harmonicity(&mut self, r: &HarmonicityReport) -> &mut Self {
        self.body.push_str("\n[harmonicity]\n");
        self.body.push_str(&format!("d_norm = {}\n", fmt_f(r.d_norm)));
        self.body.push_str(&format!("delta_norm = {}\n", fmt_f(r.delta_norm)));
        self.body.push_str(&format!("tolerance = {}\n", fmt_f(r.tolerance)));
        self.body.push_str(&format!("harmonic = {}\n", r.harmonic));
        self
    }

    pub fn certificate_accepted(
        &mut self,
        min_pairing: f64,
        distance: f64,
        d_bound: f64,
        lower_bound_check: f64,
    ) -> &mut Self {
        self.body.push_str("\n[certificate]\n");
        self.body.push_str("constructed = true\n");
        self.body.push_str(&format!("min_pairing = {}\n", fmt_f(min_pairing)));
        self.body.push_str(&format!("distance = {}\n", fmt_f(distance)));
        self.body.push_str(&format!("d_bound = {}\n", fmt_f(d_bound)));
        self.body.push_str(&format!(
            "lower_bound_check = {}\n",
            fmt_f(lower_bound_check)
        ));
        self
    }

    pub fn certificate_rejected(
        &mut self,
        omega_norm: f64,
        min_pairing: f64,
        point: &[usize],
    ) -> &mut Self {
        self.body.push_str("\n[certificate]\n");
        self.body.push_str("constructed = false\n");
        self.body.push_str(&format!("omega_sup_norm = {}\n", fmt_f(omega_norm)));
        self.body.push_str(&format!("min_pairing = {}\n", fmt_f(min_pairing)));
        let idx: Vec<String> = point.iter().map(|i| i.to_string()).collect();
        self.body
            .push_str(&format!("offending_point = [{}]\n", idx.join(", ")));
        self
    }

    pub fn periods(&mut self, pd: &PeriodData) -> &mut Self {
        self.body.push_str("\n[periods]\n");
        self.body.push_str(&format!("c = {}\n", fmt_floats(&pd.c)));
        self.body.push_str(&format!("k = {}\n", fmt_ints(&pd.k)));
        self.body.push_str(&format!("q = {}\n", pd.q));
        self.body
            .push_str(&format!("perturbation = {}\n", fmt_floats(&pd.perturbation)));
        self.body.push_str(&format!(
            "perturbation_pairing_sup = {}\n",
            fmt_f(pd.pairing_sup)
        ));
        self
    }

    pub fn section(
        &mut self,
        sample_count: usize,
        transversality_margin: f64,
        honda: &HondaReport,
    ) -> &mut Self {
        self.body.push_str("\n[section]\n");
        self.body.push_str(&format!("sample_count = {sample_count}\n"));
        self.body.push_str(&format!(
            "transversality_margin = {}\n",
            fmt_f(transversality_margin)
        ));
        self.body
            .push_str(&format!("honda_min_abs = {}\n", fmt_f(honda.min_abs)));
        self.body
            .push_str(&format!("honda_uniform_sign = {}\n", honda.uniform_sign));
        self.body.push_str(&format!("honda_passed = {}\n", honda.passed));
        self
    }

    pub fn poincare(&mut self, seeds: usize, stats: &IntegratorStats) -> &mut Self {
        self.body.push_str("\n[poincare]\n");
        self.body.push_str(&format!("seeds = {seeds}\n"));
        self.body.push_str(&format!("tau_min = {}\n", fmt_f(stats.tau_min)));
        self.body.push_str(&format!("tau_max = {}\n", fmt_f(stats.tau_max)));
        self.body.push_str(&format!("tau_mean = {}\n", fmt_f(stats.tau_mean)));
        self.body.push_str(&format!(
            "max_image_residual = {}\n",
            fmt_f(stats.max_f_residual)
        ));
        self.body
            .push_str(&format!("total_steps = {}\n", stats.total_steps));
        self
    }

    pub fn measure(&mut self, r: &MeasureReport) -> &mut Self {
        self.body.push_str("\n[measure]\n");
        self.body.push_str(&format!("arcs = {}\n", r.arcs));
        self.body
            .push_str(&format!("max_difference = {}\n", fmt_f(r.max_difference)));
        self.body
            .push_str(&format!("total_measure = {}\n", fmt_f(r.total_measure)));
        self
    }

    pub fn suspension(&mut self, recovered_map_error: f64, emitted_config: &str) -> &mut Self {
        self.body.push_str("\n[suspension]\n");
        self.body.push_str(&format!(
            "recovered_map_error = {}\n",
            fmt_f(recovered_map_error)
        ));
        self.body
            .push_str(&format!("emitted_config = \"{emitted_config}\"\n"));
        self
    }

    pub fn error_note(&mut self, message: &str) -> &mut Self {
        self.body.push_str("\n[error]\n");
        self.body
            .push_str(&format!("message = \"{}\"\n", message.replace('"', "'")));
        self
    }

    /// One identity-suite entry; returns whether it passed.
    pub fn identity(&mut self, name: &str, residual: f64, tolerance: f64) -> bool {
        let passed = residual <= tolerance;
        self.body.push_str(&format!(
            "\n[[identity]]\nname = \"{name}\"\nresidual = {}\ntolerance = {}\npassed = {}\n",
            fmt_f(residual),
            fmt_f(tolerance),
            passed
        ));
        passed
    }

    pub fn finish(&self, verdict: &str, exit_code: i32) -> String {
        let mut out = String::new();
        out.push_str("[run]\n");
        out.push_str(&format!("command = \"{}\"\n", self.command));
        out.push_str(&format!("config = \"{}\"\n", self.config));
        out.push_str(&format!("verdict = \"{verdict}\"\n"));
        out.push_str(&format!("exit_code = {exit_code}\n"));
        out.push_str(&self.body);
        out
    }
}
