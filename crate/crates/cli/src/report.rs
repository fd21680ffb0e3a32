use std::fmt::Write as _;
use std::io::IsTerminal;

use sfd_core::apply::csv_number as num;
use sfd_core::decompose::DecompositionModel;
use sfd_core::grid::DesignSystem;

/// ln -> dB for amplitude quantities.
pub fn ln_to_db(x: f64) -> f64 {
    x * 20.0 / std::f64::consts::LN_10
}

pub fn db_to_ln(x: f64) -> f64 {
    x * std::f64::consts::LN_10 / 20.0
}

/// ANSI styling is used only on a terminal and when SFD_NO_COLOR is unset.
pub fn use_color() -> bool {
    std::env::var_os("SFD_NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

struct Style(bool);

impl Style {
    fn paint(&self, code: &str, text: &str) -> String {
        if self.0 {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }
}

pub fn analysis(model: &DecompositionModel, sys: &DesignSystem, color: bool) -> String {
    let st = Style(color);
    let label = |s: &str| st.paint("1", &format!("{s:<14}"));
    let mut out = String::new();
    let _ = writeln!(out, "{}{}", label("instrument"), model.name);
    let _ = writeln!(out, "{}{}", label("S"), model.notes);
    let _ = writeln!(out, "{}{}", label("K"), model.partials);
    let _ = writeln!(out, "{}{}", label("N"), sys.grid().occupied_count());
    let _ = writeln!(out, "{}{} x {}", label("system"), sys.row_count(), sys.col_count());
    let _ = writeln!(out, "{}{}", label("weighting"), model.weighting);
    let _ = writeln!(out, "{}{}", label("iterations"), model.iterations_used);
    let _ = writeln!(
        out,
        "{}{:.6e} ln ({:.6e} dB)",
        label("final_metric"),
        model.final_metric,
        ln_to_db(model.final_metric)
    );
    let conv = if model.converged {
        st.paint("32", "yes")
    } else {
        st.paint("33", "no")
    };
    let _ = writeln!(out, "{}{}", label("converged"), conv);
    out
}

pub fn excitation_csv(model: &DecompositionModel) -> String {
    let mut out = String::from("j,p_ln,p_db\n");
    for (k, p) in model.p.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", k + 1, num(*p), num(ln_to_db(*p)));
    }
    out
}

pub fn center_freq_hz(f0_lowest_hz: f64, n: u32) -> f64 {
    f0_lowest_hz * 2f64.powf((f64::from(n) - 1.0) / 12.0)
}

pub fn filter_csv(model: &DecompositionModel) -> String {
    let mut out = String::from("n,center_freq_hz,r_ln,r_db\n");
    for b in &model.r {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            b.n,
            num(center_freq_hz(model.f0_lowest_hz, b.n)),
            num(b.value),
            num(ln_to_db(b.value))
        );
    }
    out
}

pub fn residuals_csv(model: &DecompositionModel) -> String {
    let mut out = String::from("i,j,residual_ln\n");
    for e in &model.residuals {
        let _ = writeln!(out, "{},{},{}", e.i, e.j, num(e.value));
    }
    out
}
