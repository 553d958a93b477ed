//! CSV export of section sample clouds and Poincaré data.
//!
//! Fixed column order, 17 significant digits, one row per sample, so runs
//! can be diffed byte-for-byte.

use crate::section::flow::PoincareData;
use crate::section::level::CrossSection;

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// Section samples: coordinates and the achieved `|F − level|` residual.
pub fn section_csv(section: &CrossSection) -> String {
    let n = section.samples[0].point.len();
    let mut out = String::new();
    let mut header: Vec<String> = AXES[..n].iter().map(|a| a.to_string()).collect();
    header.push("f_residual".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for sample in &section.samples {
        let mut row: Vec<String> = sample.point.iter().map(|&c| fmt(c)).collect();
        row.push(fmt(sample.f_residual));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Poincaré rows: seed coordinates, image coordinates, return time,
/// image residual.
pub fn poincare_csv(pd: &PoincareData) -> String {
    let n = pd.seeds.first().map(|s| s.len()).unwrap_or(2);
    let mut out = String::new();
    let mut header: Vec<String> =
        AXES[..n].iter().map(|a| format!("seed_{a}")).collect();
    header.extend(AXES[..n].iter().map(|a| format!("image_{a}")));
    header.push("tau".into());
    header.push("f_residual".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for ((seed, image), &tau) in
        pd.seeds.iter().zip(&pd.images).zip(&pd.return_times)
    {
        let mut row: Vec<String> = seed.iter().map(|&c| fmt(c)).collect();
        row.extend(image.iter().map(|&c| fmt(c)));
        row.push(fmt(tau));
        row.push(fmt(pd.stats.max_f_residual));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
