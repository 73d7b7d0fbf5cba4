//! Plot-ready prediction bands for the ten experiment panels.
//!
//! Panels without stored curves are filled from their mirror image in the ±45 mount (strip-y from
//! strip-x, off-y from off-x, and the second direction of the ±45 equibiaxial test from its
//! first), which is exact because that mount is symmetric about the warp fiber.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{BiaxialDataset, Curve, CurvePoint, Direction, Experiment};
use crate::error::{Error, Result};
use crate::kinematics::DeformationState;
use crate::objective::extra_nll;
use crate::stress::{predict, GaussianModel};

pub const PANEL_HEADER: [&str; 8] = [
    "direction",
    "stretch",
    "lambda1",
    "lambda2",
    "data_mean",
    "data_std",
    "model_mean",
    "model_std",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub direction: u8,
    pub stretch: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub data_mean: f64,
    pub data_std: f64,
    pub model_mean: f64,
    pub model_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub experiment: String,
    pub orientation: String,
    /// Curve each direction's data came from, when mirrored.
    pub mirrored_from: BTreeMap<u8, String>,
    /// Extra NLL per direction.
    pub extra_nll: BTreeMap<u8, f64>,
    #[serde(skip)]
    pub rows: Vec<PanelRow>,
}

fn mirrored(curve: &Curve, experiment: Experiment) -> Curve {
    let mut out = Curve::new(experiment, curve.direction.swapped());
    out.points = curve
        .points
        .iter()
        .map(|p| CurvePoint {
            lambda1: p.lambda2,
            lambda2: p.lambda1,
            ..*p
        })
        .collect();
    out
}

/// The data curve for one panel direction, mirrored from its partner when needed.
fn panel_curve(
    data: &BiaxialDataset,
    experiment: Experiment,
    direction: Direction,
) -> Option<(Curve, Option<String>)> {
    let direct = data
        .curves
        .iter()
        .find(|c| c.experiment == experiment && c.direction == direction);
    if let Some(c) = direct {
        return Some((c.clone(), None));
    }
    let partner = match experiment {
        Experiment::EquibiaxOff => Some((Experiment::EquibiaxOff, direction.swapped())),
        e => e.mirror_source().map(|s| (s, direction.swapped())),
    }?;
    let src = data
        .curves
        .iter()
        .find(|c| c.experiment == partner.0 && c.direction == partner.1)?;
    Some((mirrored(src, experiment), Some(src.id.clone())))
}

pub fn build_panels(model: &GaussianModel, data: &BiaxialDataset) -> Result<Vec<Panel>> {
    model.validate()?;
    for c in &data.curves {
        if c.orientation != c.experiment.orientation() {
            return Err(Error::Data(format!(
                "curve {} is mounted {} but experiment {} uses {}",
                c.id,
                c.orientation.tag(),
                c.experiment,
                c.experiment.orientation().tag()
            )));
        }
    }
    let mut panels = Vec::new();
    for experiment in Experiment::ALL {
        let mut panel = Panel {
            experiment: experiment.tag().to_string(),
            orientation: experiment.orientation().tag().to_string(),
            mirrored_from: BTreeMap::new(),
            extra_nll: BTreeMap::new(),
            rows: Vec::new(),
        };
        for direction in [Direction::Dir1, Direction::Dir2] {
            let Some((curve, source)) = panel_curve(data, experiment, direction) else {
                continue;
            };
            let n = direction.number();
            if let Some(s) = source {
                panel.mirrored_from.insert(n, s);
            }
            let single = BiaxialDataset::from_curves(vec![curve.clone()]);
            panel.extra_nll.insert(n, extra_nll(model, &single, &curve.id)?.extra);
            for g in curve.point_groups() {
                let state = DeformationState::new(g.lambda1, g.lambda2, curve.orientation)?;
                let p = predict(model, &state)?;
                let (model_mean, model_std) = match direction {
                    Direction::Dir1 => (p.mu11, p.std11()),
                    Direction::Dir2 => (p.mu22, p.std22()),
                };
                panel.rows.push(PanelRow {
                    direction: n,
                    stretch: experiment.loaded_stretch(g.lambda1, g.lambda2),
                    lambda1: g.lambda1,
                    lambda2: g.lambda2,
                    data_mean: g.mean(),
                    data_std: g.variance().sqrt(),
                    model_mean,
                    model_std,
                });
            }
        }
        if panel.rows.is_empty() {
            log::warn!("no data for panel {experiment}");
        }
        panels.push(panel);
    }
    Ok(panels)
}

pub fn write_panel_csv(panel: &Panel, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PANEL_HEADER)?;
    for r in &panel.rows {
        w.write_record([
            r.direction.to_string(),
            r.stretch.to_string(),
            r.lambda1.to_string(),
            r.lambda2.to_string(),
            r.data_mean.to_string(),
            r.data_std.to_string(),
            r.model_mean.to_string(),
            r.model_std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one CSV per panel, `panels.json` with the metadata and, when `svg` is set, one SVG per
/// panel. Returns the files written.
pub fn write_report(panels: &[Panel], out_dir: impl AsRef<Path>, svg: bool) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for p in panels {
        let path = dir.join(format!("{}.csv", p.experiment));
        write_panel_csv(p, &path)?;
        files.push(path);
        if svg {
            let path = dir.join(format!("{}.svg", p.experiment));
            std::fs::write(&path, render_svg(p))?;
            files.push(path);
        }
    }
    let meta = dir.join("panels.json");
    std::fs::write(&meta, serde_json::to_string_pretty(panels)? + "\n")?;
    files.push(meta);
    Ok(files)
}

const WIDTH: f64 = 360.0;
const HEIGHT: f64 = 270.0;
const MARGIN: f64 = 40.0;

/// Static plot of one panel: data mean ± std in red, model mean ± std in blue, solid for the
/// first direction and dashed for the second.
pub fn render_svg(panel: &Panel) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        panel.experiment
    );
    let rows = &panel.rows;
    if !rows.is_empty() {
        let xs = rows.iter().map(|r| r.stretch);
        let (x0, x1) = (xs.clone().fold(1.0, f64::min), xs.fold(1.0, f64::max).max(1.0 + 1e-9));
        let ys = rows.iter().flat_map(|r| {
            [r.data_mean + r.data_std, r.model_mean + r.model_std, r.data_mean - r.data_std]
        });
        let y1 = ys.clone().fold(0.0, f64::max).max(1e-9);
        let y0 = ys.fold(0.0, f64::min);
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let _ = writeln!(
            out,
            r#"<path d="M{} {} H{} M{} {} V{}" stroke="black" fill="none"/>"#,
            MARGIN,
            HEIGHT - MARGIN,
            WIDTH - MARGIN,
            MARGIN,
            HEIGHT - MARGIN,
            MARGIN
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">stretch {x0:.3} to {x1:.3}; stress to {y1:.1} kPa</text>"#,
            WIDTH / 2.0,
            HEIGHT - 10.0
        );
        for dir in [1u8, 2] {
            let sel: Vec<&PanelRow> = rows.iter().filter(|r| r.direction == dir).collect();
            if sel.is_empty() {
                continue;
            }
            let dash = if dir == 2 { r#" stroke-dasharray="4 3""# } else { "" };
            for (color, mean, std) in [
                ("#c0392b", (|r: &PanelRow| r.data_mean) as fn(&PanelRow) -> f64, (|r: &PanelRow| r.data_std) as fn(&PanelRow) -> f64),
                ("#2e6fba", |r: &PanelRow| r.model_mean, |r: &PanelRow| r.model_std),
            ] {
                let mut band = String::new();
                for r in &sel {
                    let _ = write!(band, "{:.2},{:.2} ", sx(r.stretch), sy(mean(r) + std(r)));
                }
                for r in sel.iter().rev() {
                    let _ = write!(band, "{:.2},{:.2} ", sx(r.stretch), sy(mean(r) - std(r)));
                }
                let _ = writeln!(
                    out,
                    r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                    band.trim_end()
                );
                let line: Vec<String> = sel
                    .iter()
                    .map(|r| format!("{:.2},{:.2}", sx(r.stretch), sy(mean(r))))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                    line.join(" ")
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{standard_protocols, synthesize};
    use crate::energy::N_TERMS;
    use crate::stress::CovarianceParam;

    fn model() -> GaussianModel {
        let mut w_mu = [0.0; N_TERMS];
        w_mu[0] = 5.0;
        w_mu[10] = 2.0;
        w_mu[13] = 1.0;
        GaussianModel {
            w_mu,
            w_star: [2.0; N_TERMS],
            covariance: CovarianceParam::independent([0.2; N_TERMS]),
        }
    }

    #[test]
    fn all_ten_panels_with_mirrors() {
        let m = model();
        let data = synthesize(&m, &standard_protocols(1.15), 4, 6, 2).unwrap();
        let panels = build_panels(&m, &data).unwrap();
        assert_eq!(panels.len(), 10);
        for p in &panels {
            assert_eq!(p.rows.len(), 12, "{}", p.experiment);
            assert_eq!(p.extra_nll.len(), 2);
        }
        let strip_y = panels.iter().find(|p| p.experiment == "strip-y").unwrap();
        assert_eq!(strip_y.mirrored_from[&1], "strip-x:2");
        let eq = panels.iter().find(|p| p.experiment == "equibiax-45").unwrap();
        assert_eq!(eq.mirrored_from[&2], "equibiax-45:1");
        // mirrored data agrees with the model evaluated in place
        for r in &strip_y.rows {
            assert!((r.lambda1 - 1.0).abs() < 1e-15);
            assert!((r.data_mean - r.model_mean).abs() < 3.0 * r.model_std + 1e-9);
        }
    }

    #[test]
    fn deterministic_model_has_zero_std_and_svg_renders() {
        let mut m = model();
        m.covariance = CovarianceParam::deterministic();
        let data = synthesize(&m, &standard_protocols(1.1), 2, 4, 0).unwrap();
        let panels = build_panels(&m, &data).unwrap();
        assert!(panels.iter().flat_map(|p| &p.rows).all(|r| r.model_std == 0.0));
        let svg = render_svg(&panels[0]);
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    }

    #[test]
    fn mount_mismatch_is_rejected() {
        let m = model();
        let mut data = synthesize(&m, &standard_protocols(1.1), 2, 4, 0).unwrap();
        data.curves[0].orientation = crate::kinematics::Orientation::Offset45;
        assert!(build_panels(&m, &data).is_err());
    }
}
