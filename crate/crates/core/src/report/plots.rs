//! Heatmap, ROC and embedding figures with their CSV companions.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use super::figure::{Anchor, Color, Figure, Shape};
use crate::error::{Error, IoContext, Result};
use crate::metrics::MeanRoc;

/// Line colours for successive series.
pub const PALETTE: [Color; 6] = [
    Color(31, 119, 180),
    Color(214, 39, 40),
    Color(44, 160, 44),
    Color(255, 127, 14),
    Color(148, 103, 189),
    Color(140, 86, 75),
];

/// Group colours of the realism embedding: queries, targets, counterfactuals.
pub const EMBEDDING_GROUPS: [(&str, Color); 3] = [
    ("queries", Color(214, 39, 40)),
    ("targets", Color(44, 160, 44)),
    ("counterfactuals", Color(31, 119, 180)),
];

/// Maps data coordinates into a pixel rectangle.
struct Axes {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width,
            self.top + (1.0 - (y - self.y.0) / (self.y.1 - self.y.0)) * self.height,
        )
    }

    fn frame(&self, fig: &mut Figure, x_label: &str, y_label: &str, ticks: usize) {
        let (l, t, w, h) = (self.left, self.top, self.width, self.height);
        fig.push(Shape::Line {
            points: vec![(l, t), (l + w, t), (l + w, t + h), (l, t + h), (l, t)],
            stroke: Color::BLACK,
            width: 1.0,
            dashed: false,
        });
        for k in 0..=ticks {
            let f = k as f64 / ticks as f64;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (px, _) = self.px(xv, self.y.0);
            let (_, py) = self.px(self.x.0, yv);
            fig.push(Shape::Line {
                points: vec![(px, t + h), (px, t + h + 4.0)],
                stroke: Color::BLACK,
                width: 1.0,
                dashed: false,
            });
            fig.text(px, t + h + 16.0, tick_label(xv), 10.0, Anchor::Middle);
            fig.push(Shape::Line {
                points: vec![(l - 4.0, py), (l, py)],
                stroke: Color::BLACK,
                width: 1.0,
                dashed: false,
            });
            fig.text(l - 6.0, py + 4.0, tick_label(yv), 10.0, Anchor::End);
        }
        fig.text(l + w / 2.0, t + h + 32.0, x_label, 12.0, Anchor::Middle);
        fig.text(l - 30.0, t - 8.0, y_label, 12.0, Anchor::Start);
    }
}

fn tick_label(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.1}")
    }
}

fn legend(fig: &mut Figure, x: f64, y: f64, entries: &[(String, Color)]) {
    for (k, (label, color)) in entries.iter().enumerate() {
        let yk = y + k as f64 * 16.0;
        fig.push(Shape::Rect {
            x,
            y: yk - 9.0,
            w: 10.0,
            h: 10.0,
            fill: *color,
        });
        fig.text(x + 16.0, yk, label.clone(), 10.0, Anchor::Start);
    }
}

/// One heatmap panel: a `T×F` grid of non-negative magnitudes.
#[derive(Clone, Debug)]
pub struct HeatmapPanel {
    pub title: String,
    pub values: Array2<f64>,
}

/// Features along x, time along y; zero is white and larger values are darker.
pub fn heatmap_figure(panels: &[HeatmapPanel]) -> Result<Figure> {
    let Some(first) = panels.first() else {
        return Err(Error::Degenerate("no heatmap panels".into()));
    };
    let (t, f) = first.values.dim();
    if panels.iter().any(|p| p.values.dim() != (t, f)) {
        return Err(Error::Shape("heatmap panels differ in shape".into()));
    }
    let cell = (240.0 / t.max(f) as f64).clamp(2.0, 24.0);
    let (pw, ph) = (cell * f as f64, cell * t as f64);
    let margin = 40.0;
    let width = margin + panels.len() as f64 * (pw + margin);
    let mut fig = Figure::new(width.ceil() as u32, (ph + 2.0 * margin + 20.0).ceil() as u32);
    for (k, panel) in panels.iter().enumerate() {
        let left = margin + k as f64 * (pw + margin);
        let top = margin;
        let vmax = panel.values.iter().copied().fold(0.0, f64::max);
        for ((ti, fi), &v) in panel.values.indexed_iter() {
            if v <= 0.0 || vmax <= 0.0 {
                continue;
            }
            let shade = 1.0 - (v / vmax).min(1.0);
            fig.push(Shape::Rect {
                x: left + fi as f64 * cell,
                y: top + ti as f64 * cell,
                w: cell,
                h: cell,
                fill: Color(
                    (8.0 + 247.0 * shade) as u8,
                    (48.0 + 207.0 * shade) as u8,
                    (107.0 + 148.0 * shade) as u8,
                ),
            });
        }
        fig.push(Shape::Line {
            points: vec![(left, top), (left + pw, top), (left + pw, top + ph), (left, top + ph), (left, top)],
            stroke: Color::GREY,
            width: 1.0,
            dashed: false,
        });
        fig.text(left + pw / 2.0, top - 10.0, panel.title.clone(), 11.0, Anchor::Middle);
        fig.text(left + pw / 2.0, top + ph + 16.0, "feature", 10.0, Anchor::Middle);
        fig.text(left - 4.0, top + ph / 2.0, "time", 10.0, Anchor::End);
    }
    Ok(fig)
}

/// CSV with columns `panel,t,f,value`.
pub fn write_heatmap_csv(path: impl AsRef<Path>, panels: &[HeatmapPanel]) -> Result<()> {
    let mut text = String::from("panel,t,f,value\n");
    for p in panels {
        for ((t, f), v) in p.values.indexed_iter() {
            let _ = writeln!(text, "{},{t},{f},{v}", p.title);
        }
    }
    let path = path.as_ref();
    std::fs::write(path, text).at(path)
}

/// Mean ROC curve per series with one-standard-deviation shading.
pub fn roc_figure(series: &[(String, MeanRoc)]) -> Figure {
    let mut fig = Figure::new(520, 460);
    let axes = Axes {
        left: 70.0,
        top: 40.0,
        width: 380.0,
        height: 360.0,
        x: (0.0, 1.0),
        y: (0.0, 1.0),
    };
    fig.push(Shape::Line {
        points: vec![axes.px(0.0, 0.0), axes.px(1.0, 1.0)],
        stroke: Color::GREY,
        width: 1.0,
        dashed: true,
    });
    let mut entries = Vec::new();
    for (k, (name, roc)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let upper = roc.fpr.iter().zip(&roc.mean_tpr).zip(&roc.std_tpr);
        let mut band: Vec<(f64, f64)> = upper
            .clone()
            .map(|((&x, &m), &s)| axes.px(x, (m + s).min(1.0)))
            .collect();
        band.extend(upper.rev().map(|((&x, &m), &s)| axes.px(x, (m - s).max(0.0))));
        fig.push(Shape::Area {
            points: band,
            fill: color,
            opacity: 0.2,
        });
        fig.push(Shape::Line {
            points: roc.fpr.iter().zip(&roc.mean_tpr).map(|(&x, &y)| axes.px(x, y)).collect(),
            stroke: color,
            width: 2.0,
            dashed: false,
        });
        entries.push((format!("{name} (AUC {:.2} ± {:.2})", roc.mean_auc, roc.std_auc), color));
    }
    axes.frame(&mut fig, "false positive rate", "true positive rate", 5);
    legend(&mut fig, 250.0, 300.0, &entries);
    fig
}

/// CSV with columns `series,fpr,mean_tpr,std_tpr`.
pub fn write_mean_roc_csv(path: impl AsRef<Path>, series: &[(String, MeanRoc)]) -> Result<()> {
    let mut text = String::from("series,fpr,mean_tpr,std_tpr\n");
    for (name, roc) in series {
        for i in 0..roc.fpr.len() {
            let _ = writeln!(text, "{name},{},{},{}", roc.fpr[i], roc.mean_tpr[i], roc.std_tpr[i]);
        }
    }
    let path = path.as_ref();
    std::fs::write(path, text).at(path)
}

/// Scatter of a 2-D embedding coloured by group (0 queries, 1 targets, 2 counterfactuals).
pub fn embedding_figure(points: ArrayView2<f64>, groups: &[usize]) -> Result<Figure> {
    if points.ncols() != 2 || points.nrows() != groups.len() {
        return Err(Error::Shape(format!(
            "{:?} points with {} group labels",
            points.dim(),
            groups.len()
        )));
    }
    if let Some(g) = groups.iter().find(|&&g| g >= EMBEDDING_GROUPS.len()) {
        return Err(Error::Shape(format!("group label {g} is not one of 0, 1, 2")));
    }
    let range = |col: usize| {
        let v = points.column(col);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo) * 0.05).max(1e-9);
        (lo - pad, hi + pad)
    };
    let mut fig = Figure::new(520, 480);
    let axes = Axes {
        left: 60.0,
        top: 40.0,
        width: 400.0,
        height: 360.0,
        x: range(0),
        y: range(1),
    };
    for (row, &g) in points.outer_iter().zip(groups) {
        let (cx, cy) = axes.px(row[0], row[1]);
        fig.push(Shape::Circle {
            cx,
            cy,
            r: 3.0,
            fill: EMBEDDING_GROUPS[g].1,
            opacity: 0.7,
        });
    }
    let entries: Vec<(String, Color)> = EMBEDDING_GROUPS.iter().map(|(n, c)| (n.to_string(), *c)).collect();
    fig.push(Shape::Line {
        points: vec![
            (axes.left, axes.top),
            (axes.left + axes.width, axes.top),
            (axes.left + axes.width, axes.top + axes.height),
            (axes.left, axes.top + axes.height),
            (axes.left, axes.top),
        ],
        stroke: Color::BLACK,
        width: 1.0,
        dashed: false,
    });
    legend(&mut fig, 70.0, 440.0, &entries);
    Ok(fig)
}

/// CSV with columns `x,y,group`.
pub fn write_embedding_csv(path: impl AsRef<Path>, points: ArrayView2<f64>, groups: &[usize]) -> Result<()> {
    let mut text = String::from("x,y,group\n");
    for (row, &g) in points.outer_iter().zip(groups) {
        let _ = writeln!(text, "{},{},{}", row[0], row[1], EMBEDDING_GROUPS[g.min(2)].0);
    }
    let path = path.as_ref();
    std::fs::write(path, text).at(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{mean_roc, saliency_roc};
    use ndarray::Array3;

    #[test]
    fn zero_residuals_give_an_all_white_grid() {
        let panel = HeatmapPanel {
            title: "residual".into(),
            values: Array2::zeros((5, 4)),
        };
        let fig = heatmap_figure(&[panel]).unwrap();
        let img = fig.rasterize();
        // interior of the grid, away from the frame
        for y in 45..(40 + 5 * 24 - 5) {
            for x in 45..(40 + 4 * 24 - 5) {
                assert_eq!(img.get_pixel(x, y).0, [255, 255, 255]);
            }
        }
    }

    #[test]
    fn larger_magnitudes_are_darker() {
        let values = Array2::from_shape_vec((1, 3), vec![0.0, 0.5, 1.0]).unwrap();
        let fig = heatmap_figure(&[HeatmapPanel { title: "r".into(), values }]).unwrap();
        let img = fig.rasterize();
        let lum = |x: u32| img.get_pixel(x, 40 + 12).0.iter().map(|&c| c as u32).sum::<u32>();
        let (c0, c1, c2) = (40 + 12, 40 + 24 + 12, 40 + 48 + 12);
        assert_eq!(lum(c0), 765);
        assert!(lum(c1) < lum(c0) && lum(c2) < lum(c1));
    }

    #[test]
    fn perfect_roc_passes_through_the_top_left_corner() {
        let mask = Array3::from_shape_fn((2, 4, 4), |(_, t, f)| t == f);
        let scores = mask.mapv(|m| if m { 1.0f64 } else { 0.0 });
        let c = saliency_roc(scores.view(), mask.view()).unwrap();
        let m = mean_roc(&[c], 101).unwrap();
        assert_eq!(m.mean_tpr[0], 1.0);
        let fig = roc_figure(&[("perfect".into(), m)]);
        let corner = (70.0, 40.0);
        let passes = fig.shapes.iter().any(|s| match s {
            Shape::Line { points, width, .. } if *width == 2.0 => points
                .iter()
                .any(|&(x, y)| (x - corner.0).abs() < 1e-9 && (y - corner.1).abs() < 1e-9),
            _ => false,
        });
        assert!(passes);
    }

    #[test]
    fn embedding_legend_has_three_classes() {
        let pts = Array2::from_shape_fn((9, 2), |(i, j)| (i * (j + 1)) as f64);
        let groups: Vec<usize> = (0..9).map(|i| i % 3).collect();
        let svg = embedding_figure(pts.view(), &groups).unwrap().to_svg();
        for (name, _) in EMBEDDING_GROUPS {
            assert_eq!(svg.matches(&format!(">{name}<")).count(), 1);
        }
        assert_eq!(svg.matches("<circle").count(), 9);
        assert!(embedding_figure(pts.view(), &[0; 8]).is_err());
    }

    #[test]
    fn figures_are_written_as_svg_and_png() {
        let dir = tempfile::tempdir().unwrap();
        let pts = Array2::from_shape_fn((6, 2), |(i, j)| (i + j) as f64);
        let fig = embedding_figure(pts.view(), &[0, 1, 2, 0, 1, 2]).unwrap();
        let [svg, png] = fig.save(dir.path().join("embedding")).unwrap();
        assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
        let img = image::open(png).unwrap();
        assert_eq!((img.width(), img.height()), (520, 480));
    }
}
