//! Report tables and SVG figures. Every figure gets a sibling CSV holding
//! the plotted numbers.

use std::path::{Path, PathBuf};

use plotters::coord::Shift;
use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::fsutil::{create_dir_all, write_string_atomic};
use crate::labels::{AgeGroup, ExpressionLabel};
use crate::metrics::{render_local_global_markdown, render_local_global_table, Cell, SimilarityReport};
use crate::stats::StatisticsBundle;

pub const TABLE_CSV: &str = "local_global_table.csv";
pub const TABLE_MD: &str = "local_global_table.md";

/// The rounded LS/GS table as CSV and Markdown.
pub fn write_report_tables(report: &SimilarityReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let csv = dir.join(TABLE_CSV);
    let md = dir.join(TABLE_MD);
    write_string_atomic(&csv, &render_local_global_table(report))?;
    write_string_atomic(&md, &render_local_global_markdown(report))?;
    Ok(vec![csv, md])
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Figures {
    pub written: Vec<PathBuf>,
    /// Figures that were skipped, and why.
    pub notices: Vec<String>,
}

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn width_for(n: usize) -> u32 {
    (220 + 48 * n as u32).max(640)
}

struct Series {
    name: String,
    values: Vec<f64>,
}

enum BarLayout {
    Grouped,
    Stacked,
}

fn bar_chart(
    path: &Path,
    title: &str,
    y_desc: &str,
    categories: &[String],
    series: &[Series],
    layout: BarLayout,
) -> Result<()> {
    let n = categories.len();
    let top = match layout {
        BarLayout::Grouped => series.iter().flat_map(|s| s.values.iter().copied()).fold(0.0, f64::max),
        BarLayout::Stacked => (0..n).map(|i| series.iter().map(|s| s.values[i]).sum::<f64>()).fold(0.0, f64::max),
    };
    let top = if top > 0.0 { top * 1.1 } else { 1.0 };
    let root = SVGBackend::new(path, (width_for(n), 480)).into_drawing_area();
    draw_bars(&root, title, y_desc, categories, series, layout, top).map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}

type DrawResult = std::result::Result<(), Box<dyn std::error::Error>>;

fn draw_bars(
    root: &DrawingArea<SVGBackend, Shift>,
    title: &str,
    y_desc: &str,
    categories: &[String],
    series: &[Series],
    layout: BarLayout,
    top: f64,
) -> DrawResult {
    root.fill(&WHITE)?;
    let n = categories.len();
    let mut chart = ChartBuilder::on(root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(70)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..n as f64, 0f64..top)?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(n.max(1) * 2 + 1)
        .x_label_formatter(&|x| {
            let i = x.floor() as usize;
            if (x - i as f64 - 0.5).abs() < 1e-6 && i < n {
                categories[i].clone()
            } else {
                String::new()
            }
        })
        .y_desc(y_desc)
        .draw()?;
    let k = series.len().max(1) as f64;
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let bars = (0..n).map(|i| {
            let (x0, x1, y0) = match layout {
                BarLayout::Grouped => {
                    let w = 0.8 / k;
                    let x0 = i as f64 + 0.1 + w * si as f64;
                    (x0, x0 + w, 0.0)
                }
                BarLayout::Stacked => {
                    let below: f64 = series[..si].iter().map(|t| t.values[i]).sum();
                    (i as f64 + 0.15, i as f64 + 0.85, below)
                }
            };
            Rectangle::new([(x0, y0), (x1, y0 + s.values[i])], color.filled())
        });
        chart
            .draw_series(bars)?
            .label(s.name.clone())
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
    }
    if series.len() > 1 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()?;
    }
    Ok(())
}

fn log_bar_chart(path: &Path, title: &str, y_desc: &str, categories: &[String], values: &[f64]) -> Result<()> {
    let n = categories.len();
    let top = values.iter().copied().fold(1.0, f64::max) * 2.0;
    let root = SVGBackend::new(path, (width_for(n), 480)).into_drawing_area();
    let draw = || -> DrawResult {
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(70)
            .y_label_area_size(60)
            .build_cartesian_2d(0f64..n as f64, (0.5f64..top).log_scale())?;
        chart
            .configure_mesh()
            .disable_x_mesh()
            .x_labels(n.max(1) * 2 + 1)
            .x_label_formatter(&|x| {
                let i = x.floor() as usize;
                if (x - i as f64 - 0.5).abs() < 1e-6 && i < n {
                    categories[i].clone()
                } else {
                    String::new()
                }
            })
            .y_desc(y_desc)
            .draw()?;
        chart.draw_series(values.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(i, v)| {
            Rectangle::new([(i as f64 + 0.15, 0.5), (i as f64 + 0.85, *v)], PALETTE[0].filled())
        }))?;
        Ok(())
    };
    draw().map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}

/// Train datasets are rows, test datasets columns.
fn heatmap(path: &Path, title: &str, datasets: &[String], cells: &[Vec<Cell>]) -> Result<()> {
    let n = datasets.len();
    let side = (260 + 40 * n as u32).max(480);
    let hi = cells
        .iter()
        .flatten()
        .filter_map(|c| c.value())
        .filter(|v| v.is_finite())
        .fold(1.0, f64::max);
    let root = SVGBackend::new(path, (side + 80, side)).into_drawing_area();
    let draw = || -> DrawResult {
        root.fill(&WHITE)?;
        let label = |v: &f64| {
            let i = v.floor() as usize;
            if (v - i as f64 - 0.5).abs() < 1e-6 && i < n {
                datasets[i].clone()
            } else {
                String::new()
            }
        };
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(90)
            .y_label_area_size(110)
            .build_cartesian_2d(0f64..n as f64, 0f64..n as f64)?;
        chart
            .configure_mesh()
            .disable_mesh()
            .x_labels(n * 2 + 1)
            .y_labels(n * 2 + 1)
            .x_label_formatter(&label)
            .y_label_formatter(&|y| label(&(n as f64 - y)))
            .x_desc("test dataset")
            .y_desc("train dataset")
            .draw()?;
        let mut rects = Vec::new();
        for (i, row) in cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                let color = match c {
                    Cell::Value(v) if v.is_finite() => {
                        let t = (v / hi).clamp(0.0, 1.0);
                        RGBColor(
                            (255.0 * (1.0 - t) + 31.0 * t) as u8,
                            (255.0 * (1.0 - t) + 119.0 * t) as u8,
                            (255.0 * (1.0 - t) + 180.0 * t) as u8,
                        )
                    }
                    _ => RGBColor(200, 200, 200),
                };
                let y = (n - 1 - i) as f64;
                rects.push(Rectangle::new([(j as f64, y), (j as f64 + 1.0, y + 1.0)], color.filled()));
            }
        }
        chart.draw_series(rects)?;
        let mut text = Vec::new();
        for (i, row) in cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                let s = match c {
                    Cell::Value(v) => format!("{v:.2}"),
                    Cell::Missing => "NA".into(),
                    Cell::Undefined => "undef".into(),
                };
                let y = (n - 1 - i) as f64 + 0.5;
                text.push(Text::new(s, (j as f64 + 0.2, y), ("sans-serif", 11)));
            }
        }
        chart.draw_series(text)?;
        Ok(())
    };
    draw().map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}

struct Writer<'a> {
    dir: &'a Path,
    out: Figures,
}

impl Writer<'_> {
    fn figure(&mut self, stem: &str, csv: String, plot: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let svg = self.dir.join(format!("{stem}.svg"));
        let csv_path = self.dir.join(format!("{stem}.csv"));
        write_string_atomic(&csv_path, &csv)?;
        plot(&svg)?;
        self.out.written.push(svg);
        self.out.written.push(csv_path);
        Ok(())
    }
}

fn cell_value(c: Cell) -> f64 {
    c.value().unwrap_or(0.0)
}

/// Renders every figure whose inputs are available.
pub fn render_figures(stats: Option<&StatisticsBundle>, report: Option<&SimilarityReport>, dir: &Path) -> Result<Figures> {
    create_dir_all(dir)?;
    let mut w = Writer {
        dir,
        out: Figures::default(),
    };
    if let Some(s) = stats {
        stats_figures(&mut w, s)?;
    }
    if let Some(r) = report {
        similarity_figures(&mut w, r)?;
    }
    Ok(w.out)
}

fn stats_figures(w: &mut Writer, s: &StatisticsBundle) -> Result<()> {
    let names: Vec<String> = s.image_count_per_dataset.keys().cloned().collect();
    let counts: Vec<f64> = names.iter().map(|d| s.image_count_per_dataset[d] as f64).collect();
    w.figure("image_counts", s.image_counts_csv(), |p| {
        log_bar_chart(p, "Images after exclusion", "images (log scale)", &names, &counts)
    })?;

    if s.user_count_per_dataset.is_empty() {
        w.out.notices.push("user_counts: no dataset provides user ids".into());
    } else {
        let names: Vec<String> = s.user_count_per_dataset.keys().cloned().collect();
        let series = vec![
            Series {
                name: "users".into(),
                values: names.iter().map(|d| s.user_count_per_dataset[d] as f64).collect(),
            },
            Series {
                name: "images per user".into(),
                values: names.iter().map(|d| s.images_per_user[d]).collect(),
            },
        ];
        w.figure("user_counts", s.user_counts_csv(), |p| {
            bar_chart(p, "Users per dataset", "count", &names, &series, BarLayout::Grouped)
        })?;
    }

    if s.age_histogram.is_empty() {
        w.out.notices.push("age_histogram: no age information".into());
    } else {
        let lo = *s.age_histogram.keys().next().unwrap();
        let hi = *s.age_histogram.keys().next_back().unwrap();
        let bins: Vec<String> = (lo..=hi).map(|a| a.to_string()).collect();
        let series = vec![Series {
            name: "images".into(),
            values: (lo..=hi).map(|a| s.age_histogram.get(&a).copied().unwrap_or(0) as f64).collect(),
        }];
        w.figure("age_histogram", s.age_histogram_csv(), |p| {
            bar_chart(p, "Age distribution (1-year bins)", "images", &bins, &series, BarLayout::Grouped)
        })?;
    }

    if s.gender_distribution.is_empty() {
        w.out.notices.push("gender_distribution: no gender information".into());
    } else {
        let names: Vec<String> = s.gender_distribution.keys().cloned().collect();
        let series = vec![
            Series {
                name: "male".into(),
                values: names.iter().map(|d| s.gender_distribution[d].male).collect(),
            },
            Series {
                name: "female".into(),
                values: names.iter().map(|d| s.gender_distribution[d].female).collect(),
            },
        ];
        w.figure("gender_distribution", s.gender_distribution_csv(), |p| {
            bar_chart(p, "Gender distribution", "fraction", &names, &series, BarLayout::Stacked)
        })?;
    }

    if s.age_group_distribution.is_empty() {
        w.out.notices.push("age_group_distribution: no age information".into());
    } else {
        let names: Vec<String> = s.age_group_distribution.keys().cloned().collect();
        let series: Vec<Series> = AgeGroup::ALL
            .iter()
            .map(|g| Series {
                name: g.as_str().into(),
                values: names
                    .iter()
                    .map(|d| s.age_group_distribution[d].get(g).copied().unwrap_or(0.0))
                    .collect(),
            })
            .collect();
        w.figure("age_group_distribution", s.age_group_distribution_csv(), |p| {
            bar_chart(p, "Age group distribution", "fraction", &names, &series, BarLayout::Stacked)
        })?;
    }

    if !s.class_distribution.is_empty() {
        let names: Vec<String> = s.class_distribution.keys().cloned().collect();
        let series: Vec<Series> = ExpressionLabel::ALL
            .iter()
            .map(|l| Series {
                name: l.as_str().into(),
                values: names
                    .iter()
                    .map(|d| s.class_distribution[d].get(l).copied().unwrap_or(0.0))
                    .collect(),
            })
            .collect();
        w.figure("class_distribution", s.class_distribution_csv(), |p| {
            bar_chart(p, "Class distribution", "fraction", &names, &series, BarLayout::Stacked)
        })?;
    }
    Ok(())
}

fn similarity_figures(w: &mut Writer, r: &SimilarityReport) -> Result<()> {
    let mut tables = vec![("all".to_string(), r.aggregate())];
    tables.extend(r.per_model.iter().map(|(m, t)| (m.clone(), t.clone())));
    for (model, t) in &tables {
        let stem = format!("local_global_{}", crate::media::sanitize(model));
        let series = vec![
            Series {
                name: "local similarity".into(),
                values: t.ls.iter().map(|c| cell_value(*c)).collect(),
            },
            Series {
                name: "global similarity".into(),
                values: t.gs.iter().map(|c| cell_value(*c)).collect(),
            },
        ];
        let title = if model == "all" {
            "Local and global similarity".to_string()
        } else {
            format!("Local and global similarity ({model})")
        };
        w.figure(&stem, t.local_global_csv(&r.datasets), |p| {
            bar_chart(p, &title, "macro F1", &r.datasets, &series, BarLayout::Grouped)
        })?;
    }
    let ps = r.paired_similarity_csv();
    w.figure("paired_similarity_heatmap", ps, |p| {
        heatmap(p, "Paired similarity", &r.datasets, &r.ps)
    })?;
    let missing = r.ps.iter().flatten().filter(|c| !c.is_value()).count();
    if missing > 0 {
        w.out
            .notices
            .push(format!("paired_similarity_heatmap: {missing} cells without a value, shown grey"));
    }
    Ok(())
}
