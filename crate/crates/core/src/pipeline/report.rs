//! Max-score and top-100 summaries rendered in the before/after table layout.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::correlation::{compare_scores, Metric};
use crate::error::{Error, Result};

pub const TOP_N: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub max: Option<f64>,
    pub top_mean: Option<f64>,
    /// Scores that entered the summary.
    pub scored: usize,
    /// Undefined scores, excluded from both statistics.
    pub absent: usize,
}

impl ScoreSummary {
    pub fn from_scores(scores: &[Option<f64>], top: usize) -> Self {
        let mut present: Vec<f64> = scores.iter().flatten().copied().collect();
        present.sort_by(|a, b| compare_scores(Some(*a), Some(*b)));
        let taken = &present[..present.len().min(top)];
        ScoreSummary {
            max: present.first().copied(),
            top_mean: (!taken.is_empty()).then(|| taken.iter().sum::<f64>() / taken.len() as f64),
            scored: present.len(),
            absent: scores.len() - present.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub form: String,
    pub metric: Metric,
    pub before: ScoreSummary,
    pub after: ScoreSummary,
}

impl ReportRow {
    pub fn new(form: impl Into<String>, metric: Metric, before: &[Option<f64>], after: &[Option<f64>]) -> Self {
        ReportRow {
            form: form.into(),
            metric,
            before: ScoreSummary::from_scores(before, TOP_N),
            after: ScoreSummary::from_scores(after, TOP_N),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    form: String,
    metric: Metric,
    before_max: Option<f64>,
    after_max: Option<f64>,
    before_top100_mean: Option<f64>,
    after_top100_mean: Option<f64>,
    before_scored: usize,
    after_scored: usize,
    before_absent: usize,
    after_absent: usize,
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
}

impl ReportTable {
    pub fn combine(tables: impl IntoIterator<Item = ReportTable>) -> ReportTable {
        ReportTable {
            rows: tables.into_iter().flat_map(|t| t.rows).collect(),
        }
    }

    fn forms(&self) -> Vec<&str> {
        let mut forms: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !forms.contains(&r.form.as_str()) {
                forms.push(&r.form);
            }
        }
        forms
    }

    fn metrics(&self) -> Vec<Metric> {
        Metric::ALL.into_iter().filter(|m| self.rows.iter().any(|r| r.metric == *m)).collect()
    }

    fn find(&self, form: &str, metric: Metric) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.form == form && r.metric == metric)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(CsvRow {
                form: r.form.clone(),
                metric: r.metric,
                before_max: r.before.max,
                after_max: r.after.max,
                before_top100_mean: r.before.top_mean,
                after_top100_mean: r.after.top_mean,
                before_scored: r.before.scored,
                after_scored: r.after.scored,
                before_absent: r.before.absent,
                after_absent: r.after.absent,
            })
            .map_err(|e| Error::Parse(format!("report csv: {e}")))?;
        }
        out.flush().map_err(|e| Error::Parse(format!("report csv: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for rec in csv::Reader::from_reader(r).deserialize::<CsvRow>() {
            let c = rec.map_err(|e| Error::Parse(format!("report csv: {e}")))?;
            rows.push(ReportRow {
                form: c.form,
                metric: c.metric,
                before: ScoreSummary {
                    max: c.before_max,
                    top_mean: c.before_top100_mean,
                    scored: c.before_scored,
                    absent: c.before_absent,
                },
                after: ScoreSummary {
                    max: c.after_max,
                    top_mean: c.after_top100_mean,
                    scored: c.after_scored,
                    absent: c.after_absent,
                },
            });
        }
        Ok(ReportTable { rows })
    }

    /// Two aligned tables (maximum score, mean of the top 100) with one row per
    /// word form and a before/after column pair per metric.
    pub fn render_text(&self) -> String {
        let forms = self.forms();
        let metrics = self.metrics();
        let form_w = forms.iter().map(|f| f.len()).max().unwrap_or(4).max(4);
        let col_w = 8;
        let mut s = String::new();
        let sections: [(&str, fn(&ScoreSummary) -> Option<f64>); 2] = [
            ("Maximum score, before and after merging", |x| x.max),
            ("Mean score of the top 100, before and after merging", |x| x.top_mean),
        ];
        for (title, pick) in sections {
            let _ = writeln!(s, "{title}");
            let mut header = format!("{:form_w$}", "");
            let mut sub = format!("{:form_w$}", "");
            for m in &metrics {
                let span = 2 * col_w + 3;
                let _ = write!(header, " | {:^span$}", m.label(), span = span - 2);
                let _ = write!(sub, " | {:>col_w$} | {:>col_w$}", "before", "after");
            }
            let _ = writeln!(s, "{header}");
            let _ = writeln!(s, "{sub}");
            for form in &forms {
                let mut line = format!("{form:form_w$}");
                for m in &metrics {
                    let (b, a) = self
                        .find(form, *m)
                        .map(|r| (pick(&r.before), pick(&r.after)))
                        .unwrap_or((None, None));
                    let _ = write!(line, " | {:>col_w$} | {:>col_w$}", cell(b), cell(a));
                }
                let _ = writeln!(s, "{line}");
            }
            let _ = writeln!(s);
        }
        for r in &self.rows {
            if r.before.absent + r.after.absent > 0 {
                let _ = writeln!(
                    s,
                    "* {} / {}: {} before and {} after scores undefined (constant series), excluded",
                    r.form,
                    r.metric.label(),
                    r.before.absent,
                    r.after.absent
                );
            }
        }
        s
    }
}
