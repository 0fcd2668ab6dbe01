use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{
    assign_quintiles, calendar_time_returns, factor_alpha, fama_macbeth, long_short_spread, AlphaEstimate, Assignments,
    BacktestError, BacktestOptions, FactorModel, FamaMacbethResult, QuintilePortfolios, SeriesKind, FM_TERMS,
};
use crate::corpus::{build_panel, FactorSeries, PanelDiagnostics, ReturnsTable};
use crate::score::{Direction, MovingTargetsScore};

/// Two-sided p-value of a t-statistic.
pub fn two_sided_p(t: f64, dof: usize) -> f64 {
    if dof == 0 || !t.is_finite() {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("positive dof");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

pub fn significance_stars(p: f64) -> &'static str {
    match p {
        p if p < 0.01 => "***",
        p if p < 0.05 => "**",
        p if p < 0.10 => "*",
        _ => "",
    }
}

/// Estimates per model; columns Q1..Q5 then the Q5-Q1 spread.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTable {
    pub rows: Vec<(FactorModel, [AlphaEstimate; 6])>,
}

impl AlphaTable {
    pub fn get(&self, model: FactorModel) -> &[AlphaEstimate; 6] {
        &self.rows.iter().find(|(m, _)| *m == model).expect("all models present").1
    }

    pub fn spread(&self, model: FactorModel) -> &AlphaEstimate {
        &self.get(model)[5]
    }
}

#[derive(Debug, Clone)]
pub struct MethodBacktest {
    pub label: String,
    pub direction: Direction,
    pub assignments: Assignments,
    pub portfolios: QuintilePortfolios,
    pub alphas: AlphaTable,
    pub panel_diagnostics: PanelDiagnostics,
    /// Kept separate so portfolio results survive a failed regression.
    pub fama_macbeth: Result<FamaMacbethResult, BacktestError>,
}

/// Full backtest for one scoring method. `scores` must already be oriented
/// to `direction`.
pub fn run_backtest(
    label: &str,
    direction: Direction,
    scores: &[MovingTargetsScore],
    returns: &ReturnsTable,
    factors: &FactorSeries,
    options: &BacktestOptions,
) -> Result<MethodBacktest, BacktestError> {
    let assignments = assign_quintiles(scores);
    let portfolios = calendar_time_returns(&assignments.assignments, returns);
    let spread = long_short_spread(portfolios.quintile(5), portfolios.quintile(1))?;

    let mut rows = Vec::new();
    for model in FactorModel::ALL {
        let mut cells = Vec::with_capacity(6);
        for q in 1..=5 {
            cells.push(factor_alpha(portfolios.quintile(q), factors, model, SeriesKind::LongOnly, options)?);
        }
        cells.push(factor_alpha(&spread, factors, model, SeriesKind::ZeroCost, options)?);
        rows.push((model, cells.try_into().expect("six cells")));
    }

    let panel = build_panel(scores, returns, factors);
    let fm = fama_macbeth(&panel.rows, options);
    Ok(MethodBacktest {
        label: label.to_string(),
        direction,
        assignments,
        portfolios,
        alphas: AlphaTable { rows },
        panel_diagnostics: panel.diagnostics,
        fama_macbeth: fm,
    })
}

const COLUMNS: [&str; 6] = ["Q1", "Q2", "Q3", "Q4", "Q5", "Q5-Q1 (spread series)"];

fn model_title(model: FactorModel) -> &'static str {
    match model {
        FactorModel::Excess => "Excess return",
        FactorModel::ThreeFactor => "3-factor alpha",
        FactorModel::FiveFactor => "5-factor alpha",
    }
}

/// Machine-readable calendar-time table, one block per method.
type CellFormat = Box<dyn Fn(&AlphaEstimate) -> String>;

pub fn tab3_csv(results: &[MethodBacktest]) -> String {
    let mut out = String::from("method,direction,model,statistic");
    for c in COLUMNS {
        write!(out, ",{c}").unwrap();
    }
    out.push('\n');
    for r in results {
        for (model, cells) in &r.alphas.rows {
            let stats: [(&str, CellFormat); 5] = [
                ("estimate", Box::new(|a| format!("{:.6}", a.alpha))),
                ("t_stat", Box::new(|a| format!("{:.4}", a.t_stat))),
                ("p_value", Box::new(|a| format!("{:.4}", two_sided_p(a.t_stat, a.dof)))),
                ("months", Box::new(|a| a.n_months.to_string())),
                ("degenerate", Box::new(|a| u8::from(a.degenerate).to_string())),
            ];
            for (name, f) in stats {
                write!(out, "{},{},{},{name}", r.label, r.direction.as_str(), model).unwrap();
                for a in cells {
                    write!(out, ",{}", f(a)).unwrap();
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Human-readable calendar-time table with stars and t-statistics in
/// parentheses.
pub fn tab3_text(results: &[MethodBacktest]) -> String {
    let mut out = String::new();
    for r in results {
        writeln!(out, "Panel: {} ({} direction)", r.label, r.direction.as_str()).unwrap();
        write!(out, "{:<16}", "").unwrap();
        for c in ["Q1", "Q2", "Q3", "Q4", "Q5", "Q5-Q1"] {
            write!(out, "{c:>12}").unwrap();
        }
        out.push('\n');
        for (model, cells) in &r.alphas.rows {
            write!(out, "{:<16}", model_title(*model)).unwrap();
            for a in cells {
                let stars = significance_stars(two_sided_p(a.t_stat, a.dof));
                write!(out, "{:>12}", format!("{:.4}{stars}", a.alpha)).unwrap();
            }
            out.push('\n');
            write!(out, "{:<16}", "").unwrap();
            for a in cells {
                let mark = if a.degenerate { "d" } else { "" };
                write!(out, "{:>12}", format!("({:.2}){mark}", a.t_stat)).unwrap();
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out.push_str(
        "Q5-Q1 is the alpha of the monthly Q5 minus Q1 return series. Two-sided tests: * p<0.10, ** p<0.05, *** p<0.01.\n\
         (d): zero residual variance, t-statistic reported as 0.\n",
    );
    out
}

/// Fama-MacBeth coefficients and t-statistics, one column per method.
pub fn tab4_csv(results: &[MethodBacktest]) -> String {
    let mut out = String::from("term,statistic");
    for r in results {
        write!(out, ",{}", r.label).unwrap();
    }
    out.push('\n');
    let mut line = |term: &str, stat: &str, f: &dyn Fn(&FamaMacbethResult) -> String| {
        write!(out, "{term},{stat}").unwrap();
        for r in results {
            match &r.fama_macbeth {
                Ok(fm) => write!(out, ",{}", f(fm)).unwrap(),
                Err(_) => out.push(','),
            }
        }
        out.push('\n');
    };
    for (j, name) in FM_TERMS.iter().enumerate() {
        line(name, "coefficient", &|fm| format!("{:.6}", fm.terms[j].coefficient));
        line(name, "t_stat", &|fm| format!("{:.4}", fm.terms[j].t_stat));
    }
    line("Avg R2", "value", &|fm| format!("{:.4}", fm.avg_r_squared));
    line("N", "value", &|fm| fm.n_obs.to_string());
    line("Months", "value", &|fm| fm.months_used.to_string());
    line("Dropped months", "value", &|fm| fm.dropped.len().to_string());
    write!(out, "error,message").unwrap();
    for r in results {
        match &r.fama_macbeth {
            Ok(_) => out.push(','),
            Err(e) => write!(out, ",\"{}\"", e.to_string().replace('"', "'")).unwrap(),
        }
    }
    out.push('\n');
    out
}

/// `(model, metric, value)` rows for comparing the Q5-Q1 spread across
/// methods. `None` for fewer than two methods.
pub fn plot_data_csv(results: &[MethodBacktest]) -> Option<String> {
    if results.len() < 2 {
        return None;
    }
    let mut out = String::from("model,metric,value\n");
    for r in results {
        for model in FactorModel::ALL {
            let a = r.alphas.spread(model);
            let metric = match model {
                FactorModel::Excess => "excess_return",
                FactorModel::ThreeFactor => "ff3_alpha",
                FactorModel::FiveFactor => "five_factor_alpha",
            };
            writeln!(out, "{},{metric},{:.6}", r.label, a.alpha).unwrap();
            writeln!(out, "{},{metric}_t,{:.4}", r.label, a.t_stat).unwrap();
        }
    }
    Some(out)
}
