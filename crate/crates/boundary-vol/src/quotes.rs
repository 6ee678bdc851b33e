//! Order-book quote ingestion and day-wise estimation.
//!
//! Ask quotes sit above the latent efficient log-price, so the ask side maps
//! directly onto the boundary model; bid quotes are handled symmetrically by
//! negating log-prices. Quote arrival is irregular, so estimation uses the
//! event index as pseudo-time (event i at time i/n), the minimal-assumption
//! mapping into the equidistant model.

use crate::error::{Error, Result};
use crate::estimator::{estimate_iv, EstimatorConfig, IVEstimate, ModelKind, TauMode};
use crate::observe::{BinnedObservations, RegressionObservations};
use crate::psi::PsiTable;
use serde::{Deserialize, Serialize};
use std::io::Read;

/// Column mapping and scaling for quote CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuoteSchema {
    pub time_col: String,
    pub ask_col: String,
    pub bid_col: String,
    /// Raw price units per currency unit (LOBSTER uses 10^4).
    pub price_scale: f64,
}

impl Default for QuoteSchema {
    fn default() -> Self {
        QuoteSchema {
            time_col: "time".into(),
            ask_col: "ask_price".into(),
            bid_col: "bid_price".into(),
            price_scale: 1.0,
        }
    }
}

/// One trading day of best ask/bid quotes, log-transformed, with time
/// rescaled affinely to [0, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuoteSeries {
    pub day_id: String,
    /// Strictly increasing; ties in raw timestamps are spread evenly inside
    /// the tie interval, preserving arrival order.
    pub timestamps: Vec<f64>,
    /// Log ask prices.
    pub best_ask: Vec<f64>,
    /// Log bid prices.
    pub best_bid: Vec<f64>,
    /// Count of ask-side quote changes.
    pub n_ask: u64,
    /// Count of bid-side quote changes.
    pub n_bid: u64,
    /// Rows dropped as exact consecutive duplicates.
    pub deduplicated: u64,
    /// Rows dropped because ask < bid.
    pub crossed_excluded: u64,
    pub raw_rows: u64,
}

/// Side of the book.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Ask,
    Bid,
}

/// Parses a quote CSV into a [`QuoteSeries`].
pub fn ingest_quotes_csv<R: Read>(
    reader: R,
    day_id: &str,
    schema: &QuoteSchema,
) -> Result<QuoteSeries> {
    if !(schema.price_scale > 0.0) {
        return Err(Error::config("price scale must be positive"));
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("missing column '{name}'")))
    };
    let (ti, ai, bi) = (
        col(&schema.time_col)?,
        col(&schema.ask_col)?,
        col(&schema.bid_col)?,
    );

    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    let mut crossed = 0u64;
    let mut raw_rows = 0u64;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        raw_rows += 1;
        let parse = |idx: usize, what: &str| -> Result<f64> {
            rec.get(idx)
                .ok_or_else(|| Error::data(format!("row {}: missing {what}", line + 2)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::data(format!("row {}: bad {what}: {e}", line + 2)))
        };
        let t = parse(ti, "time")?;
        let ask = parse(ai, "ask price")? / schema.price_scale;
        let bid = parse(bi, "bid price")? / schema.price_scale;
        if !(ask > 0.0) || !(bid > 0.0) {
            return Err(Error::data(format!(
                "row {}: non-positive price (ask {ask}, bid {bid})",
                line + 2
            )));
        }
        if let Some(&(prev_t, _, _)) = rows.last() {
            if t < prev_t {
                return Err(Error::data(format!(
                    "row {}: time decreases ({t} after {prev_t})",
                    line + 2
                )));
            }
        }
        if ask < bid {
            crossed += 1;
            continue;
        }
        rows.push((t, ask, bid));
    }
    if rows.is_empty() {
        return Err(Error::data("no usable quote rows"));
    }

    // Drop exact consecutive duplicates.
    let mut dedup: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
    let mut deduplicated = 0u64;
    for r in rows {
        if let Some(&(_, pa, pb)) = dedup.last() {
            if pa == r.1 && pb == r.2 {
                deduplicated += 1;
                continue;
            }
        }
        dedup.push(r);
    }

    let t0 = dedup[0].0;
    let t1 = dedup.last().unwrap().0;
    let span = if t1 > t0 { t1 - t0 } else { 1.0 };

    // Affine rescale; spread raw-timestamp ties evenly towards the next
    // distinct time so the series stays strictly increasing.
    let n = dedup.len();
    let mut timestamps = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && dedup[j].0 == dedup[i].0 {
            j += 1;
        }
        let base = (dedup[i].0 - t0) / span;
        let next = if j < n {
            (dedup[j].0 - t0) / span
        } else {
            base + (1.0 - base).max(1e-12)
        };
        let count = (j - i) as f64;
        for (offset, stamp) in timestamps[i..j].iter_mut().enumerate() {
            *stamp = base + (next - base) * offset as f64 / count;
        }
        i = j;
    }

    let best_ask: Vec<f64> = dedup.iter().map(|r| r.1.ln()).collect();
    let best_bid: Vec<f64> = dedup.iter().map(|r| r.2.ln()).collect();
    let n_ask = 1 + best_ask.windows(2).filter(|w| w[1] != w[0]).count() as u64;
    let n_bid = 1 + best_bid.windows(2).filter(|w| w[1] != w[0]).count() as u64;

    Ok(QuoteSeries {
        day_id: day_id.to_string(),
        timestamps,
        best_ask,
        best_bid,
        n_ask,
        n_bid,
        deduplicated,
        crossed_excluded: crossed,
        raw_rows,
    })
}

impl QuoteSeries {
    /// The estimation series for one side: ask log-prices at ask-change
    /// events, or negated bid log-prices at bid-change events (negation maps
    /// the bid side onto the boundary-from-below model).
    pub fn side_series(&self, side: Side) -> Vec<f64> {
        let (values, sign): (&[f64], f64) = match side {
            Side::Ask => (&self.best_ask, 1.0),
            Side::Bid => (&self.best_bid, -1.0),
        };
        let mut out = Vec::with_capacity(values.len());
        for (i, &v) in values.iter().enumerate() {
            if i == 0 || v != values[i - 1] {
                out.push(sign * v);
            }
        }
        out
    }
}

/// Minimum number of side events accepted for estimation.
pub const MIN_DAY_EVENTS: usize = 1000;

/// Day-wise integrated-volatility estimation for one side of the book.
///
/// The side series is mapped to event-index pseudo-time, the tail is
/// truncated to a whole number of bins, bin minima are extracted and the
/// blockwise estimator applied with the given moment table.
pub fn estimate_day(
    quotes: &QuoteSeries,
    side: Side,
    k: f64,
    kappa: f64,
    lambda: f64,
    tau: TauMode,
    table: &PsiTable,
) -> Result<IVEstimate> {
    let series = quotes.side_series(side);
    if series.len() < MIN_DAY_EVENTS {
        return Err(Error::data(format!(
            "side has {} events, need >= {MIN_DAY_EVENTS}",
            series.len()
        )));
    }
    let n = (series.len() - 1) as u64;
    let cfg = EstimatorConfig::resolve(n, lambda, k, kappa, ModelKind::Regression, tau)?;
    let h_inv = cfg.grids.h_inv as usize;
    let usable = (n as usize / h_inv) * h_inv;
    let obs = RegressionObservations {
        y_values: series[..usable + 1].to_vec(),
        noise_family: "empirical".into(),
        noise_rate: lambda,
    };
    let minima = obs.extract_bin_minima(h_inv)?;
    estimate_iv(&minima, &cfg, table)
}

/// Day-level result for both sides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DayResult {
    pub day_id: String,
    pub n_ask: u64,
    pub n_bid: u64,
    pub ask: IVEstimate,
    pub bid: IVEstimate,
}

/// Full run report: reproducible from inputs, configuration and seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub days: Vec<DayResult>,
    pub k: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub tau: String,
    pub seed: u64,
    pub emitted_files: Vec<String>,
}
