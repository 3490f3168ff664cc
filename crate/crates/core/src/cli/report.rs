//! CSV output. Floats carry 9 significant digits, lines end in LF.

use std::io::Write;

use crate::error::{Error, Result};
use crate::measurements::LinkKind;
use crate::recovery::Estimator;
use crate::textio::fmt_sig;

pub const RESULT_HEADER: [&str; 16] = [
    "seed",
    "method",
    "link",
    "n",
    "m",
    "sigma",
    "C_s",
    "C_s_prime",
    "N_inv",
    "N_samp",
    "t_star",
    "nfe",
    "cosine",
    "rel_l2",
    "psnr",
    "wall_ms",
];

/// One estimator run on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub seed: u64,
    pub method: Estimator,
    pub link: LinkKind,
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    pub c_s: f64,
    pub c_s_prime: f64,
    pub n_inv: usize,
    pub n_samp: usize,
    pub t_star: f64,
    pub nfe: usize,
    pub cosine: f64,
    pub rel_l2: f64,
    pub psnr: f64,
    pub wall_ms: f64,
}

pub(crate) fn g9(x: f64) -> String {
    fmt_sig(x, 9)
}

impl ResultRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.method.name().to_string(),
            self.link.name().to_string(),
            self.n.to_string(),
            self.m.to_string(),
            g9(self.sigma),
            g9(self.c_s),
            g9(self.c_s_prime),
            self.n_inv.to_string(),
            self.n_samp.to_string(),
            g9(self.t_star),
            self.nfe.to_string(),
            g9(self.cosine),
            g9(self.rel_l2),
            g9(self.psnr),
            g9(self.wall_ms),
        ]
    }
}

/// Writes a header and rows as CSV.
pub fn write_csv<W: Write, S: AsRef<str>>(out: W, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref())).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows.iter().map(ResultRow::fields).collect();
    write_csv(out, &RESULT_HEADER, &body)
}
