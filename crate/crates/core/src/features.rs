//! Row/column log-sum features.
//!
//! Channels 1..=5 are `ln(sum_j o[k][j])` for rows, channels 6..=10 are
//! `ln(sum_i o[i][k-5])` for columns. Sums are floored at `epsilon` before
//! the logarithm so dark rows stay finite.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::taxel::TaxelMatrix;
use crate::{Error, Result, CHANNELS, GRID};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub epsilon: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { epsilon: 1e-6 }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config("feature epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// `f[0..5]` rows, `f[5..10]` columns.
    pub f: [f64; CHANNELS],
    pub frame_index: usize,
}

impl FeatureVector {
    pub fn rows(&self) -> &[f64] {
        &self.f[..GRID]
    }

    pub fn cols(&self) -> &[f64] {
        &self.f[GRID..]
    }
}

pub fn features_from_taxels(o: &TaxelMatrix, cfg: &FeatureConfig) -> FeatureVector {
    let mut row_sums = [0.0; GRID];
    let mut col_sums = [0.0; GRID];
    for (i, row) in o.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            row_sums[i] += v;
            col_sums[j] += v;
        }
    }
    let mut f = [0.0; CHANNELS];
    for k in 0..GRID {
        f[k] = row_sums[k].max(cfg.epsilon).ln();
        f[GRID + k] = col_sums[k].max(cfg.epsilon).ln();
    }
    FeatureVector {
        f,
        frame_index: o.frame_index,
    }
}

pub fn features_stream<'a, I>(frames: I, cfg: &FeatureConfig) -> Vec<FeatureVector>
where
    I: IntoIterator<Item = &'a TaxelMatrix>,
{
    frames
        .into_iter()
        .map(|o| features_from_taxels(o, cfg))
        .collect()
}

/// CSV with header `frame_index,f1,...,f10`.
pub fn write_features_csv<W: Write>(w: W, stream: &[FeatureVector]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["frame_index".to_string()];
    header.extend((1..=CHANNELS).map(|k| format!("f{k}")));
    wr.write_record(&header)?;
    for fv in stream {
        let mut rec = vec![fv.frame_index.to_string()];
        rec.extend(fv.f.iter().map(|v| v.to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_features_csv<R: Read>(r: R) -> Result<Vec<FeatureVector>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != CHANNELS + 1 {
            return Err(Error::Parse(format!(
                "feature row has {} fields, expected {}",
                rec.len(),
                CHANNELS + 1
            )));
        }
        let frame_index = rec[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad frame index {:?}", &rec[0])))?;
        let mut f = [0.0; CHANNELS];
        for (k, slot) in f.iter_mut().enumerate() {
            *slot = rec[k + 1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad feature value {:?}", &rec[k + 1])))?;
        }
        out.push(FeatureVector { f, frame_index });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN_EPS: f64 = -13.815510557964274;

    fn uniform(v: f64) -> TaxelMatrix {
        TaxelMatrix {
            values: [[v; GRID]; GRID],
            frame_index: 3,
        }
    }

    #[test]
    fn unit_sums_give_zero() {
        let fv = features_from_taxels(&uniform(0.2), &FeatureConfig::default());
        for v in fv.f {
            assert!(v.abs() < 1e-15, "{v}");
        }
        assert_eq!(fv.frame_index, 3);
    }

    #[test]
    fn dark_frame_hits_floor() {
        let fv = features_from_taxels(&uniform(0.0), &FeatureConfig::default());
        assert!(fv.f.iter().all(|&v| v == 1e-6f64.ln()));
        assert!((fv.f[0] - LN_EPS).abs() < 1e-12);
    }

    #[test]
    fn single_lit_taxel() {
        let mut o = uniform(0.0);
        o.values[0][0] = 0.5;
        let fv = features_from_taxels(&o, &FeatureConfig::default());
        assert!((fv.f[0] - (-std::f64::consts::LN_2)).abs() < 1e-15);
        assert!((fv.f[5] - (-std::f64::consts::LN_2)).abs() < 1e-15);
        for k in [1, 2, 3, 4, 6, 7, 8, 9] {
            assert!((fv.f[k] - LN_EPS).abs() < 1e-12);
        }
    }

    #[test]
    fn stream_preserves_order() {
        let cfg = FeatureConfig::default();
        assert!(features_stream(&[], &cfg).is_empty());
        let frames: Vec<_> = (0..4)
            .map(|t| {
                let mut o = uniform(0.1);
                o.frame_index = t;
                o.values[1][1] = t as f64 / 4.0;
                o
            })
            .collect();
        let s = features_stream(&frames, &cfg);
        assert_eq!(s.len(), 4);
        for (t, fv) in s.iter().enumerate() {
            assert_eq!(fv.frame_index, t);
            assert_eq!(*fv, features_from_taxels(&frames[t], &cfg));
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut o = uniform(0.07);
        o.values[2][4] = 0.9;
        let s = vec![features_from_taxels(&o, &FeatureConfig::default())];
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &s).unwrap();
        assert!(buf.starts_with(b"frame_index,f1,f2,f3,f4,f5,f6,f7,f8,f9,f10\n"));
        assert_eq!(read_features_csv(&buf[..]).unwrap(), s);
    }

    fn matrix() -> impl Strategy<Value = TaxelMatrix> {
        proptest::array::uniform5(proptest::array::uniform5(0.0f64..=1.0)).prop_map(|values| {
            TaxelMatrix {
                values,
                frame_index: 0,
            }
        })
    }

    proptest! {
        #[test]
        fn bounded(o in matrix()) {
            let fv = features_from_taxels(&o, &FeatureConfig::default());
            for v in fv.f {
                prop_assert!(v >= LN_EPS - 1e-12 && v <= 5f64.ln() + 1e-12);
            }
        }

        #[test]
        fn transpose_swaps_halves(o in matrix()) {
            let cfg = FeatureConfig::default();
            let a = features_from_taxels(&o, &cfg);
            let b = features_from_taxels(&o.transpose(), &cfg);
            prop_assert_eq!(&a.f[..5], &b.f[5..]);
            prop_assert_eq!(&a.f[5..], &b.f[..5]);
        }

        #[test]
        fn monotone_in_each_taxel(o in matrix(), i in 0usize..5, j in 0usize..5, bump in 0.0f64..1.0) {
            let cfg = FeatureConfig::default();
            let mut up = o;
            up.values[i][j] = (o.values[i][j] + bump).min(1.0);
            let a = features_from_taxels(&o, &cfg);
            let b = features_from_taxels(&up, &cfg);
            prop_assert!(b.f[i] >= a.f[i]);
            prop_assert!(b.f[5 + j] >= a.f[5 + j]);
            for k in 0..CHANNELS {
                if k != i && k != 5 + j {
                    prop_assert_eq!(a.f[k], b.f[k]);
                }
            }
        }

        #[test]
        fn row_permutation_keeps_row_features(o in matrix(), row in 0usize..5, shift in 1usize..5) {
            let cfg = FeatureConfig::default();
            let mut p = o;
            p.values[row].rotate_left(shift);
            let a = features_from_taxels(&o, &cfg);
            let b = features_from_taxels(&p, &cfg);
            for k in 0..GRID {
                prop_assert!((a.f[k] - b.f[k]).abs() < 1e-12);
            }
            // column contributions only move around; their total is unchanged
            let sa: f64 = a.f[5..].iter().map(|v| v.exp()).sum();
            let sb: f64 = b.f[5..].iter().map(|v| v.exp()).sum();
            prop_assert!((sa - sb).abs() < 1e-5);
        }
    }
}
