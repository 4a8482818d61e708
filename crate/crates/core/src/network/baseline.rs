//! Stand-in baseline model: a single fused feed-forward classifier over
//! the concatenated modality features. No contrastive pretraining, no
//! noise augmentation; used as the second voice in pseudo-label
//! intersection.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Dims, FeatureRecord, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::network::tape::{NodeId, Tape};
use crate::network::{init_tensor_for, softmax_rows, ParamSet, TapeParams};
use crate::seeds::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub d_in: Dims,
    pub hidden: usize,
    pub init_seed: u64,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_in.v == 0 || self.d_in.a == 0 || self.d_in.t == 0 || self.hidden == 0 {
            return Err(Error::config("baseline: dims and hidden width must be >= 1"));
        }
        Ok(())
    }

    fn d_total(&self) -> usize {
        self.d_in.v + self.d_in.a + self.d_in.t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub cfg: BaselineConfig,
    pub params: ParamSet,
}

impl BaselineModel {
    pub fn init(cfg: BaselineConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_from(cfg.init_seed);
        let mut params = ParamSet::new();
        for (name, shape) in [
            ("fc1.w", (cfg.d_total(), cfg.hidden)),
            ("fc1.b", (1, cfg.hidden)),
            ("fc2.w", (cfg.hidden, CLASS_COUNT)),
            ("fc2.b", (1, CLASS_COUNT)),
        ] {
            params.push(name, init_tensor_for(name, shape, &mut rng));
        }
        Ok(BaselineModel { cfg, params })
    }

    /// Concatenated (v | a | t) feature matrix for a batch.
    pub fn fused_matrix(records: &[&FeatureRecord]) -> Array2<f64> {
        let rows = records.len();
        let cols = records
            .first()
            .map(|r| r.visual.len() + r.acoustic.len() + r.text.len())
            .unwrap_or(0);
        Array2::from_shape_fn((rows, cols), |(r, c)| {
            let record = records[r];
            let (dv, da) = (record.visual.len(), record.acoustic.len());
            if c < dv {
                record.visual[c] as f64
            } else if c < dv + da {
                record.acoustic[c - dv] as f64
            } else {
                record.text[c - dv - da] as f64
            }
        })
    }

    /// Forward to the single head's logits.
    pub fn forward_batch(&self, tape: &mut Tape, p: &TapeParams, x: NodeId) -> NodeId {
        let h = tape.matmul(x, p.ids[0]);
        let h = tape.add_bias(h, p.ids[1]);
        let h = tape.tanh(h);
        let out = tape.matmul(h, p.ids[2]);
        tape.add_bias(out, p.ids[3])
    }

    fn check_records(&self, records: &[&FeatureRecord]) -> Result<()> {
        for record in records {
            if record.dims() != self.cfg.d_in {
                return Err(Error::contract(format!(
                    "baseline forward: record `{}` dims {:?} do not match config {:?}",
                    record.id,
                    record.dims(),
                    self.cfg.d_in
                )));
            }
        }
        Ok(())
    }

    /// Eval-mode softmax probabilities, chunked.
    pub fn eval_probs(&self, records: &[&FeatureRecord]) -> Result<Array2<f64>> {
        const CHUNK: usize = 512;
        self.check_records(records)?;
        let mut out = Array2::zeros((records.len(), CLASS_COUNT));
        let mut offset = 0;
        for chunk in records.chunks(CHUNK) {
            let x = Self::fused_matrix(chunk);
            let mut tape = Tape::new();
            let p = self.params.insert_into(&mut tape, false);
            let x = tape.leaf(x, false);
            let logits = self.forward_batch(&mut tape, &p, x);
            out.slice_mut(ndarray::s![offset..offset + chunk.len(), ..])
                .assign(&softmax_rows(tape.value(logits)));
            offset += chunk.len();
        }
        Ok(out)
    }
}
