//! Norm identifiers, the norm pair certified by a (loss, regularizer) combination,
//! and operator norms of example blocks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::ExampleBlock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Norm {
    /// Absolute value on the real line.
    Abs,
    L1,
    L2,
    Linf,
}

impl Norm {
    pub fn dual(self) -> Norm {
        match self {
            Norm::Abs => Norm::Abs,
            Norm::L1 => Norm::Linf,
            Norm::Linf => Norm::L1,
            Norm::L2 => Norm::L2,
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Norm::Abs | Norm::L1 => x.iter().map(|v| v.abs()).sum(),
            Norm::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::Linf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// The norms used by the solver: the loss-side primal norm and its dual (for
/// dual vectors `alpha_i`), plus the dual norm on `R^d` in which `g*` is 1-smooth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormPair {
    primal: Norm,
    dual: Norm,
    weight_dual: Norm,
}

impl NormPair {
    pub fn new(primal: Norm, dual: Norm, weight_dual: Norm) -> Result<Self> {
        if primal.dual() != dual {
            return Err(Error::invalid(format!(
                "{dual:?} is not the dual norm of {primal:?}"
            )));
        }
        Ok(NormPair {
            primal,
            dual,
            weight_dual,
        })
    }

    /// Pair determined by the dual norm on `R^k` and the dual norm on `R^d`.
    pub fn from_duals(dual: Norm, weight_dual: Norm) -> Self {
        NormPair {
            primal: dual.dual(),
            dual,
            weight_dual,
        }
    }

    pub fn primal(&self) -> Norm {
        self.primal
    }

    pub fn dual(&self) -> Norm {
        self.dual
    }

    pub fn weight_dual(&self) -> Norm {
        self.weight_dual
    }
}

/// `sup_u ||X u||_{D'} / ||u||_D` for the supported pairs.
pub fn op_norm(block: &ExampleBlock, norms: &NormPair) -> Result<f64> {
    match (norms.dual(), norms.weight_dual()) {
        (Norm::Abs, Norm::L2) if block.arity() == 1 => Ok(block.column(0).norm2()),
        (Norm::Abs, Norm::Linf) if block.arity() == 1 => Ok(block.column(0).norm_inf()),
        // Extreme points of the l1 ball are the signed unit vectors.
        (Norm::L1, Norm::L2) => Ok(block
            .columns()
            .iter()
            .map(|c| c.norm2())
            .fold(0.0, f64::max)),
        (dual, weight_dual) => Err(Error::UnsupportedNormPair { dual, weight_dual }),
    }
}
