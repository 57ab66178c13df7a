//! Compiled gadget circuits for every site and jump of a Lindbladian.

use serde::Serialize;

use crate::dissipator::TruncatedLindbladian;
use crate::error::{Error, Result};
use crate::gadget;

use super::optimize::{compile_gadget, AdamConfig};
use super::template::{Circuit, TemplateShape};

/// Circuits realizing the gadget unitary of each `(site, α)`. Circuit qubit 0
/// is the ancilla; qubit `j ≥ 1` acts on lattice site `supports[a][j - 1]`.
#[derive(Clone, Debug, Serialize)]
pub struct CompiledGadgets {
    pub n_sites: usize,
    pub supports: Vec<Vec<usize>>,
    pub circuits: Vec<Vec<Circuit>>,
    /// Final loss of each distinct compiled target.
    pub losses: Vec<f64>,
}

/// Compiles the gadgets `exp(-i O √time)` of every site with an `m`-module
/// ladder template. Translation-linked Lindbladians compile site 0 only and
/// reuse its circuits on the translated supports.
pub fn compile_site_gadgets(lind: &TruncatedLindbladian, time: f64, modules: usize, cfg: &AdamConfig, seed: u64) -> Result<CompiledGadgets> {
    let n = lind.n_sites();
    let lattice = lind.hamiltonian.lattice();
    let compile_site = |a: usize, stream: u64| -> Result<(Vec<Circuit>, Vec<f64>)> {
        let gens = lind.site_generators(a);
        let support = gens[0].support.sites();
        let shape = TemplateShape::ladder(lattice, support, a, modules)?;
        let mut circuits = Vec::new();
        let mut losses = Vec::new();
        for (alpha, g) in gens.iter().enumerate() {
            let target = gadget::gadget_unitary(&g.l, &g.g, time)?;
            let res = compile_gadget(&target, &shape, cfg, seed.wrapping_add(3 * stream + alpha as u64))?;
            log::info!("site {a}, α {alpha}, m = {modules}: loss {:.3e}", res.best_loss());
            losses.push(res.best_loss());
            circuits.push(shape.circuit(&res.best.params)?);
        }
        Ok((circuits, losses))
    };
    let mut supports = Vec::with_capacity(n);
    let mut circuits = Vec::with_capacity(n);
    let mut losses = Vec::new();
    if lind.is_translation_linked() {
        let (reference, l) = compile_site(0, 0)?;
        losses.extend(l);
        for a in 0..n {
            let g = &lind.site_generators(a)[0];
            supports.push(match &g.link {
                Some(link) => link.ordered_support.clone(),
                None if a == 0 => g.support.sites().to_vec(),
                None => return Err(Error::InvalidParameter(format!("site {a} lacks a translation link"))),
            });
            circuits.push(reference.clone());
        }
    } else {
        for a in 0..n {
            let (c, l) = compile_site(a, a as u64)?;
            losses.extend(l);
            supports.push(lind.site_generators(a)[0].support.sites().to_vec());
            circuits.push(c);
        }
    }
    Ok(CompiledGadgets { n_sites: n, supports, circuits, losses })
}
