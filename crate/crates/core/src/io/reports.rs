// Copyright 2026 The dncbm Authors.
// SPDX-License-Identifier: Apache-2.0

//! CSV renderings of results. Floats use the shortest representation that
//! round-trips, except alignments, which are fixed at six decimals.

use crate::cbm::{Explanation, GlobalExplanation};
use crate::error::{Error, Result};
use crate::eval::ClusterReport;
use crate::naming::NamedConceptSpace;
use crate::sae::SaeLossReport;

fn render<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.into_inner()
        .map_err(|e| Error::invalid(format!("csv: {}", e.error())))
}

/// `concept_index,name,alignment`.
pub fn names_csv(space: &NamedConceptSpace) -> Result<Vec<u8>> {
    render(
        &["concept_index", "name", "alignment"],
        space
            .concepts
            .iter()
            .enumerate()
            .map(|(i, c)| [i.to_string(), c.name.clone(), format!("{:.6}", c.alignment)]),
    )
}

/// `sample_id,rank,concept_index,name,contribution`; ranks start at 1.
pub fn explanations_csv(explanations: &[(usize, Explanation)]) -> Result<Vec<u8>> {
    render(
        &["sample_id", "rank", "concept_index", "name", "contribution"],
        explanations.iter().flat_map(|(id, e)| {
            e.entries.iter().enumerate().map(move |(r, c)| {
                [
                    id.to_string(),
                    (r + 1).to_string(),
                    c.concept.to_string(),
                    c.name.clone(),
                    c.contribution.to_string(),
                ]
            })
        }),
    )
}

/// `class,rank,concept_index,name,mean_contribution`.
pub fn global_explanation_csv(explanations: &[GlobalExplanation]) -> Result<Vec<u8>> {
    render(
        &[
            "class",
            "rank",
            "concept_index",
            "name",
            "mean_contribution",
        ],
        explanations.iter().flat_map(|g| {
            g.entries.iter().enumerate().map(move |(r, c)| {
                [
                    g.class.to_string(),
                    (r + 1).to_string(),
                    c.concept.to_string(),
                    c.name.clone(),
                    c.contribution.to_string(),
                ]
            })
        }),
    )
}

/// `cluster,size,rank,concept_index,name,strength`.
pub fn cluster_csv(report: &ClusterReport) -> Result<Vec<u8>> {
    render(
        &[
            "cluster",
            "size",
            "rank",
            "concept_index",
            "name",
            "strength",
        ],
        report.top_concepts.iter().enumerate().flat_map(|(k, top)| {
            let size = report.members[k].len();
            top.iter().enumerate().map(move |(r, c)| {
                [
                    k.to_string(),
                    size.to_string(),
                    (r + 1).to_string(),
                    c.concept.to_string(),
                    c.name.clone(),
                    c.strength.to_string(),
                ]
            })
        }),
    )
}

/// `epoch,recon_l2,sparsity_l1,total,mean_active`; epochs start at 1.
pub fn sae_history_csv(history: &[SaeLossReport]) -> Result<Vec<u8>> {
    render(
        &["epoch", "recon_l2", "sparsity_l1", "total", "mean_active"],
        history.iter().enumerate().map(|(i, r)| {
            [
                (i + 1).to_string(),
                r.recon_l2.to_string(),
                r.sparsity_l1.to_string(),
                r.total.to_string(),
                r.mean_active.to_string(),
            ]
        }),
    )
}
