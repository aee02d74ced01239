//! Identifiability functionals: the ratios `ψ` and `ψ₁`, the Hellinger
//! information `Ψ`, covering and packing numbers with the entropy bounds, and
//! empirical deconvolution envelopes.

pub mod deconvolution;
pub mod entropy;
pub mod information;
pub mod ratio;

pub use deconvolution::{deconvolution_bound_probe, DeconvolutionProbe, DeconvolutionRow, PairSchedule};
pub use entropy::{
    box_covering_number, box_packing_number, covering_number, entropy_lemma_check, greedy_net, greedy_packing,
    m_statistic, CoverTarget, EntropyPart, EntropyReport,
};
pub use information::{
    hellinger_information, hellinger_information_profile, psi_lower_envelope_check, psi_supersmooth_envelope,
    EnvelopeFit, MeasureClass, PsiEstimate,
};
pub use ratio::{psi_ratio, same_measure, strong_identifiability_probe, EvalGrid, ProbeRow, PsiVariant};

use crate::numeric::fmt_sig17;

fn csv_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// `r,psi_hat,feasible,restarts`, one row per estimate. Infeasible radii
/// carry `inf`.
pub fn psi_table_csv(rows: &[PsiEstimate]) -> String {
    csv_table(
        &["r", "psi_hat", "feasible", "restarts"],
        rows.iter().map(|e| {
            vec![
                fmt_sig17(e.radius),
                fmt_sig17(e.value),
                e.feasible.to_string(),
                e.restarts.to_string(),
            ]
        }),
    )
}

/// `V,W2sq,family,schedule_id` over all probes.
pub fn deconvolution_csv(probes: &[DeconvolutionProbe]) -> String {
    csv_table(
        &["V", "W2sq", "family", "schedule_id"],
        probes.iter().flat_map(|p| {
            p.rows
                .iter()
                .map(move |r| vec![fmt_sig17(r.v), fmt_sig17(r.w2sq), p.family.to_string(), r.schedule.name().to_string()])
        }),
    )
}
