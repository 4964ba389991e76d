use std::fmt::Write;

use super::ComplementaritySystem;

/// Deterministic text rendering of the variable catalog and the Jacobian,
/// meant for diffing two assemblies.
pub fn dump_system(sys: &ComplementaritySystem) -> String {
    let mut out = String::new();
    let idx = &sys.index;
    let _ = writeln!(
        out,
        "# system n_tech={} horizon={} scenarios={} dim={} nnz={} units={} transcription={:?}",
        idx.n_tech(),
        idx.horizon(),
        idx.n_scenarios(),
        sys.len(),
        sys.jacobian.nnz(),
        sys.units(),
        sys.options.transcription,
    );
    let _ = writeln!(out, "# variables: position kind name role constant weight scale");
    for (j, var) in idx.iter().enumerate() {
        let _ = writeln!(
            out,
            "{j} {:?} {var} {} {:e} {:e} {:e}",
            sys.kinds[j],
            var.row_role(),
            sys.constant[j],
            sys.row_weight[j],
            sys.var_scale[j],
        );
    }
    let _ = writeln!(out, "# jacobian: row col value");
    for (r, c, v) in sys.jacobian.triplets() {
        let _ = writeln!(out, "{r} {c} {v:e}");
    }
    out
}
