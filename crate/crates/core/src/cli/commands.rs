use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::config::{BuiltGraph, Config, ConfigError, DimsParams, EnergyGrid, GraphSpec};
use super::output::{Artifacts, Cell, PlotData, Table};
use crate::graph::{beta_coefficient, build_sht, tree_dimension, RadialCoefficients, StarLikeGraph, VertexId};
use crate::halfline::{certify_subordinate, subordinacy_curve, subordinate_direction, SUBORDINACY_THRESHOLD};
use crate::operator::{assemble_truncated, moment, FinVector, TruncationSpec, DEFAULT_DIMENSION_CAP};
use crate::sharpness::{
    check_invariance, degeneracy_experiment, intertwining_residual, sector_project, SharpnessModel,
    SHARPNESS_DENSE_CAP,
};
use crate::spectral::{
    p_matrix, resolvent_k, subordinate_space_dim, summarize, SpectralSample, DEFAULT_M_TOL, DEFAULT_RANK_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Spectrum,
    Resolvent,
    Multiplicity,
    Subordinacy,
    Sharpness,
    Dims,
    Paths,
    Tree,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Resolvent => "resolvent",
            Command::Multiplicity => "multiplicity",
            Command::Subordinacy => "subordinacy",
            Command::Sharpness => "sharpness",
            Command::Dims => "dims",
            Command::Paths => "paths",
            Command::Tree => "tree",
        }
    }
}

/// Failure of a command run.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numeric(crate::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Numeric(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<crate::Error> for RunError {
    fn from(e: crate::Error) -> Self {
        RunError::Numeric(e)
    }
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, RunError> {
    s.as_ref().ok_or_else(|| RunError::Config(ConfigError(format!("{name}: missing [{name}] section"))))
}

fn status<T>(r: &crate::Result<T>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("error: {e}"),
    }
}

fn energies(grid: &EnergyGrid, g: &StarLikeGraph) -> Result<Vec<f64>, RunError> {
    Ok(match grid {
        EnergyGrid::Uniform { from, to, count } => {
            super::config::Linspace { from: *from, to: *to, count: *count }.points()
        }
        EnergyGrid::List { values } => values.clone(),
        EnergyGrid::Measure(m) => m.build(g)?,
    })
}

pub fn run(cmd: Command, config: &Config, spec: &GraphSpec, built: &BuiltGraph) -> Result<Artifacts, RunError> {
    let g = built.graph();
    match cmd {
        Command::Spectrum => spectrum(config, g),
        Command::Resolvent => resolvent(config, g),
        Command::Multiplicity => multiplicity(config, g),
        Command::Subordinacy => subordinacy(config, g),
        Command::Sharpness => match built {
            BuiltGraph::Sharpness(model) => sharpness(config, model),
            BuiltGraph::Plain(_) => {
                Err(ConfigError("graph.kind: the sharpness command needs kind = \"sharpness\"".into()).into())
            }
        },
        Command::Dims => dims(section(&config.dims, "dims")?, g),
        Command::Paths => paths(config, g),
        Command::Tree => tree(config, spec),
    }
}

/// Eigenvalues of the truncation, clustered.
///
/// Columns: `index,eigenvalue,cluster,cluster_size`.
fn spectrum(config: &Config, g: &StarLikeGraph) -> Result<Artifacts, RunError> {
    let p = section(&config.spectrum, "spectrum")?;
    p.validate()?;
    let op = assemble_truncated(g, TruncationSpec { depth: p.depth }, DEFAULT_DIMENSION_CAP)?;
    let dim = op.matrix.dim();
    if dim > SHARPNESS_DENSE_CAP {
        return Err(crate::Error::DenseCapExceeded { dim, cap: SHARPNESS_DENSE_CAP }.into());
    }
    let mut eig: Vec<f64> = op.matrix.to_dense().symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let tol = p.cluster_tol.unwrap_or(1e-8 * g.norm_bound());
    let mut ids = Vec::with_capacity(dim);
    for (i, e) in eig.iter().enumerate() {
        let next = match ids.last() {
            Some(&c) if e - eig[i - 1] <= tol => c,
            Some(&c) => c + 1,
            None => 0,
        };
        ids.push(next);
    }
    let mut sizes = vec![0usize; ids.last().map_or(0, |c| c + 1)];
    for &c in &ids {
        sizes[c] += 1;
    }
    let mut table = Table::new(vec!["index", "eigenvalue", "cluster", "cluster_size"]);
    let mut plot = PlotData::default();
    for (i, (&e, &c)) in eig.iter().zip(&ids).enumerate() {
        table.push(vec![i.into(), e.into(), c.into(), sizes[c].into()]);
        plot.push(i as f64, e, "eigenvalue");
    }
    let summary = json!({ "dim": dim, "depth": p.depth, "cluster_tol": tol, "clusters": sizes.len() });
    Ok(Artifacts { name: "spectrum", table, plot, summary: Some(summary) })
}

/// Entries of the compact resolvent over a grid of `z = E + i eps`.
///
/// Columns: `energy,eps,u,v,re,im,status`.
fn resolvent(config: &Config, g: &StarLikeGraph) -> Result<Artifacts, RunError> {
    let p = section(&config.resolvent, "resolvent")?;
    p.validate()?;
    let tol = p.tol.unwrap_or(DEFAULT_M_TOL);
    let zs: Vec<(f64, f64)> =
        p.eps.iter().flat_map(|&eps| p.energies.points().into_iter().map(move |e| (e, eps))).collect();
    let results: Vec<_> = zs.par_iter().map(|&(e, eps)| resolvent_k(g, Complex64::new(e, eps), tol)).collect();
    let mut table = Table::new(vec!["energy", "eps", "u", "v", "re", "im", "status"]);
    let mut plot = PlotData::default();
    for (&(e, eps), r) in zs.iter().zip(&results) {
        match r {
            Ok(m) => {
                for u in 0..m.dim() {
                    for v in 0..m.dim() {
                        let x = m.get(u, v);
                        table.push(vec![e.into(), eps.into(), u.into(), v.into(), x.re.into(), x.im.into(), "ok".into()]);
                    }
                }
                plot.push(e, m.trace_m.im, &format!("im_trace_eps={}", super::output::fmt_float(eps)));
            }
            Err(_) => table.push(vec![
                e.into(),
                eps.into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                status(r).into(),
            ]),
        }
    }
    Ok(Artifacts { name: "resolvent", table, plot, summary: None })
}

/// One `SpectralSample` per energy.
///
/// Columns: `energy,converged,singular,rank,subordinate_dim,eps_min,im_trace,eps_bound,singular_values,note`.
/// `singular_values` is `;`-separated, descending.
fn multiplicity(config: &Config, g: &StarLikeGraph) -> Result<Artifacts, RunError> {
    let p = section(&config.multiplicity, "multiplicity")?;
    let schedule = p.validate()?;
    let grid = energies(&p.grid, g)?;
    let rank_tol = p.rank_tol.unwrap_or(DEFAULT_RANK_TOL);
    let results: Vec<crate::Result<SpectralSample>> =
        grid.par_iter().map(|&e| p_matrix(g, e, &schedule, rank_tol)).collect();
    let dims: Vec<Option<crate::Result<usize>>> = grid
        .par_iter()
        .zip(&results)
        .map(|(&e, r)| match (p.dims, r) {
            (Some(d), Ok(_)) => Some(subordinate_space_dim(g, e, d.l, d.tol)),
            _ => None,
        })
        .collect();
    let mut table = Table::new(vec![
        "energy",
        "converged",
        "singular",
        "rank",
        "subordinate_dim",
        "eps_min",
        "im_trace",
        "eps_bound",
        "singular_values",
        "note",
    ]);
    let mut plot = PlotData::default();
    let mut samples = Vec::with_capacity(grid.len());
    for ((&e, r), d) in grid.iter().zip(results).zip(&dims) {
        let s = match r {
            Ok(s) => s,
            Err(err) => {
                let mut row = vec![e.into()];
                row.extend((0..8).map(|_| Cell::Empty));
                row.push(format!("error: {err}").into());
                table.push(row);
                continue;
            }
        };
        let sv: Vec<String> = s.singular_values.iter().map(|&x| super::output::fmt_float(x)).collect();
        let (dim, note) = match d {
            Some(Ok(k)) => (Cell::from(*k), s.note.clone()),
            Some(Err(e)) => (Cell::Empty, Some(format!("subordinate_dim: {e}"))),
            None => (Cell::Empty, s.note.clone()),
        };
        let im = s.history.last().map_or(f64::NAN, |h| h.im_trace);
        table.push(vec![
            s.energy.into(),
            s.converged.into(),
            s.singular.into(),
            s.rank.into(),
            dim,
            s.eps_min.into(),
            im.into(),
            s.eps_bound.into(),
            sv.join(";").into(),
            note.into(),
        ]);
        plot.push(s.energy, s.rank as f64, "rank");
        plot.push(s.energy, im, "im_trace");
        samples.push(s);
    }
    let sum = summarize(&samples);
    let summary = json!({
        "samples": grid.len(),
        "failed": grid.len() - samples.len(),
        "counted": sum.counted,
        "modal": sum.modal,
        "max": sum.max,
        "histogram": sum.histogram.iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
        "grid": grid,
    });
    Ok(Artifacts { name: "multiplicity", table, plot, summary: Some(summary) })
}

/// Subordinacy ratio curves on one branch.
///
/// Columns: `energy,theta,l,ratio,certified`.
fn subordinacy(config: &Config, g: &StarLikeGraph) -> Result<Artifacts, RunError> {
    let p = section(&config.subordinacy, "subordinacy")?;
    p.validate(g.m())?;
    let br = g.branch(p.branch.unwrap_or(1));
    let threshold = p.threshold.unwrap_or(SUBORDINACY_THRESHOLD);
    let curves: Vec<crate::Result<(f64, Vec<(f64, f64)>)>> = p
        .energies
        .par_iter()
        .map(|&e| {
            let theta = match p.theta {
                Some(t) => t,
                None => subordinate_direction(br, e, p.l_max)?.theta,
            };
            let eta = theta + std::f64::consts::FRAC_PI_2;
            Ok((theta, subordinacy_curve(br, e, theta, eta, p.l_max, p.doublings)?))
        })
        .collect();
    let mut table = Table::new(vec!["energy", "theta", "l", "ratio", "certified", "status"]);
    let mut plot = PlotData::default();
    for (&e, c) in p.energies.iter().zip(&curves) {
        match c {
            Ok((theta, curve)) => {
                let cert = certify_subordinate(curve, threshold);
                for &(l, r) in curve {
                    table.push(vec![e.into(), (*theta).into(), l.into(), r.into(), cert.into(), "ok".into()]);
                    plot.push(l, r, &format!("E={}", super::output::fmt_float(e)));
                }
            }
            Err(err) => table.push(vec![
                e.into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                format!("error: {err}").into(),
            ]),
        }
    }
    Ok(Artifacts { name: "subordinacy", table, plot, summary: None })
}

fn random_vector(model: &SharpnessModel, rng: &mut ChaCha8Rng, depth: usize) -> crate::Result<FinVector<Complex64>> {
    let mut psi = FinVector::new();
    let draw = |rng: &mut ChaCha8Rng| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    psi.set(model.hub(), draw(rng));
    for i in 1..=model.m() {
        for j in 1..=depth {
            psi.set(model.site(i, j)?, draw(rng));
        }
    }
    Ok(psi)
}

/// Sector checks and the degeneracy experiment.
///
/// Columns: `index,energy,size,matched_index,match_distance,gap`.
fn sharpness(config: &Config, model: &SharpnessModel) -> Result<Artifacts, RunError> {
    let p = section(&config.sharpness, "sharpness")?;
    p.validate()?;
    let cluster_tol = p.cluster_tol.unwrap_or_else(|| model.default_cluster_tol());
    let report = degeneracy_experiment(model, p.depth, cluster_tol, p.match_tol.unwrap_or(1e-9))?;

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed.unwrap_or(0));
    let depth = p.vector_depth.unwrap_or(8);
    let vectors = (0..p.vectors.unwrap_or(50))
        .map(|_| random_vector(model, &mut rng, depth))
        .collect::<crate::Result<Vec<_>>>()?;
    let m = model.m();
    let mut invariance = 0.0f64;
    let mut intertwining = 0.0f64;
    let mut completeness = 0.0f64;
    for k in 0..m {
        invariance = invariance.max(check_invariance(model, k, &vectors)?);
    }
    for psi in &vectors {
        let mut sum = FinVector::new();
        for k in 0..m {
            let part = sector_project(model, k, psi)?;
            if k > 0 {
                intertwining = intertwining.max(intertwining_residual(model, k, &part)?);
            }
            sum = sum.plus(&part);
        }
        completeness = completeness.max(sum.sub(psi).norm() / psi.norm());
    }

    let mut table = Table::new(vec!["index", "energy", "size", "matched_index", "match_distance", "gap"]);
    let mut plot = PlotData::default();
    for (i, c) in report.clusters.iter().enumerate() {
        table.push(vec![
            i.into(),
            c.energy.into(),
            c.size.into(),
            c.matched_index.into(),
            c.match_distance.into(),
            c.gap.into(),
        ]);
        plot.push(c.energy, c.size as f64, "cluster_size");
    }
    for (k, d) in report.dirichlet.iter().enumerate() {
        plot.push(*d, (k + 1) as f64, "dirichlet_index");
    }
    let summary = json!({
        "m": m,
        "depth": report.depth,
        "dim": report.dim,
        "cluster_tol": report.cluster_tol,
        "match_tol": report.match_tol,
        "clusters": report.clusters.len(),
        "exact_clusters": report.exact_clusters,
        "matched_exact": report.matched_exact,
        "covered": report.covered,
        "max_match_distance": report.max_match_distance,
        "sector_vectors": vectors.len(),
        "invariance_residual": invariance,
        "intertwining_residual": intertwining,
        "completeness_residual": completeness,
    });
    Ok(Artifacts { name: "sharpness", table, plot, summary: Some(summary) })
}

/// Columns: `energy,dim,status`.
fn dims(p: &DimsParams, g: &StarLikeGraph) -> Result<Artifacts, RunError> {
    p.validate()?;
    let grid = energies(&p.grid, g)?;
    let out: Vec<_> = grid.par_iter().map(|&e| subordinate_space_dim(g, e, p.l, p.tol)).collect();
    let mut table = Table::new(vec!["energy", "dim", "status"]);
    let mut plot = PlotData::default();
    for (&e, r) in grid.iter().zip(&out) {
        let dim = r.as_ref().ok().copied();
        table.push(vec![e.into(), dim.into(), status(r).into()]);
        if let Some(d) = dim {
            plot.push(e, d as f64, "dim");
        }
    }
    Ok(Artifacts { name: "dims", table, plot, summary: None })
}

/// Path coefficients on spheres around compact sources.
///
/// Columns: `source,target,n,beta,moment`.
fn paths(config: &Config, g: &StarLikeGraph) -> Result<Artifacts, RunError> {
    let p = section(&config.paths, "paths")?;
    let sources: Vec<usize> = p.sources.clone().unwrap_or_else(|| (0..g.compact_size()).collect());
    for &s in &sources {
        if s >= g.compact_size() {
            return Err(ConfigError(format!("paths.sources: {s} is not a compact vertex")).into());
        }
    }
    let jobs: Vec<(VertexId, usize)> =
        sources.iter().flat_map(|&s| (1..=p.n_max).map(move |n| (VertexId::Compact(s), n))).collect();
    let rows: Vec<crate::Result<Vec<(VertexId, VertexId, usize, f64, f64)>>> = jobs
        .par_iter()
        .map(|&(v, n)| {
            let mut out = Vec::new();
            for w in g.ball(v, n)? {
                if g.distance(v, w)? == n {
                    out.push((v, w, n, beta_coefficient(g, v, w, n)?, moment(g, v, w, n)?));
                }
            }
            Ok(out)
        })
        .collect();
    let mut table = Table::new(vec!["source", "target", "n", "beta", "moment"]);
    let mut plot = PlotData::default();
    for r in rows {
        for (v, w, n, b, mo) in r? {
            table.push(vec![v.to_string().into(), w.to_string().into(), n.into(), b.into(), mo.into()]);
            plot.push(n as f64, b, &v.to_string());
        }
    }
    Ok(Artifacts { name: "paths", table, plot, summary: None })
}

/// Growth dimension of a spherically homogeneous tree.
///
/// Columns: `n,log_ball,dimension`.
fn tree(config: &Config, spec: &GraphSpec) -> Result<Artifacts, RunError> {
    let p = section(&config.tree, "tree")?;
    let GraphSpec::Sht { branching, coefficients } = spec else {
        return Err(ConfigError("graph.kind: the tree command needs kind = \"sht\"".into()).into());
    };
    let coeffs = coefficients.clone().unwrap_or_else(RadialCoefficients::free);
    let g = build_sht(branching, &coeffs)?;
    let dim = tree_dimension(branching, p.n_max)?;
    let mut table = Table::new(vec!["n", "log_ball", "dimension"]);
    let mut plot = PlotData::default();
    for &(n, lb, d) in &dim.partial {
        table.push(vec![n.into(), lb.into(), d.into()]);
        plot.push(n as f64, d, "dimension");
    }
    let summary = json!({
        "compact_size": g.compact_size(),
        "branches": g.m(),
        "dimension": dim.value,
        "tail_sup": dim.tail_sup(),
    });
    Ok(Artifacts { name: "tree", table, plot, summary: Some(summary) })
}
