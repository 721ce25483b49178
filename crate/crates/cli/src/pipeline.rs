//! `pipeline`: tokenize, weight, estimate, sample, densify, score, rank and
//! optionally evaluate, writing every intermediate artifact.

use densim::density::{self, DensityConfig, KernelSpec};
use densim::io as dio;
use densim::pipeline::{self as core, DsSimilarity};
use densim::{sampler, similarity, RankMatrix};

use crate::args::{MethodArg, PipelineArgs};
use crate::commands::{self, Finish, Ran};
use crate::error::{CliError, StageExt};
use crate::files;
use crate::output::OutputDir;

pub fn pipeline(a: &PipelineArgs) -> Ran {
    let params = commands::ds_params(&a.ds)?;
    let limit = commands::timeout(&a.rwmd)?;
    let ks = commands::parse_k_grid(&a.grid.k)?;
    let ss = commands::parse_s_grid(&a.grid.s)?;
    let classes = match &a.labels {
        Some(p) => Some(dio::read_labels(p).map_err(|e| CliError::Invalid(format!("read labels: {e}")))?),
        None => None,
    };

    let p = commands::prepare_corpora(&a.corpus)?;
    let mut out = OutputDir::create(&a.out.out)?;
    let mut fin = Finish::default();
    files::write_dfm_dir(&mut out, &p.embedding, &p.queries, p.items.as_ref(), &p.dropped)?;
    fin.note("query documents", p.queries.n_docs());
    fin.note("features", p.embedding.len());
    fin.note("dropped documents", p.dropped.len());

    let (sim, name) = match a.method {
        MethodArg::Ds => {
            let emb = &p.embedding;
            let bw = core::estimate_bandwidth(emb, params.bandwidth, params.q_low, params.q_high)
                .and_then(|b| b.adjusted(params.adjust))
                .stage("bandwidth")?;
            files::write_bandwidth(&mut out, &bw)?;
            fin.note("h", format!("{:?}", bw.h()));

            let radius = sampler::sampling_radius(&emb.vector_norms(), params.radius_quantile).stage("sample")?;
            let samples = sampler::sample_ball(params.n_points, emb.dim(), radius, params.seed).stage("sample")?;
            files::write_samples(&mut out, &samples)?;
            fin.note("radius", format!("{radius:?}"));

            let cfg = DensityConfig {
                bandwidth: &bw,
                kernel: KernelSpec::new(params.kernel, emb.dim()).stage("density")?,
                normalize: params.normalize,
            };
            let dens = density::cross_corpus_densities(&p.queries, p.items(), emb, &samples, &cfg).stage("density")?;
            commands::warn_zero_denominators(&dens);
            files::write_densities(&mut out, &dens)?;
            fin.note("single density matrix", dens.shared());

            let sim = match params.similarity {
                DsSimilarity::Cosine => similarity::cosine_similarity_rows(&dens.queries, dens.items()),
                DsSimilarity::JensenShannon => similarity::jensen_shannon_similarity(&dens.queries, dens.items()),
            }
            .stage("similarity")?;
            (sim, "ds")
        }
        MethodArg::Rwmd => {
            let variant = commands::rwmd_variant(a.rwmd.rwmd_variant);
            let (sim, _) = core::run_rwmd(&p.queries, p.items(), &p.embedding, variant, limit).stage("rwmd")?;
            (sim, "rwmd")
        }
    };
    files::write_similarity(&mut out, &sim)?;

    let ranks = RankMatrix::from_similarity(&sim, a.exclude_self);
    out.write(files::RANKINGS, |w| dio::write_rankings(w, &ranks, &sim))?;

    if let Some(classes) = &classes {
        let rows = commands::accuracy_rows(name, &ranks, classes, &ks, &ss)?;
        let ids = vec![ranks.query_ids(); rows.len()];
        commands::write_eval(&mut out, &rows, &ids, false)?;
    }
    Ok((out, fin))
}
