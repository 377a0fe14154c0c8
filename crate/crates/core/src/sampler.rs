//! Seeded sample generation and CSV dataset I/O.
//!
//! Every draw uses ChaCha8 with one stream per role (covariates, ξ, ε), so a
//! larger `m` with the same seed extends an existing sample set instead of
//! reshuffling it.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::model::{CovariateSource, Covariates, InstanceSpec, ObliviousNoiseSpec, SampleSet, FILE_NORM_SLACK};

pub const STREAM_COVARIATES: u64 = 0;
pub const STREAM_OBLIVIOUS: u64 = 1;
pub const STREAM_GAUSSIAN: u64 = 2;
/// Stream used to draw `w*` for `wstar = "random:<seed>"`.
pub const STREAM_WSTAR: u64 = 3;
/// Stream for the pruner's final uniform pick.
pub const STREAM_SELECTION: u64 = 4;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform point of the `d`-ball: Gaussian direction times `U^{1/d}`.
pub fn uniform_ball<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let r = rng.random::<f64>().powf(1.0 / out.len() as f64);
    uniform_direction(rng, out);
    out.iter_mut().for_each(|v| *v *= r);
}

pub fn uniform_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let n = norm(out);
        if n > 0.0 {
            out.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}

impl CovariateSource {
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            CovariateSource::UniformBall { .. } => uniform_ball(rng, out),
            CovariateSource::UniformSphere { radius, .. } => {
                uniform_direction(rng, out);
                out.iter_mut().for_each(|v| *v *= radius);
            }
            CovariateSource::PointMasses(points) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = &points[points.len() - 1].0;
                for (x, p) in points {
                    acc += p;
                    if u < acc {
                        pick = x;
                        break;
                    }
                }
                out.copy_from_slice(pick);
            }
            CovariateSource::Dataset { rows, .. } => {
                let k = rng.random_range(0..rows.len());
                out.copy_from_slice(&rows[k]);
            }
        }
    }
}

impl ObliviousNoiseSpec {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.prob;
            if u < acc {
                return a.value;
            }
        }
        self.atoms[self.atoms.len() - 1].value
    }
}

/// Draws `m` covariate vectors from `source` on the covariate stream of `seed`.
pub fn draw_covariates(source: &CovariateSource, m: usize, seed: u64) -> Result<Covariates> {
    let problems = source.violations();
    if !problems.is_empty() {
        return Err(Error::InvalidParameter(problems.join("; ")));
    }
    let d = source.dim();
    let mut rng = stream_rng(seed, STREAM_COVARIATES);
    let mut cov = Covariates::with_capacity(d, m);
    let data = cov.data_mut();
    data.resize(d * m, 0.0);
    for row in data.chunks_exact_mut(d) {
        source.sample_into(&mut rng, row);
    }
    Ok(cov)
}

/// Draws `m` i.i.d. samples `(x, g(w*·x) + ξ + ε)`.
pub fn draw_samples(spec: &InstanceSpec, m: usize, seed: u64) -> Result<SampleSet> {
    if m == 0 {
        return Err(Error::Precondition("sample count m must be >= 1".into()));
    }
    let report = crate::model::validate_instance(spec);
    if !report.is_ok() {
        return Err(Error::InvalidParameter(report.violations.join("; ")));
    }
    let covariates = draw_covariates(&spec.covariates, m, seed)?;
    let mut xi_rng = stream_rng(seed, STREAM_OBLIVIOUS);
    let mut eps_rng = stream_rng(seed, STREAM_GAUSSIAN);
    let labels = covariates
        .rows()
        .map(|x| {
            let xi = spec.noise.sample(&mut xi_rng);
            let z: f64 = StandardNormal.sample(&mut eps_rng);
            spec.activation.eval(dot(&spec.wstar, x)) + xi + spec.sigma * z
        })
        .collect();
    SampleSet::from_parts(covariates, labels)
}

fn parse_numeric_rows(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Config(format!("{}: {other:?}", path.display())),
        })?;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Dataset {
            path: path.to_path_buf(),
            line: e.position().map_or(k + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.iter().all(|x| x.is_finite()) => rows.push((line, v)),
            Ok(_) => return Err(Error::Dataset { path: path.to_path_buf(), line, message: "non-finite value".into() }),
            // A non-numeric first row is a header.
            Err(_) if rows.is_empty() && k == 0 => continue,
            Err(e) => {
                return Err(Error::Dataset { path: path.to_path_buf(), line, message: format!("malformed row: {e}") })
            }
        }
    }
    Ok(rows)
}

fn check_row(path: &Path, line: usize, x: &[f64], width: usize, got: usize) -> Result<()> {
    if got != width {
        return Err(Error::Dataset {
            path: path.to_path_buf(),
            line,
            message: format!("expected {width} columns, found {got}"),
        });
    }
    let n = norm(x);
    if n > 1.0 + FILE_NORM_SLACK {
        return Err(Error::Dataset {
            path: path.to_path_buf(),
            line,
            message: format!("covariate norm {n} exceeds 1"),
        });
    }
    Ok(())
}

/// Reads `x₁,…,x_d,y` rows (optional header) into a sample set.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<SampleSet> {
    let path = path.as_ref();
    let rows = parse_numeric_rows(path)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::Empty("no samples"));
    };
    let width = first.len();
    if width < 2 {
        return Err(Error::Dataset {
            path: path.to_path_buf(),
            line: rows[0].0,
            message: "need at least one covariate column and a label".into(),
        });
    }
    let mut out = SampleSet::new(width - 1);
    for (line, row) in &rows {
        let (x, y) = row.split_at(row.len().saturating_sub(1));
        check_row(path, *line, x, width, row.len())?;
        out.push(x, y[0])?;
    }
    Ok(out)
}

/// Reads covariate-only rows `x₁,…,x_d` for a file-backed covariate law.
pub fn load_covariate_rows(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let rows = parse_numeric_rows(path)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::Empty("no covariate rows"));
    };
    let width = first.len();
    let mut out = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        check_row(path, line, &row, width, row.len())?;
        out.push(row);
    }
    Ok(out)
}

/// Reads `prob,x₁,…,x_d` rows describing a point-mass covariate law.
pub fn load_point_masses(path: impl AsRef<Path>) -> Result<Vec<(Vec<f64>, f64)>> {
    let path = path.as_ref();
    let rows = parse_numeric_rows(path)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::Empty("no point masses"));
    };
    let width = first.len();
    let mut out = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        check_row(path, line, &row[1.min(row.len())..], width, row.len())?;
        out.push((row[1..].to_vec(), row[0]));
    }
    Ok(out)
}

/// Writes into a sibling temp file, then renames over `path`.
pub fn write_atomically(
    path: impl AsRef<Path>,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}

/// Writes samples as `x₁,…,x_d,y` with 17 significant digits.
pub fn write_samples_csv(path: impl AsRef<Path>, samples: &SampleSet) -> Result<()> {
    write_atomically(path, |w| {
        let header: Vec<String> =
            (1..=samples.dim()).map(|k| format!("x{k}")).chain(std::iter::once("y".to_string())).collect();
        writeln!(w, "{}", header.join(","))?;
        for (x, y) in samples.iter() {
            for v in x {
                write!(w, "{v:.16e},")?;
            }
            writeln!(w, "{y:.16e}")?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, NoiseAtom};

    fn degenerate_spec() -> InstanceSpec {
        InstanceSpec {
            activation: Activation::Identity,
            sigma: 0.0,
            noise: ObliviousNoiseSpec::zero(),
            wstar: vec![1.0, 0.0],
            radius: 1.0,
            covariates: CovariateSource::PointMasses(vec![(vec![1.0, 0.0], 1.0)]),
            seed: 0,
        }
    }

    #[test]
    fn noiseless_point_mass_reproduces_labels() {
        let s = draw_samples(&degenerate_spec(), 50, 3).unwrap();
        assert_eq!(s.len(), 50);
        for (x, y) in s.iter() {
            assert_eq!(x, &[1.0, 0.0]);
            assert_eq!(y, 1.0);
        }
    }

    #[test]
    fn zero_samples_is_a_precondition_error() {
        assert!(matches!(draw_samples(&degenerate_spec(), 0, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn same_seed_is_bit_identical_and_extends() {
        let spec = InstanceSpec::figure1();
        let a = draw_samples(&spec, 500, 11).unwrap();
        let b = draw_samples(&spec, 500, 11).unwrap();
        assert_eq!(a, b);
        let longer = draw_samples(&spec, 800, 11).unwrap();
        for i in 0..500 {
            assert_eq!(a.x(i), longer.x(i));
            assert_eq!(a.y(i).to_bits(), longer.y(i).to_bits());
        }
        let other = draw_samples(&spec, 500, 12).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn zero_atom_frequency_matches_mass() {
        let noise = ObliviousNoiseSpec {
            atoms: vec![
                NoiseAtom { value: -2.0, prob: 0.5 },
                NoiseAtom { value: 0.0, prob: 0.2 },
                NoiseAtom { value: 3.0, prob: 0.3 },
            ],
            alpha: 0.2,
        };
        let n = 1_000_000;
        let mut rng = stream_rng(5, STREAM_OBLIVIOUS);
        let zeros = (0..n).filter(|_| noise.sample(&mut rng) == 0.0).count();
        let p = 0.2;
        let freq = zeros as f64 / n as f64;
        assert!((freq - p).abs() <= 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{freq}");
    }

    #[test]
    fn gaussian_fourth_moment_is_three_sigma_four() {
        let sigma = 0.7;
        let spec = InstanceSpec {
            activation: Activation::Identity,
            sigma,
            noise: ObliviousNoiseSpec::zero(),
            wstar: vec![0.0],
            radius: 1.0,
            covariates: CovariateSource::UniformBall { dim: 1 },
            seed: 0,
        };
        let s = draw_samples(&spec, 1_000_000, 8).unwrap();
        let n = s.len() as f64;
        let m4 = s.labels().iter().map(|y| y.powi(4)).sum::<f64>() / n;
        let target = 3.0 * sigma.powi(4);
        // Var(ε⁴) = (105 − 9)σ⁸.
        let se = (96.0_f64).sqrt() * sigma.powi(4) / n.sqrt();
        assert!((m4 - target).abs() < 5.0 * se, "{m4} vs {target}");
    }

    #[test]
    fn uniform_ball_mean_norm() {
        for d in [1usize, 2, 3, 7] {
            let cov = draw_covariates(&CovariateSource::UniformBall { dim: d }, 200_000, 21).unwrap();
            let n = cov.len() as f64;
            let mean = cov.rows().map(norm).sum::<f64>() / n;
            let target = d as f64 / (d as f64 + 1.0);
            // Var‖x‖ = d/(d+2) − (d/(d+1))².
            let var = d as f64 / (d as f64 + 2.0) - target * target;
            assert!((mean - target).abs() < 5.0 * (var / n).sqrt(), "d={d}: {mean}");
            assert!(cov.rows().all(|x| norm(x) <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn sphere_covariates_have_fixed_norm() {
        let cov = draw_covariates(&CovariateSource::UniformSphere { dim: 4, radius: 0.6 }, 1000, 2).unwrap();
        assert!(cov.rows().all(|x| (norm(x) - 0.6).abs() < 1e-12));
    }

    fn write_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_two_rows() {
        let f = write_file("1,0,0.5\n0,1,0.2");
        let s = load_dataset(f.path()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.x(0), &[1.0, 0.0]);
        assert_eq!(s.y(1), 0.2);
    }

    #[test]
    fn load_with_header() {
        let f = write_file("x1,x2,y\n0.5,0,1\n");
        let s = load_dataset(f.path()).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn load_rejects_norm_violation_with_line() {
        let f = write_file("0.1,0,1\n2,0,1\n");
        match load_dataset(f.path()) {
            Err(Error::Dataset { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("norm"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_rejects_malformed_row() {
        let f = write_file("0.1,0,1\n0.2,abc,1\n");
        match load_dataset(f.path()) {
            Err(Error::Dataset { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let f = write_file("0.1,0,1\n0.2,1\n");
        assert!(matches!(load_dataset(f.path()), Err(Error::Dataset { line: 2, .. })));
    }

    #[test]
    fn load_empty_file() {
        let f = write_file("");
        match load_dataset(f.path()) {
            Err(Error::Empty(msg)) => assert_eq!(msg, "no samples"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn written_samples_reload_bit_exactly() {
        let spec = InstanceSpec::figure1();
        let s = draw_samples(&spec, 300, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_samples_csv(&path, &s).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back.len(), s.len());
        for i in 0..s.len() {
            for (a, b) in s.x(i).iter().zip(back.x(i)) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            assert_eq!(s.y(i).to_bits(), back.y(i).to_bits());
        }
        assert!(!dir.path().join("s.csv.partial").exists());
    }

    #[test]
    fn point_mass_file() {
        let f = write_file("0.25,1,0\n0.75,0,-1\n");
        let pm = load_point_masses(f.path()).unwrap();
        assert_eq!(pm, vec![(vec![1.0, 0.0], 0.25), (vec![0.0, -1.0], 0.75)]);
    }
}
