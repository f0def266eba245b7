use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use svfend_core::analysis::phash::cluster_duplicates;
use svfend_core::analysis::{
    default_doubt_patterns, default_patterns, doubt_ratio, duplication_by_label, emotion_profile,
    extract_key_sentences, ip_location_tally, likes_vs_fans, load_patterns, parse_doubt_patterns,
    phash, publish_hour_histogram, title_term_frequencies, Emotion, EmotionLexicon, GrayImage,
};
use svfend_core::data::{load_dataset, Dataset, LABEL_FAKE, LABEL_REAL};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    command: AnalyzeCommand,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCommand {
    /// Extract claims from debunking articles (one article per line).
    Extract {
        #[arg(long)]
        articles: PathBuf,
        /// Pattern file; the bundled patterns are used when omitted.
        #[arg(long)]
        patterns: Option<PathBuf>,
        #[arg(long, default_value = "extracted.csv")]
        out: PathBuf,
    },
    /// Cover-image duplication rate per label.
    Dedup {
        #[arg(long)]
        dataset: PathBuf,
        /// Maximum Hamming distance joining two covers.
        #[arg(long, default_value_t = 0)]
        threshold: u32,
        /// Directory of cover images named `<sample_id>.png|jpg|jpeg`;
        /// stored cover hashes are used when omitted.
        #[arg(long)]
        covers: Option<PathBuf>,
        #[arg(long, default_value = "dedup.csv")]
        out: PathBuf,
    },
    /// Mean emotion profile of title and transcript per label.
    Emotion {
        #[arg(long)]
        dataset: PathBuf,
        /// `word<TAB>emotion<TAB>intensity` file; bundled list when omitted.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value = "emotion.csv")]
        out: PathBuf,
    },
    /// Share of videos per label with at least one doubtful comment.
    Doubt {
        #[arg(long)]
        dataset: PathBuf,
        /// One regex per line; bundled doubt list when omitted.
        #[arg(long)]
        patterns: Option<PathBuf>,
        #[arg(long, default_value = "doubt.csv")]
        out: PathBuf,
    },
    /// Mean video likes per publisher fan-count bin and label.
    LikesFans {
        #[arg(long)]
        dataset: PathBuf,
        /// Strictly increasing bin boundaries.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "1000,10000,100000,1000000"
        )]
        bins: Vec<i64>,
        #[arg(long, default_value = "likes_fans.csv")]
        out: PathBuf,
    },
    /// Title term frequencies per label.
    Terms {
        #[arg(long)]
        dataset: PathBuf,
        /// Keep the most frequent terms per label.
        #[arg(long, default_value_t = 50)]
        top: usize,
        #[arg(long, default_value = "terms.csv")]
        out: PathBuf,
    },
    /// Publisher IP-location counts per label.
    Locations {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "locations.csv")]
        out: PathBuf,
    },
    /// Publish-hour histogram per label.
    Hours {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 8, allow_negative_numbers = true)]
        utc_offset: i64,
        #[arg(long, default_value = "hours.csv")]
        out: PathBuf,
    },
}

fn open_dataset(path: &Path) -> Result<Dataset> {
    Ok(load_dataset(path, true)
        .with_context(|| format!("cannot load dataset {}", path.display()))?
        .dataset)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))
}

fn label_name(l: u8) -> &'static str {
    if l == LABEL_FAKE {
        "fake"
    } else {
        "real"
    }
}

fn read_text(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} {}", path.display()))
}

fn load_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path)
        .with_context(|| format!("cannot decode {}", path.display()))?
        .into_luma8();
    let (w, h) = img.dimensions();
    let pixels = img.into_raw().into_iter().map(f64::from).collect();
    Ok(GrayImage::new(w as usize, h as usize, pixels)?)
}

fn find_cover(dir: &Path, id: &str) -> Option<PathBuf> {
    ["png", "jpg", "jpeg"]
        .iter()
        .map(|ext| dir.join(format!("{id}.{ext}")))
        .find(|p| p.is_file())
}

pub fn run(a: &AnalyzeArgs) -> Result<()> {
    match &a.command {
        AnalyzeCommand::Extract {
            articles,
            patterns,
            out,
        } => {
            let pats = match patterns {
                Some(p) => load_patterns(p)
                    .with_context(|| format!("cannot load patterns {}", p.display()))?,
                None => default_patterns(),
            };
            let text = read_text(articles, "articles")?;
            let lines: Vec<&str> = text.lines().collect();
            let found = extract_key_sentences(&lines, &pats);
            let mut w = writer(out)?;
            w.write_record(["article_index", "claim"])?;
            for (i, claim) in &found {
                w.write_record([i.to_string(), claim.clone()])?;
            }
            w.flush()?;
            println!("{} of {} articles matched", found.len(), lines.len());
        }
        AnalyzeCommand::Dedup {
            dataset,
            threshold,
            covers,
            out,
        } => {
            if *threshold > 64 {
                bail!("--threshold must lie in [0, 64]");
            }
            let d = open_dataset(dataset)?;
            let mut w = writer(out)?;
            w.write_record(["label", "items", "clusters", "duplication_rate"])?;
            match covers {
                None => {
                    let stats = duplication_by_label(&d, *threshold);
                    for l in [LABEL_REAL, LABEL_FAKE] {
                        let s = stats.get(l);
                        w.write_record([
                            label_name(l).to_string(),
                            s.items.to_string(),
                            s.clusters.to_string(),
                            s.rate.to_string(),
                        ])?;
                    }
                }
                Some(dir) => {
                    for l in [LABEL_REAL, LABEL_FAKE] {
                        let mut hashes = Vec::new();
                        for s in d.samples().iter().filter(|s| s.label == l) {
                            if let Some(p) = find_cover(dir, &s.sample_id) {
                                hashes.push(phash(&load_gray(&p)?)?);
                            }
                        }
                        let c = cluster_duplicates(&hashes, *threshold);
                        w.write_record([
                            label_name(l).to_string(),
                            hashes.len().to_string(),
                            c.n_clusters.to_string(),
                            c.duplication_rate().to_string(),
                        ])?;
                    }
                }
            }
            w.flush()?;
        }
        AnalyzeCommand::Emotion {
            dataset,
            lexicon,
            out,
        } => {
            let lex = match lexicon {
                Some(p) => EmotionLexicon::load(p)
                    .with_context(|| format!("cannot load lexicon {}", p.display()))?,
                None => EmotionLexicon::bundled(),
            };
            if lex.is_empty() {
                bail!("emotion lexicon is empty");
            }
            let d = open_dataset(dataset)?;
            let mut w = writer(out)?;
            let mut header = vec!["label".to_string(), "videos".to_string()];
            header.extend(Emotion::ALL.iter().map(|e| e.as_str().to_string()));
            w.write_record(&header)?;
            for l in [LABEL_REAL, LABEL_FAKE] {
                let mut sum = [0.0; 7];
                let mut n = 0usize;
                for s in d.samples().iter().filter(|s| s.label == l) {
                    let p = emotion_profile(&format!("{} {}", s.title, s.transcript), &lex);
                    sum.iter_mut().zip(p).for_each(|(a, b)| *a += b);
                    n += 1;
                }
                let mut row = vec![label_name(l).to_string(), n.to_string()];
                row.extend(
                    sum.iter()
                        .map(|v| if n == 0 { 0.0 } else { v / n as f64 }.to_string()),
                );
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        AnalyzeCommand::Doubt {
            dataset,
            patterns,
            out,
        } => {
            let pats = match patterns {
                Some(p) => parse_doubt_patterns(&read_text(p, "patterns")?)?,
                None => default_doubt_patterns(),
            };
            let d = open_dataset(dataset)?;
            let r = doubt_ratio(&d, &pats);
            let mut w = writer(out)?;
            w.write_record(["label", "videos", "doubtful_fraction"])?;
            for l in [LABEL_REAL, LABEL_FAKE] {
                let n = d.samples().iter().filter(|s| s.label == l).count();
                w.write_record([
                    label_name(l).to_string(),
                    n.to_string(),
                    r.get(l).to_string(),
                ])?;
            }
            w.flush()?;
            println!("doubtful: fake {:.4}, real {:.4}", r.fake, r.real);
        }
        AnalyzeCommand::LikesFans { dataset, bins, out } => {
            let d = open_dataset(dataset)?;
            let rows = likes_vs_fans(&d, bins)?;
            let mut w = writer(out)?;
            w.write_record(["fans_from", "fans_to", "label", "videos", "mean_likes"])?;
            let bound = |b: Option<i64>| b.map_or(String::new(), |v| v.to_string());
            for r in rows {
                w.write_record([
                    bound(r.lower),
                    bound(r.upper),
                    label_name(r.label).to_string(),
                    r.count.to_string(),
                    r.mean_likes.to_string(),
                ])?;
            }
            w.flush()?;
        }
        AnalyzeCommand::Terms { dataset, top, out } => {
            let d = open_dataset(dataset)?;
            let tf = title_term_frequencies(&d);
            let mut w = writer(out)?;
            w.write_record(["label", "term", "count"])?;
            for l in [LABEL_REAL, LABEL_FAKE] {
                let mut terms: Vec<(&String, &usize)> = tf.get(l).iter().collect();
                terms.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
                for (t, c) in terms.into_iter().take(*top) {
                    w.write_record([label_name(l), t, &c.to_string()])?;
                }
            }
            w.flush()?;
        }
        AnalyzeCommand::Locations { dataset, out } => {
            let d = open_dataset(dataset)?;
            let t = ip_location_tally(&d);
            let mut w = writer(out)?;
            w.write_record(["label", "location", "videos"])?;
            for l in [LABEL_REAL, LABEL_FAKE] {
                for (loc, c) in t.get(l) {
                    w.write_record([label_name(l), loc, &c.to_string()])?;
                }
            }
            w.flush()?;
        }
        AnalyzeCommand::Hours {
            dataset,
            utc_offset,
            out,
        } => {
            let d = open_dataset(dataset)?;
            let h = publish_hour_histogram(&d, *utc_offset);
            let mut w = writer(out)?;
            w.write_record(["label", "hour", "videos"])?;
            for l in [LABEL_REAL, LABEL_FAKE] {
                for (hour, c) in h.get(l).iter().enumerate() {
                    w.write_record([label_name(l).to_string(), hour.to_string(), c.to_string()])?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}
