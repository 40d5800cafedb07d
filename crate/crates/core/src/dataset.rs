//! Labeled URL corpora: loading, cleansing, balanced sampling and splitting.
//!
//! Supported inputs:
//!
//! - PhishTank dumps: CSV with a header row containing a `url` column.
//! - URL lists: one URL per line, `#` comments and blank lines ignored.
//! - Access logs: `epoch_seconds<TAB>url` per line.
//! - Dataset files (this crate's own format): `label<TAB>url` per line, label `0` or `1`.
//!
//! Every parser has an in-memory entry point (`parse_*`) next to its file
//! loader so the same code is reachable from tests and fuzzers.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Benign = 0,
    Malicious = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: i64) -> Result<Self> {
        match i {
            0 => Ok(Label::Benign),
            1 => Ok(Label::Malicious),
            other => Err(Error::InvalidLabel(other)),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Benign => "benign",
            Label::Malicious => "malicious",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledUrl {
    pub url: String,
    pub label: Label,
    /// Seconds since the Unix epoch, for entries that came from an access log.
    pub timestamp: Option<i64>,
}

impl LabeledUrl {
    pub fn new(url: impl Into<String>, label: Label) -> Self {
        LabeledUrl {
            url: url.into(),
            label,
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub entries: Vec<LabeledUrl>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(entries: Vec<LabeledUrl>, provenance: impl Into<String>) -> Self {
        Dataset {
            entries,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    pub fn urls(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.url.as_str()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label.index()).collect()
    }
}

/// A parsed dataset together with the number of input records that were skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loaded {
    pub dataset: Dataset,
    pub skipped: usize,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

/// Parses a PhishTank-style CSV dump. Every data row becomes a malicious entry;
/// rows whose `url` field is empty or missing are skipped.
pub fn parse_phishtank_csv<R: Read>(reader: R, provenance: &str) -> Result<Loaded> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let column = csv
        .headers()?
        .iter()
        .position(|h| h.trim().trim_start_matches('\u{feff}') == "url")
        .ok_or_else(|| Error::Schema("CSV header has no `url` column".into()))?;

    let mut entries = Vec::new();
    let mut skipped = 0;
    for record in csv.records() {
        let record = record?;
        match record.get(column).map(str::trim) {
            Some(url) if !url.is_empty() => entries.push(LabeledUrl::new(url, Label::Malicious)),
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        warn!("{provenance}: skipped {skipped} rows with an empty url");
    }
    Ok(Loaded {
        dataset: Dataset::new(entries, provenance),
        skipped,
    })
}

pub fn load_phishtank_csv(path: impl AsRef<Path>) -> Result<Loaded> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    parse_phishtank_csv(io::BufReader::new(file), &format!("phishtank:{}", path.display()))
}

/// Parses a plain URL list.
pub fn parse_url_list(text: &str, label: Label, provenance: &str) -> Dataset {
    let entries = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| LabeledUrl::new(l, label))
        .collect();
    Dataset::new(entries, provenance)
}

pub fn load_url_list(path: impl AsRef<Path>, label: Label) -> Result<Dataset> {
    let path = path.as_ref();
    Ok(parse_url_list(&read_text(path)?, label, &format!("list:{}", path.display())))
}

/// Parses an access log of `epoch_seconds<TAB>url` lines into benign entries.
/// Blank lines are ignored; malformed lines are skipped and counted.
pub fn parse_access_log(text: &str, provenance: &str) -> Loaded {
    let mut entries = Vec::new();
    let mut skipped = 0;
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parsed = line.split_once('\t').and_then(|(ts, url)| {
            let ts = ts.trim().parse::<i64>().ok()?;
            let url = url.trim();
            (!url.is_empty()).then(|| LabeledUrl {
                url: url.to_string(),
                label: Label::Benign,
                timestamp: Some(ts),
            })
        });
        match parsed {
            Some(entry) => entries.push(entry),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        warn!("{provenance}: skipped {skipped} malformed lines");
    }
    Loaded {
        dataset: Dataset::new(entries, provenance),
        skipped,
    }
}

pub fn load_access_log(path: impl AsRef<Path>) -> Result<Loaded> {
    let path = path.as_ref();
    Ok(parse_access_log(&read_text(path)?, &format!("log:{}", path.display())))
}

/// Parses the `label<TAB>url` dataset format. Blank lines are ignored; any
/// other malformed line is an error naming its line number.
pub fn parse_labeled(text: &str, provenance: &str) -> Result<Dataset> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (label, url) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "expected `label<TAB>url`"))?;
        let label = match label.trim() {
            "0" => Label::Benign,
            "1" => Label::Malicious,
            other => return Err(Error::parse(lineno, format!("label must be 0 or 1, got {other:?}"))),
        };
        if url.is_empty() {
            return Err(Error::parse(lineno, "empty url"));
        }
        entries.push(LabeledUrl::new(url, label));
    }
    Ok(Dataset::new(entries, provenance))
}

pub fn load_labeled(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    parse_labeled(&read_text(path)?, &format!("dataset:{}", path.display()))
}

pub fn write_labeled<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    for e in &dataset.entries {
        if e.url.is_empty() || e.url.contains(['\n', '\r']) {
            return Err(Error::InvalidInput(format!(
                "url {:?} cannot be stored one per line",
                e.url
            )));
        }
        writeln!(out, "{}\t{}", e.label.index(), e.url)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_labeled(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_labeled(dataset, io::BufWriter::new(file))
}

/// Removes whitelist entries whose exact URL string appears in the blacklist.
pub fn cleanse(whitelist: &Dataset, blacklist: &Dataset) -> Dataset {
    let black: HashSet<&str> = blacklist.entries.iter().map(|e| e.url.as_str()).collect();
    let entries = whitelist
        .entries
        .iter()
        .filter(|e| !black.contains(e.url.as_str()))
        .cloned()
        .collect();
    Dataset::new(
        entries,
        format!("{} minus {}", whitelist.provenance, blacklist.provenance),
    )
}

/// Keeps the first occurrence of every exact URL.
pub fn dedup_by_url(d: &Dataset) -> Dataset {
    let mut seen = HashSet::new();
    let entries = d
        .entries
        .iter()
        .filter(|e| seen.insert(e.url.as_str()))
        .cloned()
        .collect();
    Dataset::new(entries, d.provenance.clone())
}

/// UTC hour index of a timestamp.
pub fn hour_bucket(timestamp: i64) -> i64 {
    timestamp.div_euclid(3600)
}

/// Picks `amount` of `items` uniformly without replacement, keeping their
/// original relative order.
fn sample_in_order<T: Clone>(items: &[T], amount: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut picked = index::sample(rng, items.len(), amount).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

/// Two-stage sampling of an access log: up to `per_hour` entries uniformly
/// from every UTC hour, then `target_size` uniformly from that pool.
pub fn balance_sample(log: &Dataset, per_hour: usize, target_size: usize, seed: u64) -> Result<Dataset> {
    let mut buckets: BTreeMap<i64, Vec<&LabeledUrl>> = BTreeMap::new();
    for e in &log.entries {
        let ts = e.timestamp.ok_or_else(|| {
            Error::InvalidInput(format!("access-log entry {:?} has no timestamp", e.url))
        })?;
        buckets.entry(hour_bucket(ts)).or_default().push(e);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<&LabeledUrl> = Vec::new();
    for bucket in buckets.values() {
        pool.extend(sample_in_order(bucket, per_hour.min(bucket.len()), &mut rng));
    }
    if target_size > pool.len() {
        return Err(Error::InvalidInput(format!(
            "requested {target_size} entries but hourly sampling yielded only {}",
            pool.len()
        )));
    }
    let entries = sample_in_order(&pool, target_size, &mut rng)
        .into_iter()
        .cloned()
        .collect();
    Ok(Dataset::new(
        entries,
        format!("{} balanced {per_hour}/hour to {target_size} (seed {seed})", log.provenance),
    ))
}

/// Uniformly samples `size` entries of any dataset, keeping their order.
pub fn sample(d: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    if size > d.len() {
        return Err(Error::InvalidInput(format!(
            "cannot sample {size} entries from {} available",
            d.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Dataset::new(
        sample_in_order(&d.entries, size, &mut rng),
        format!("{} sampled to {size} (seed {seed})", d.provenance),
    ))
}

/// Number of training entries for a split: `floor(n * fraction)`.
pub fn train_count(n: usize, train_fraction: f64) -> usize {
    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999…
    ((n as f64) * train_fraction + 1e-9).floor() as usize
}

/// Concatenates both datasets, shuffles with a seeded permutation and cuts
/// the first `floor(N * train_fraction)` entries off as the training set.
pub fn merge_shuffle_split(
    black: &Dataset,
    white: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction {train_fraction} is outside (0, 1)"
        )));
    }
    let mut all: Vec<LabeledUrl> = black.entries.iter().chain(&white.entries).cloned().collect();
    if all.is_empty() {
        return Err(Error::EmptyDataset("nothing to split"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    let validation = all.split_off(train_count(all.len(), train_fraction));
    let origin = format!("{} + {} (seed {seed})", black.provenance, white.provenance);
    Ok((
        Dataset::new(all, format!("train split of {origin}")),
        Dataset::new(validation, format!("validation split of {origin}")),
    ))
}

/// Inputs of the full dataset preparation procedure.
#[derive(Debug, Clone)]
pub struct PrepareOptions {
    /// Entries sampled from each UTC hour of the access log.
    pub per_hour: usize,
    /// Entries per class; defaults to the blacklist size.
    pub size: Option<usize>,
    pub train_fraction: f64,
    pub seed: u64,
    /// Drop repeated blacklist URLs before sizing.
    pub dedup_blacklist: bool,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            per_hour: 10_000,
            size: None,
            train_fraction: 0.8,
            seed: 0,
            dedup_blacklist: false,
        }
    }
}

/// Counts collected while preparing a dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrepareSummary {
    pub blacklist: usize,
    pub blacklist_skipped: usize,
    pub log_entries: usize,
    pub log_skipped: usize,
    pub cleansed_away: usize,
    pub per_class: usize,
    pub train: usize,
    pub validation: usize,
}

/// Blacklist + access log → balanced train/validation split.
///
/// The log is cleansed by exact-URL subtraction of `cleanse_with`, sampled
/// per hour and down to the class size, the blacklist is sampled to the same
/// size if it is larger, and the union is shuffled and split.
pub fn prepare(
    blacklist: Loaded,
    access_log: Loaded,
    cleanse_with: &Dataset,
    options: &PrepareOptions,
) -> Result<(Dataset, Dataset, PrepareSummary)> {
    let mut summary = PrepareSummary {
        blacklist_skipped: blacklist.skipped,
        log_entries: access_log.dataset.len(),
        log_skipped: access_log.skipped,
        ..Default::default()
    };
    let mut black = blacklist.dataset;
    if options.dedup_blacklist {
        black = dedup_by_url(&black);
    }
    summary.blacklist = black.len();

    let white = cleanse(&access_log.dataset, cleanse_with);
    summary.cleansed_away = access_log.dataset.len() - white.len();

    let size = options.size.unwrap_or(black.len());
    if size == 0 {
        return Err(Error::EmptyDataset("blacklist is empty"));
    }
    if black.len() > size {
        black = sample(&black, size, options.seed)?;
    } else if black.len() < size {
        return Err(Error::InvalidInput(format!(
            "class size {size} exceeds the {} blacklist entries",
            black.len()
        )));
    }
    let white = balance_sample(&white, options.per_hour, size, options.seed)?;
    summary.per_class = size;

    let (train, validation) = merge_shuffle_split(&black, &white, options.train_fraction, options.seed)?;
    summary.train = train.len();
    summary.validation = validation.len();
    Ok((train, validation, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn urls(d: &Dataset) -> Vec<&str> {
        d.urls()
    }

    fn white(list: &[&str]) -> Dataset {
        Dataset::new(list.iter().map(|u| LabeledUrl::new(*u, Label::Benign)).collect(), "w")
    }

    fn black(list: &[&str]) -> Dataset {
        Dataset::new(list.iter().map(|u| LabeledUrl::new(*u, Label::Malicious)).collect(), "b")
    }

    #[test]
    fn phishtank_rows() {
        let csv = "phish_id,url,submission_time\n\
                   1,http://a.example/,2017-04-01\n\
                   2,http://b.example/login,2017-04-02\n\
                   3,http://c.example/x,2017-04-03\n";
        let loaded = parse_phishtank_csv(csv.as_bytes(), "t").unwrap();
        assert_eq!(loaded.dataset.len(), 3);
        assert_eq!(loaded.skipped, 0);
        assert!(loaded.dataset.entries.iter().all(|e| e.label == Label::Malicious));
    }

    #[test]
    fn phishtank_quoted_comma() {
        let csv = "phish_id,url\n7,\"http://a.example/p?x=1,2\"\n";
        let loaded = parse_phishtank_csv(csv.as_bytes(), "t").unwrap();
        assert_eq!(urls(&loaded.dataset), ["http://a.example/p?x=1,2"]);
    }

    #[test]
    fn phishtank_missing_url_column() {
        let csv = "phish_id,link\n1,http://a.example/\n";
        assert!(matches!(parse_phishtank_csv(csv.as_bytes(), "t"), Err(Error::Schema(_))));
    }

    #[test]
    fn phishtank_empty_url_is_skipped() {
        let csv = "url,id\n,1\nhttp://x/,2\n";
        let loaded = parse_phishtank_csv(csv.as_bytes(), "t").unwrap();
        assert_eq!((loaded.dataset.len(), loaded.skipped), (1, 1));
    }

    #[test]
    fn url_list_skips_comments() {
        let d = parse_url_list("# header\nhttp://a/\n\nhttp://b/\n", Label::Benign, "t");
        assert_eq!(urls(&d), ["http://a/", "http://b/"]);
        assert!(parse_url_list("", Label::Malicious, "t").is_empty());
    }

    #[test]
    fn access_log_lines() {
        let loaded = parse_access_log("1493078400\thttp://a.example/\n", "t");
        assert_eq!(loaded.dataset.entries[0].timestamp, Some(1493078400));
        assert_eq!(loaded.dataset.entries[0].label, Label::Benign);

        let loaded = parse_access_log("nourl\n", "t");
        assert_eq!((loaded.dataset.len(), loaded.skipped), (0, 1));
    }

    #[test]
    fn access_log_day_of_hours() {
        let text: String = (0..24)
            .map(|h| format!("{}\thttp://h{h}.example/\n", 1493078400 + h * 3600 + 17))
            .collect();
        let d = parse_access_log(&text, "t").dataset;
        assert_eq!(d.len(), 24);
        let hours: HashSet<i64> = d.entries.iter().map(|e| hour_bucket(e.timestamp.unwrap())).collect();
        assert_eq!(hours.len(), 24);
    }

    #[test]
    fn labeled_format_round_trip_and_errors() {
        let d = Dataset::new(
            vec![
                LabeledUrl::new("http://a/\tb", Label::Benign),
                LabeledUrl::new("http://evil/", Label::Malicious),
            ],
            "t",
        );
        let mut buf = Vec::new();
        write_labeled(&d, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0\thttp://a/\tb\n1\thttp://evil/\n");
        assert_eq!(parse_labeled(std::str::from_utf8(&buf).unwrap(), "t").unwrap().entries, d.entries);

        assert!(matches!(parse_labeled("0\tok\n2\tx\n", "t"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_labeled("http://x/\n", "t"), Err(Error::Parse { line: 1, .. })));
        assert!(write_labeled(&white(&["a\nb"]), Vec::new()).is_err());
    }

    #[test]
    fn cleanse_cases() {
        assert_eq!(urls(&cleanse(&white(&["A", "B", "C"]), &black(&["B"]))), ["A", "C"]);
        assert_eq!(urls(&cleanse(&white(&["A", "B"]), &black(&["X"]))), ["A", "B"]);
        assert!(cleanse(&white(&["A", "B"]), &black(&["B", "A", "Z"])).is_empty());
    }

    #[test]
    fn dedup_cases() {
        assert_eq!(urls(&dedup_by_url(&white(&["A", "A", "B"]))), ["A", "B"]);
        assert_eq!(urls(&dedup_by_url(&white(&["A", "B"]))), ["A", "B"]);
        assert!(dedup_by_url(&white(&[])).is_empty());
    }

    fn synthetic_log(per_bucket: &[usize]) -> Dataset {
        let mut entries = Vec::new();
        for (h, &n) in per_bucket.iter().enumerate() {
            for k in 0..n {
                entries.push(LabeledUrl {
                    url: format!("http://h{h}.example/{k}"),
                    label: Label::Benign,
                    timestamp: Some(1_493_078_400 + h as i64 * 3600 + (k % 3600) as i64),
                });
            }
        }
        Dataset::new(entries, "log")
    }

    #[test]
    fn balance_sample_caps_each_hour() {
        let log = synthetic_log(&[50, 3, 20, 7]);
        let out = balance_sample(&log, 10, 25, 1).unwrap();
        assert_eq!(out.len(), 25);
        let mut per_hour = BTreeMap::new();
        for e in &out.entries {
            *per_hour.entry(hour_bucket(e.timestamp.unwrap())).or_insert(0) += 1;
        }
        assert!(per_hour.values().all(|&c| c <= 10));
        assert_eq!(out, balance_sample(&log, 10, 25, 1).unwrap());
        assert_ne!(out, balance_sample(&log, 10, 25, 2).unwrap());
    }

    #[test]
    fn balance_sample_exhaustive() {
        let log = synthetic_log(&[4, 5, 6]);
        let out = balance_sample(&log, 100, 15, 3).unwrap();
        let mut got = urls(&out);
        let mut all = urls(&log);
        got.sort();
        all.sort();
        assert_eq!(got, all);
    }

    #[test]
    fn balance_sample_errors() {
        let log = synthetic_log(&[4, 5]);
        assert!(balance_sample(&log, 3, 7, 0).is_err());
        assert!(balance_sample(&white(&["A"]), 3, 1, 0).is_err());
    }

    #[test]
    fn split_sizes() {
        assert_eq!(train_count(53_444, 0.8), 42_755);
        assert_eq!(53_444 - train_count(53_444, 0.8), 10_689);
        let b = black(&["1", "2", "3", "4", "5"]);
        let w = white(&["6", "7", "8", "9", "10"]);
        let (tr, va) = merge_shuffle_split(&b, &w, 0.5, 9).unwrap();
        assert_eq!((tr.len(), va.len()), (5, 5));
        let (tr2, va2) = merge_shuffle_split(&b, &w, 0.5, 9).unwrap();
        assert_eq!((tr.entries, va.entries), (tr2.entries, va2.entries));
    }

    #[test]
    fn split_errors() {
        assert!(merge_shuffle_split(&black(&[]), &white(&[]), 0.8, 0).is_err());
        assert!(merge_shuffle_split(&black(&["a"]), &white(&[]), 1.0, 0).is_err());
        assert!(merge_shuffle_split(&black(&["a"]), &white(&[]), 0.0, 0).is_err());
    }

    #[test]
    fn prepare_end_to_end() {
        let log_text: String = (0..24)
            .flat_map(|h| (0..30).map(move |k| (h, k)))
            .map(|(h, k)| format!("{}\thttp://site{k}.example/h{h}\n", 1_493_078_400 + h * 3600 + k))
            .collect();
        let mut csv = String::from("phish_id,url\n");
        for k in 0..40 {
            csv.push_str(&format!("{k},http://phish{k}.example/login\n"));
        }
        csv.push_str("99,http://site3.example/h5\n");
        let black = parse_phishtank_csv(csv.as_bytes(), "b").unwrap();
        let cleanse_with = black.dataset.clone();
        let log = parse_access_log(&log_text, "log");
        let options = PrepareOptions {
            per_hour: 10,
            seed: 4,
            ..Default::default()
        };
        let (train, val, summary) = prepare(black, log, &cleanse_with, &options).unwrap();
        assert_eq!(summary.per_class, 41);
        assert_eq!(summary.cleansed_away, 1);
        assert_eq!(train.len() + val.len(), 82);
        assert_eq!(train.len(), 65);
        let all: Vec<_> = train.entries.iter().chain(&val.entries).collect();
        assert_eq!(all.iter().filter(|e| e.label == Label::Malicious).count(), 41);
        assert!(all.iter().all(|e| e.url != "http://site3.example/h5" || e.label == Label::Malicious));
    }
}
