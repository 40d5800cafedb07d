//! Bag-of-bytes URL vectors.
//!
//! Every byte of a URL part is counted, and so is every "overlap" byte built
//! from the low nibble of a character followed by the high nibble of the next
//! one. Reading the string as a bit stream, these are the byte windows at bit
//! offsets `0, 8, 16, ...` and `4, 12, 20, ...`. A part of `n` bytes therefore
//! yields `2n - 1` values (none for an empty part).
//!
//! Host and path are counted separately into two 256-bin histograms, each is
//! scaled to unit Euclidean norm, and the halves are concatenated:
//! indices `0..256` hold the host, `256..512` the path.

use crate::error::{Error, Result};

/// Number of bins in one byte histogram.
pub const HISTOGRAM_BINS: usize = 256;

/// Length of a [`UrlVector`]: host half followed by path half.
pub const VECTOR_DIM: usize = 2 * HISTOGRAM_BINS;

const SCHEME_SEPARATOR: &[u8] = b"://";

/// A URL cut into the byte ranges the vectorizer looks at.
///
/// Both parts borrow the input verbatim: nothing is decoded or case-folded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedUrl<'a> {
    /// Bytes before `://`, when the URL has one. Not used for vectorization.
    pub scheme: Option<&'a [u8]>,
    /// Everything up to the first `/`, including userinfo and port.
    pub host: &'a [u8],
    /// The first `/` and everything after it, query and fragment included.
    pub path: &'a [u8],
}

impl ParsedUrl<'_> {
    /// Rebuilds `scheme://host path` (or `host path` when there was no scheme).
    pub fn reassemble(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            self.scheme.map_or(0, |s| s.len() + SCHEME_SEPARATOR.len())
                + self.host.len()
                + self.path.len(),
        );
        if let Some(scheme) = self.scheme {
            out.extend_from_slice(scheme);
            out.extend_from_slice(SCHEME_SEPARATOR);
        }
        out.extend_from_slice(self.host);
        out.extend_from_slice(self.path);
        out
    }
}

/// Splits a URL into host and path.
///
/// If `://` occurs, the scheme before it is dropped and the host runs from
/// just after it up to (not including) the next `/`. Without `://` the host
/// starts at the beginning of the input. The path is the rest, starting at
/// that `/`, and is empty when no `/` follows the host.
pub fn split_url(url: &[u8]) -> Result<ParsedUrl<'_>> {
    if url.is_empty() {
        return Err(Error::InvalidInput("empty URL".into()));
    }
    let (scheme, rest) = match find(url, SCHEME_SEPARATOR) {
        Some(at) => (Some(&url[..at]), &url[at + SCHEME_SEPARATOR.len()..]),
        None => (None, url),
    };
    let host_end = rest.iter().position(|&b| b == b'/').unwrap_or(rest.len());
    let (host, path) = rest.split_at(host_end);
    Ok(ParsedUrl { scheme, host, path })
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

#[inline]
fn overlap_byte(earlier: u8, later: u8) -> u8 {
    ((earlier & 0x0F) << 4) | (later >> 4)
}

/// Lists the byte values of `s`: each byte in order, then one overlap byte
/// per adjacent pair.
pub fn extract_bytes(s: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity((2 * s.len()).saturating_sub(1));
    out.extend_from_slice(s);
    out.extend(s.windows(2).map(|w| overlap_byte(w[0], w[1])));
    out
}

/// Occurrence counts of every byte value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteHistogram {
    pub counts: [u64; HISTOGRAM_BINS],
}

impl Default for ByteHistogram {
    fn default() -> Self {
        ByteHistogram {
            counts: [0; HISTOGRAM_BINS],
        }
    }
}

impl ByteHistogram {
    /// Counts the bag of bytes of `part` directly, without materializing
    /// [`extract_bytes`].
    pub fn of_part(part: &[u8]) -> Self {
        let mut hist = ByteHistogram::default();
        for &b in part {
            hist.counts[b as usize] += 1;
        }
        for w in part.windows(2) {
            hist.counts[overlap_byte(w[0], w[1]) as usize] += 1;
        }
        hist
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.counts
            .iter()
            .map(|&c| {
                let c = c as f64;
                c * c
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Writes the histogram scaled to unit L2 norm into `out`; an empty
    /// histogram writes zeros.
    fn write_normalized(&self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), HISTOGRAM_BINS);
        let norm = self.l2_norm();
        if norm == 0.0 {
            out.fill(0.0);
            return;
        }
        for (dst, &c) in out.iter_mut().zip(self.counts.iter()) {
            *dst = c as f64 / norm;
        }
    }
}

/// Counts how many times each value occurs in `bytes`.
pub fn histogram(bytes: &[u8]) -> ByteHistogram {
    let mut hist = ByteHistogram::default();
    for &b in bytes {
        hist.counts[b as usize] += 1;
    }
    hist
}

/// The 512-dimensional representation of one URL.
#[derive(Debug, Clone, PartialEq)]
pub struct UrlVector {
    values: Box<[f64; VECTOR_DIM]>,
}

impl UrlVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.values[..]
    }

    pub fn host_half(&self) -> &[f64] {
        &self.values[..HISTOGRAM_BINS]
    }

    pub fn path_half(&self) -> &[f64] {
        &self.values[HISTOGRAM_BINS..]
    }
}

impl AsRef<[f64]> for UrlVector {
    fn as_ref(&self) -> &[f64] {
        self.as_slice()
    }
}

/// Turns a URL into its bag-of-bytes vector.
///
/// Accepts arbitrary bytes; percent escapes and non-ASCII bytes are counted
/// as they are.
pub fn vectorize(url: impl AsRef<[u8]>) -> Result<UrlVector> {
    let parsed = split_url(url.as_ref())?;
    let mut values = Box::new([0.0; VECTOR_DIM]);
    let (host_out, path_out) = values.split_at_mut(HISTOGRAM_BINS);
    ByteHistogram::of_part(parsed.host).write_normalized(host_out);
    ByteHistogram::of_part(parsed.path).write_normalized(path_out);
    Ok(UrlVector { values })
}

/// Vectorizes many URLs into one row-major `urls.len() × 512` buffer.
///
/// With `threads == 0` the work runs on the calling thread; otherwise a
/// dedicated pool of that many workers is used. Row order always follows
/// input order.
pub fn vectorize_rows<S>(urls: &[S], threads: usize) -> Result<Vec<f64>>
where
    S: AsRef<[u8]> + Sync,
{
    let mut rows = vec![0.0; urls.len() * VECTOR_DIM];
    if threads == 0 || urls.len() < 2 {
        for (row, url) in rows.chunks_exact_mut(VECTOR_DIM).zip(urls) {
            row.copy_from_slice(vectorize(url)?.as_slice());
        }
        return Ok(rows);
    }

    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| {
        rows.par_chunks_exact_mut(VECTOR_DIM)
            .zip(urls.par_iter())
            .try_for_each(|(row, url)| {
                row.copy_from_slice(vectorize(url)?.as_slice());
                Ok::<(), Error>(())
            })
    })?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts(url: &str) -> (&[u8], &[u8]) {
        let p = split_url(url.as_bytes()).unwrap();
        (p.host, p.path)
    }

    #[test]
    fn split_with_scheme_query() {
        assert_eq!(parts("http://a.example/x?q=1"), (&b"a.example"[..], &b"/x?q=1"[..]));
    }

    #[test]
    fn split_without_separator() {
        assert_eq!(parts("a.example"), (&b"a.example"[..], &b""[..]));
    }

    #[test]
    fn split_root_path() {
        assert_eq!(parts("http://h/"), (&b"h"[..], &b"/"[..]));
    }

    #[test]
    fn split_keeps_userinfo_and_port_in_host() {
        assert_eq!(
            parts("https://user:pw@host.example:8443/p#frag"),
            (&b"user:pw@host.example:8443"[..], &b"/p#frag"[..])
        );
    }

    #[test]
    fn split_schemeless_with_path() {
        assert_eq!(parts("a.example/b/c"), (&b"a.example"[..], &b"/b/c"[..]));
    }

    #[test]
    fn split_uses_first_scheme_separator() {
        assert_eq!(
            parts("http://h/redirect?to=https://evil/"),
            (&b"h"[..], &b"/redirect?to=https://evil/"[..])
        );
    }

    #[test]
    fn split_rejects_empty() {
        assert!(matches!(split_url(b""), Err(Error::InvalidInput(_))));
        assert!(vectorize("").is_err());
    }

    #[test]
    fn split_reassembles() {
        for url in ["http://a.example/x?q=1", "a.example", "ftp://h", "x://", "/only/path"] {
            assert_eq!(split_url(url.as_bytes()).unwrap().reassemble(), url.as_bytes());
        }
    }

    #[test]
    fn extract_pair() {
        assert_eq!(extract_bytes(b"ab"), vec![0x61, 0x62, 0x16]);
    }

    #[test]
    fn extract_single() {
        assert_eq!(extract_bytes(b"a"), vec![0x61]);
    }

    #[test]
    fn extract_repeated() {
        assert_eq!(extract_bytes(b"aa"), vec![0x61, 0x61, 0x16]);
    }

    #[test]
    fn extract_empty() {
        assert!(extract_bytes(b"").is_empty());
    }

    #[test]
    fn extract_high_bytes() {
        // 0xF1 0x2E → overlap 0x12; 0x2E 0xFF → overlap 0xEF
        assert_eq!(extract_bytes(&[0xF1, 0x2E, 0xFF]), vec![0xF1, 0x2E, 0xFF, 0x12, 0xEF]);
    }

    #[test]
    fn histogram_counts() {
        let h = histogram(&[0x61, 0x62, 0x16]);
        assert_eq!((h.counts[0x61], h.counts[0x62], h.counts[0x16]), (1, 1, 1));
        assert_eq!(h.total(), 3);

        let h = histogram(&[0x61, 0x61, 0x16]);
        assert_eq!((h.counts[0x61], h.counts[0x16]), (2, 1));
        assert_eq!(h.total(), 3);

        assert_eq!(histogram(&[]), ByteHistogram::default());
    }

    #[test]
    fn direct_count_matches_extraction() {
        let s = b"http://www.example.com/%E3%81%82?x=\xff\x00";
        assert_eq!(ByteHistogram::of_part(s), histogram(&extract_bytes(s)));
    }

    #[test]
    fn vectorize_single_char_host() {
        let v = vectorize("a").unwrap();
        for (i, &x) in v.as_slice().iter().enumerate() {
            assert_eq!(x, if i == 0x61 { 1.0 } else { 0.0 }, "index {i}");
        }
    }

    #[test]
    fn vectorize_halves_follow_the_split() {
        // The path keeps its leading '/', so "ab" and "/ab" are distinct parts.
        let v = vectorize("http://ab/ab").unwrap();
        let host = vectorize("ab").unwrap();
        let path_only = vectorize("http:///ab").unwrap();
        assert_eq!(v.host_half(), host.host_half());
        assert_eq!(v.path_half(), path_only.path_half());
        assert_ne!(v.host_half(), v.path_half());
        assert_eq!(v, vectorize("ab/ab").unwrap());
    }

    #[test]
    fn identical_hosts_give_identical_host_halves() {
        let a = vectorize("http://ab/x").unwrap();
        let b = vectorize("https://ab/yy?z").unwrap();
        assert_eq!(a.host_half(), b.host_half());
    }

    #[test]
    fn vectorize_two_chars() {
        let v = vectorize("ab").unwrap();
        let third = 1.0 / 3f64.sqrt();
        for (i, &x) in v.host_half().iter().enumerate() {
            let expected = if [0x61, 0x62, 0x16].contains(&i) { third } else { 0.0 };
            assert!((x - expected).abs() < 1e-15, "index {i}: {x}");
        }
        assert!(v.path_half().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vectorize_rows_parallel_matches_sequential() {
        let urls: Vec<String> = (0..37).map(|i| format!("http://h{i}.example/p/{}", i * i)).collect();
        let seq = vectorize_rows(&urls, 0).unwrap();
        let par = vectorize_rows(&urls, 3).unwrap();
        assert_eq!(seq, par);
        assert_eq!(&seq[5 * VECTOR_DIM..6 * VECTOR_DIM], vectorize(&urls[5]).unwrap().as_slice());
    }
}
