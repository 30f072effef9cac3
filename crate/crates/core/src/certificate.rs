//! The certificate file format.
//!
//! A certificate is a JSON object with keys `header`, `labels` (pipeline
//! only), `pairs` and `scheme`. Object keys appear in sorted order, pairs
//! are sorted with the smaller word first, and every number that is not
//! an index is an exact string `"p/2^q"`, so emitting the same certificate
//! twice gives identical bytes. Events are tuples: proximal stage events
//! `[stage, time, upper]`, separation events `[time, lower]` and splitting
//! witnesses `[k, position]`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cantor::{Scheme, Word};
use crate::dyadic::Dyadic;
use crate::fusion::{HomomorphismCertificate, MycielskiScheme, Nat};
use crate::relations::{SeparationEvent, StageEvent};
use crate::scrambler::{PipelineScheme, Scrambled};
use crate::systems::{Cell, SystemSpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed certificate {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildInfo {
    pub package: String,
    pub version: String,
}

impl BuildInfo {
    pub fn current() -> Self {
        BuildInfo {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsRecord {
    pub delta: Dyadic,
    pub eps: Dyadic,
    pub k: usize,
    pub slack: Dyadic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub build: BuildInfo,
    /// `scramble`, `fuse`, `mycielski` or `pipeline`.
    pub construction: String,
    pub depth: usize,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    pub system: SystemSpec,
    pub version: u32,
}

/// `[stage, time, upper]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord(pub usize, pub usize, pub Dyadic);

/// `[time, lower]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationRecord(pub usize, pub Dyadic);

impl From<&StageEvent> for StageRecord {
    fn from(e: &StageEvent) -> Self {
        StageRecord(e.stage, e.time, e.upper.clone())
    }
}

impl From<&SeparationEvent> for SeparationRecord {
    fn from(e: &SeparationEvent) -> Self {
        SeparationRecord(e.time, e.lower.clone())
    }
}

/// Edge certification of a G0 edge pair: its level and the `ψ` value
/// whose `φ_G` box contains the two branch cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub level: usize,
    pub psi: Vec<Nat>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub a: Word,
    pub b: Word,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub proximal: Vec<StageRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub separation: Vec<SeparationRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub splitting: Vec<(usize, usize)>,
}

impl PairRecord {
    pub fn new(a: Word, b: Word) -> Self {
        PairRecord {
            a,
            b,
            edge: None,
            proximal: Vec::new(),
            separation: Vec::new(),
            splitting: Vec::new(),
        }
    }

    pub fn name(&self) -> String {
        format!("({}, {})", self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub header: Header,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeMap<String, Word>>,
    pub pairs: Vec<PairRecord>,
    pub scheme: BTreeMap<String, Cell>,
}

fn scheme_map(sch: &Scheme) -> BTreeMap<String, Cell> {
    sch.entries().map(|(w, c)| (w.to_string(), c.clone())).collect()
}

fn symbolic_horizon(sch: &Scheme) -> usize {
    sch.leaves()
        .iter()
        .map(|c| match c {
            Cell::Symbolic(p) => p.len(),
            Cell::Interval(_) => 0,
        })
        .max()
        .unwrap_or(0)
}

impl Certificate {
    pub fn from_scrambled(s: &Scrambled) -> Self {
        let pairs = s
            .pairs
            .iter()
            .map(|p| PairRecord {
                proximal: p.found_stages().iter().map(StageRecord::from).collect(),
                separation: p.separations.iter().map(SeparationRecord::from).collect(),
                ..PairRecord::new(p.a.clone(), p.b.clone())
            })
            .collect();
        Certificate {
            header: Header {
                build: BuildInfo::current(),
                construction: "scramble".into(),
                depth: s.depth,
                horizon: s.params.horizon,
                oracle: None,
                params: Some(ParamsRecord {
                    delta: s.params.delta.clone(),
                    eps: s.params.eps.clone(),
                    k: s.params.k,
                    slack: s.params.slack.clone(),
                }),
                relation: None,
                system: s.system.spec(),
                version: FORMAT_VERSION,
            },
            labels: None,
            pairs,
            scheme: scheme_map(&s.scheme),
        }
    }

    pub fn from_homomorphism(h: &HomomorphismCertificate) -> Self {
        let mut edges: BTreeMap<(Word, Word), _> = BTreeMap::new();
        for e in &h.edges {
            edges.insert((e.a.clone(), e.b.clone()), e);
        }
        let pairs = h
            .stages
            .iter()
            .map(|p| {
                let mut rec = PairRecord::new(p.a.clone(), p.b.clone());
                rec.proximal = p.event.iter().map(StageRecord::from).collect();
                if let Some(e) = edges.get(&(p.a.clone(), p.b.clone())) {
                    rec.edge = Some(EdgeRecord {
                        level: e.level,
                        psi: e.psi.clone(),
                    });
                    rec.separation = e.separations.iter().map(SeparationRecord::from).collect();
                }
                rec
            })
            .collect();
        Certificate {
            header: Header {
                build: BuildInfo::current(),
                construction: "fuse".into(),
                depth: h.depth,
                horizon: h.horizon(),
                oracle: Some(h.oracle.clone()),
                params: None,
                relation: None,
                system: h.system.spec(),
                version: FORMAT_VERSION,
            },
            labels: None,
            pairs,
            scheme: scheme_map(&h.scheme),
        }
    }

    pub fn from_mycielski(m: &MycielskiScheme) -> Self {
        let depth = m.depth();
        let scheme = m.scheme();
        let leaves: Vec<Word> = Word::all_of_length(depth).collect();
        let mut pairs = Vec::new();
        for (i, a) in leaves.iter().enumerate() {
            for b in &leaves[i + 1..] {
                let mut rec = PairRecord::new(a.clone(), b.clone());
                rec.splitting = m.pair_witnesses(a, b);
                pairs.push(rec);
            }
        }
        Certificate {
            header: Header {
                build: BuildInfo::current(),
                construction: "mycielski".into(),
                depth,
                horizon: symbolic_horizon(&scheme),
                oracle: None,
                params: None,
                relation: Some(m.family.clone()),
                system: crate::systems::SystemHandle::full_shift().spec(),
                version: FORMAT_VERSION,
            },
            labels: None,
            pairs,
            scheme: scheme_map(&scheme),
        }
    }

    pub fn from_pipeline(p: &PipelineScheme) -> Self {
        let labels = p
            .labels
            .iter()
            .enumerate()
            .flat_map(|(d, level)| {
                level
                    .iter()
                    .enumerate()
                    .map(move |(v, u)| (Word::from_value(v as u64, d).to_string(), u.clone()))
            })
            .collect();
        let pairs = p
            .pairs
            .iter()
            .map(|q| PairRecord {
                proximal: q.stage.iter().map(StageRecord::from).collect(),
                splitting: q.splitting.clone(),
                ..PairRecord::new(q.a.clone(), q.b.clone())
            })
            .collect();
        Certificate {
            header: Header {
                build: BuildInfo::current(),
                construction: "pipeline".into(),
                depth: p.depth,
                horizon: symbolic_horizon(&p.scheme),
                oracle: Some(p.oracle.clone()),
                params: None,
                relation: Some(p.family.clone()),
                system: p.system.spec(),
                version: FORMAT_VERSION,
            },
            labels: Some(labels),
            pairs,
            scheme: scheme_map(&p.scheme),
        }
    }

    /// Streams the canonical form to `out`, followed by a newline.
    pub fn write_to<W: Write>(&self, out: W) -> io::Result<()> {
        let mut out = BufWriter::new(out);
        serde_json::to_writer(&mut out, self).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
        out.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    pub fn emit(&self, path: &Path) -> Result<(), CertificateError> {
        let io_err = |source| CertificateError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        self.write_to(file).map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, CertificateError> {
        let file = File::open(path).map_err(|source| CertificateError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_reader(BufReader::new(file)).map_err(|source| CertificateError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    /// The scheme as a tree, if the map holds exactly the words of length
    /// at most `header.depth`.
    pub fn scheme_tree(&self) -> Result<Scheme, String> {
        let depth = self.header.depth;
        let expected = (1usize << (depth + 1)) - 1;
        if self.scheme.len() != expected {
            return Err(format!("{} scheme entries, expected {expected}", self.scheme.len()));
        }
        let mut levels: Vec<Vec<Option<Cell>>> = (0..=depth).map(|d| vec![None; 1 << d]).collect();
        for (key, cell) in &self.scheme {
            let w: Word = key.parse().map_err(|_| format!("scheme key {key:?} is not a word"))?;
            if w.len() > depth {
                return Err(format!("scheme key {key:?} is deeper than {depth}"));
            }
            levels[w.len()][w.value() as usize] = Some(cell.clone());
        }
        let levels = levels
            .into_iter()
            .map(|l| l.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or("scheme map is missing words")?;
        Scheme::from_levels(levels).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scrambler::{scramble, ScrambleParams};
    use crate::systems::SystemHandle;

    fn small() -> Certificate {
        let params = ScrambleParams {
            eps: Dyadic::pow2_neg(4),
            delta: Dyadic::one(),
            k: 1,
            horizon: 20,
            slack: Dyadic::zero(),
        };
        Certificate::from_scrambled(&scramble(&SystemHandle::full_shift(), 2, &params).unwrap())
    }

    #[test]
    fn canonical_bytes_and_round_trip() {
        let c = small();
        let bytes = c.to_bytes();
        assert_eq!(bytes, small().to_bytes());
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("{\"header\":{\"build\":"));
        assert!(text.contains("{\"a\":\"00\",\"b\":\"10\",\"proximal\":[[0,1,\"1/2^1\"]"));
        let back: Certificate = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.scheme_tree().unwrap().depth(), 2);
    }

    #[test]
    fn incomplete_scheme_maps_are_rejected() {
        let mut c = small();
        c.scheme.remove("01");
        assert!(c.scheme_tree().is_err());
        let mut c = small();
        let cell = c.scheme.remove("01").unwrap();
        c.scheme.insert("011".into(), cell);
        assert!(c.scheme_tree().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = String::from_utf8(small().to_bytes()).unwrap();
        let bad = text.replacen("\"header\":{", "\"header\":{\"extra\":1,", 1);
        assert!(serde_json::from_str::<Certificate>(&bad).is_err());
    }
}
