use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{Lexicon, Result, SenseName, Synset, SynsetId, WordNetError};

const INDEX: &str = "index.noun";
const DATA: &str = "data.noun";

/// Loads `index.noun` and `data.noun` from a WordNet `dict/` directory.
pub fn load_wordnet_dir(dir: impl AsRef<Path>) -> Result<Lexicon> {
    let dir = dir.as_ref();
    let index = BufReader::new(File::open(dir.join(INDEX))?);
    let data = BufReader::new(File::open(dir.join(DATA))?);
    load_wordnet(index, data)
}

/// Parses the noun index and data files. The release id is taken from the
/// license header (`WordNet 3.0 Copyright ...`) when present.
pub fn load_wordnet(index: impl BufRead, data: impl BufRead) -> Result<Lexicon> {
    parse_wordnet(index, data, None)
}

pub fn parse_wordnet(index: impl BufRead, data: impl BufRead, release_id: Option<&str>) -> Result<Lexicon> {
    let mut detected = None;
    let mut synsets = Vec::new();
    for (n, line) in data.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        if line.starts_with("  ") {
            if detected.is_none() {
                detected = release_from_header(&line);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        synsets.push(parse_data_line(&line, lineno)?);
    }

    let mut sense_index = BTreeMap::new();
    for (n, line) in index.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        if line.starts_with("  ") || line.trim().is_empty() {
            continue;
        }
        let (lemma, offsets) = parse_index_line(&line, lineno)?;
        for (k, offset) in offsets.into_iter().enumerate() {
            sense_index.insert(SenseName::noun(&lemma, k as u32 + 1), SynsetId::noun(offset));
        }
    }

    let release = release_id
        .map(str::to_string)
        .or(detected)
        .unwrap_or_else(|| "wordnet".to_string());
    Lexicon::new(release, synsets, sense_index)
}

fn release_from_header(line: &str) -> Option<String> {
    let rest = &line[line.find("WordNet ")? + "WordNet ".len()..];
    let version: String = rest.chars().take_while(|c| c.is_ascii_digit() || *c == '.').collect();
    let version = version.trim_end_matches('.');
    (!version.is_empty()).then(|| format!("wordnet-{version}"))
}

fn parse_error(file: &'static str, line: usize, message: impl Into<String>) -> WordNetError {
    WordNetError::Parse {
        file,
        line,
        message: message.into(),
    }
}

/// `synset_offset lex_filenum ss_type w_cnt word lex_id [word lex_id...] p_cnt
/// [ptr...] [frames...] | gloss`
fn parse_data_line(line: &str, lineno: usize) -> Result<Synset> {
    let err = |m: &str| parse_error(DATA, lineno, m);
    let (head, gloss) = match line.split_once('|') {
        Some((head, gloss)) => (head, gloss.trim()),
        None => (line, ""),
    };
    let mut fields = head.split_ascii_whitespace();
    let mut next = |what: &str| fields.next().ok_or_else(|| err(&format!("missing {what}")));

    let offset: u64 = next("synset offset")?
        .parse()
        .map_err(|_| err("synset offset is not a number"))?;
    next("lex_filenum")?;
    let ss_type = next("ss_type")?;
    if ss_type != "n" {
        return Err(err(&format!("unexpected ss_type `{ss_type}` in noun database")));
    }
    let w_cnt = usize::from_str_radix(next("w_cnt")?, 16).map_err(|_| err("w_cnt is not hex"))?;
    if w_cnt == 0 {
        return Err(err("synset has no words"));
    }
    let mut lemmas = Vec::with_capacity(w_cnt);
    for _ in 0..w_cnt {
        lemmas.push(next("word")?.to_string());
        next("lex_id")?;
    }
    let p_cnt: usize = next("p_cnt")?.parse().map_err(|_| err("p_cnt is not a number"))?;
    let mut hyponyms = Vec::new();
    let mut hypernyms = Vec::new();
    for _ in 0..p_cnt {
        let symbol = next("pointer symbol")?;
        let target: u64 = next("pointer offset")?
            .parse()
            .map_err(|_| err("pointer offset is not a number"))?;
        let pos = next("pointer pos")?;
        next("pointer source/target")?;
        if pos != "n" {
            continue;
        }
        match symbol {
            "~" => hyponyms.push(SynsetId::noun(target)),
            "@" => hypernyms.push(SynsetId::noun(target)),
            _ => {}
        }
    }

    Ok(Synset {
        id: SynsetId::noun(offset),
        lemmas,
        gloss: gloss.to_string(),
        hyponyms,
        hypernyms,
    })
}

/// `lemma pos synset_cnt p_cnt [ptr_symbol...] sense_cnt tagsense_cnt
/// synset_offset [synset_offset...]`
fn parse_index_line(line: &str, lineno: usize) -> Result<(String, Vec<u64>)> {
    let err = |m: &str| parse_error(INDEX, lineno, m);
    let fields: Vec<&str> = line.split_ascii_whitespace().collect();
    if fields.len() < 6 {
        return Err(err("too few fields"));
    }
    let lemma = fields[0];
    if fields[1] != "n" {
        return Err(err(&format!("unexpected pos `{}` in noun index", fields[1])));
    }
    let synset_cnt: usize = fields[2].parse().map_err(|_| err("synset_cnt is not a number"))?;
    let p_cnt: usize = fields[3].parse().map_err(|_| err("p_cnt is not a number"))?;
    let first_offset = 4 + p_cnt + 2;
    if fields.len() != first_offset + synset_cnt {
        return Err(err(&format!(
            "expected {synset_cnt} synset offsets, found {}",
            fields.len().saturating_sub(first_offset)
        )));
    }
    let offsets = fields[first_offset..]
        .iter()
        .map(|f| f.parse().map_err(|_| err(&format!("bad synset offset `{f}`"))))
        .collect::<Result<Vec<u64>>>()?;
    Ok((lemma.to_string(), offsets))
}
