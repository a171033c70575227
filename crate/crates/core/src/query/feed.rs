use atom_syndication::{Category, Entry, Feed, FixedDateTime, Person, Text};
use chrono::{NaiveDate, TimeZone, Utc};
use std::fmt::Write as _;

use serde::Serialize;

use super::{execute, fraction_text, CitationNote, KnowledgeGraph, QueryError, ResultEntry, SavedQuery};
use crate::canonical::canonical_encode;
use crate::coe::CoERef;

fn midnight(d: NaiveDate) -> FixedDateTime {
    Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).expect("midnight")).fixed_offset()
}

/// Atom feed of the top `limit` results of a public query.
///
/// `as_of` stamps the feed and any entry without a certificate date, so the
/// document depends only on the graph and the arguments.
pub fn feed(graph: &KnowledgeGraph, q: &SavedQuery, limit: usize, as_of: NaiveDate) -> Result<String, QueryError> {
    if !q.public {
        return Err(QueryError::QueryPrivate(q.id.clone()));
    }
    let results = execute(graph, q, None)?;
    let mut f = Feed::default();
    f.set_id(format!("urn:scholnet:query:{}", q.id));
    f.set_title(Text::plain(q.id.clone()));
    f.set_subtitle(Text::plain(String::from_utf8(q.definition()).expect("canonical text is UTF-8")));
    f.set_updated(midnight(as_of));
    f.set_authors(vec![Person { name: q.owner.name.clone(), ..Default::default() }]);
    f.set_entries(results.iter().take(limit).map(|r| entry(r, as_of)).collect::<Vec<_>>());
    Ok(f.to_string())
}

fn entry(r: &ResultEntry, as_of: NaiveDate) -> Entry {
    let h = &r.handle;
    let mut e = Entry::default();
    e.set_id(h.fingerprint.to_path_form());
    e.set_title(Text::plain(h.title.clone().unwrap_or_else(|| h.fingerprint.to_path_form())));
    e.set_updated(midnight(h.earliest_coe_date().unwrap_or(as_of)));
    e.set_authors(
        h.authors
            .iter()
            .flatten()
            .map(|a| Person { name: a.clone(), ..Default::default() })
            .collect::<Vec<_>>(),
    );
    let mut summary = vec![format!("score: {}", r.score.as_ref().map(fraction_text).unwrap_or_else(|| "none".into()))];
    if !h.coes.is_empty() {
        summary.push(format!("coes: {}", h.coes.iter().map(CoERef::to_string).collect::<Vec<_>>().join(" ")));
    }
    for n in &r.notes {
        summary.push(format!(
            "{:?} {} -> {}{}",
            n.relation,
            n.source,
            n.target,
            n.statement.as_deref().map(|s| format!(": {s}")).unwrap_or_default()
        ));
    }
    e.set_summary(Some(Text::plain(summary.join("\n"))));
    e.set_categories(vec![Category { term: r.label().to_owned(), ..Default::default() }]);
    e
}

#[derive(Serialize)]
struct ListEntry<'a> {
    handle: &'a crate::model::DocumentHandle,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<String>,
    kind: &'static str,
    notes: &'a [CitationNote],
}

/// The same results as a canonical list, for machines.
pub fn results_canonical(results: &[ResultEntry]) -> Vec<u8> {
    let list: Vec<ListEntry<'_>> = results
        .iter()
        .map(|r| ListEntry { handle: &r.handle, score: r.score.as_ref().map(fraction_text), kind: r.label(), notes: &r.notes })
        .collect();
    canonical_encode(&list).expect("results are encodable").into_vec()
}


/// One line per result (`kind, title, score, fingerprint`), each followed by
/// its citation context lines.
pub fn results_text(results: &[ResultEntry]) -> String {
    let mut out = String::new();
    for r in results {
        let score = r.score.as_ref().map_or("unscored".to_owned(), fraction_text);
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.label(), r.handle.title.as_deref().unwrap_or("-"), score, r.handle.fingerprint);
        for n in &r.notes {
            let grades: Vec<String> = n.grades.iter().map(|g| format!("{}/{}", g.value, g.scale_max)).collect();
            let _ = writeln!(out, "  citation\t{:?}\t{} -> {}\tendorsements [{}]", n.relation, n.source, n.target, grades.join(" "));
        }
    }
    out
}
