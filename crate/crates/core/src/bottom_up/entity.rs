use super::Query;

pub const DEFAULT_REFERENTS: &[&str] = &["该公司", "本公司", "公司", "the company", "The company", "the Company"];

/// Longer words that contain a referent but name something else.
const COMPOUNDS: &[&str] = &["子公司", "母公司", "分公司", "总公司", "公司债", "控股公司"];

fn find_all(hay: &[char], needle: &[char]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return Vec::new();
    }
    (0..=hay.len() - needle.len())
        .filter(|&i| hay[i..i + needle.len()] == *needle)
        .collect()
}

fn is_word_char(c: Option<&char>) -> bool {
    c.is_some_and(|c| c.is_alphanumeric() && c.is_ascii())
}

/// Replaces generic references ("公司", "the company", ...) with the
/// report's company name. Longest referent wins; occurrences inside the
/// company name itself, directly after it ("XX科技公司") or inside known
/// compounds (子公司, 公司债, ...) are left alone. Latin referents must sit on
/// word boundaries.
pub fn complete_entities(query: &Query, company: Option<&str>, referents: &[String]) -> Query {
    let Some(company) = company.map(str::trim).filter(|c| !c.is_empty()) else {
        return query.clone();
    };
    let chars: Vec<char> = query.text.chars().collect();
    let company_chars: Vec<char> = company.chars().collect();
    let mut protected = vec![false; chars.len()];
    let mut after_company = vec![false; chars.len() + 1];
    for start in find_all(&chars, &company_chars) {
        protected[start..start + company_chars.len()].fill(true);
        after_company[start + company_chars.len()] = true;
    }
    for word in COMPOUNDS {
        let w: Vec<char> = word.chars().collect();
        for start in find_all(&chars, &w) {
            protected[start..start + w.len()].fill(true);
        }
    }

    let mut refs: Vec<Vec<char>> = referents
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| r.chars().collect())
        .collect();
    refs.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

    let mut out = String::with_capacity(query.text.len());
    let mut replaced = 0;
    let mut i = 0;
    'scan: while i < chars.len() {
        if !protected[i] && !after_company[i] {
            for r in &refs {
                let end = i + r.len();
                if end > chars.len() || chars[i..end] != r[..] || protected[i..end].iter().any(|p| *p) {
                    continue;
                }
                let latin = r.iter().all(|c| c.is_ascii());
                if latin && (is_word_char(i.checked_sub(1).and_then(|j| chars.get(j))) || is_word_char(chars.get(end))) {
                    continue;
                }
                out.push_str(company);
                replaced += 1;
                i = end;
                continue 'scan;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    if replaced > 0 {
        log::debug!("{}: {} referent(s) -> {company}: {out}", query.query_id, replaced);
    }
    Query {
        text: out,
        ..query.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bottom_up::{QueryLevel, QuerySource};

    fn q(text: &str) -> Query {
        Query {
            query_id: "d-p0".into(),
            text: text.into(),
            level: QueryLevel::Passage,
            source: QuerySource::default(),
        }
    }

    fn refs() -> Vec<String> {
        DEFAULT_REFERENTS.iter().map(|s| s.to_string()).collect()
    }

    fn complete(text: &str, company: Option<&str>) -> String {
        complete_entities(&q(text), company, &refs()).text
    }

    #[test]
    fn generic_company_replaced() {
        assert_eq!(complete("公司今年财务状况如何？", Some("XX科技")), "XX科技今年财务状况如何？");
    }

    #[test]
    fn no_referent_unchanged() {
        assert_eq!(complete("钢铁需求如何变化？", Some("XX科技")), "钢铁需求如何变化？");
    }

    #[test]
    fn no_company_unchanged() {
        assert_eq!(complete("公司今年财务状况如何？", None), "公司今年财务状况如何？");
    }

    #[test]
    fn two_occurrences_and_longest_first() {
        assert_eq!(
            complete("该公司营收增长，公司利润如何？", Some("XX科技")),
            "XX科技营收增长，XX科技利润如何？"
        );
    }

    #[test]
    fn compounds_and_name_suffix_kept() {
        assert_eq!(complete("子公司业绩如何？", Some("XX科技")), "子公司业绩如何？");
        assert_eq!(complete("XX科技公司营收如何？", Some("XX科技")), "XX科技公司营收如何？");
        // company name that itself ends in 公司
        assert_eq!(complete("XX有限公司营收如何？", Some("XX有限公司")), "XX有限公司营收如何？");
    }

    #[test]
    fn latin_referent_on_word_boundary() {
        assert_eq!(complete("How is the company doing?", Some("ACME")), "How is ACME doing?");
        assert_eq!(complete("the companyX plan", Some("ACME")), "the companyX plan");
    }

    #[test]
    fn oracle_on_crafted_strings() {
        // independent rule: split on the referent, rejoin with the company
        let text = "公司A，公司B，公司C";
        let expected = text.split("公司").collect::<Vec<_>>().join("XX");
        assert_eq!(complete(text, Some("XX")), expected);
    }
}
